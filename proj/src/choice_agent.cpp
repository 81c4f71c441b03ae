#include "dcppo/choice_agent.hpp"
#include "dcppo/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dcppo {

std::string to_string(SampleMechanism m) {
    return m == SampleMechanism::softmax ? "softmax" : "gumbel_argmax";
}

SampleMechanism mechanism_from_string(const std::string& name) {
    if (name == "softmax") return SampleMechanism::softmax;
    if (name == "gumbel_argmax") return SampleMechanism::gumbel_argmax;
    throw std::invalid_argument("unknown sampling mechanism: " + name);
}

void ChoiceDataset::validate() const {
    if (static_cast<int>(steps.size()) != H)
        throw std::invalid_argument("dataset step count does not match H");
    for (int h = 0; h < H; ++h) {
        const auto& st = steps[h];
        if (static_cast<int>(st.s.size()) != n || static_cast<int>(st.a.size()) != n ||
            static_cast<int>(st.s_next.size()) != n)
            throw std::invalid_argument("dataset arrays at step " + std::to_string(h) +
                                        " do not have length n");
        for (int i = 0; i < n; ++i) {
            if (st.s[i] < 0 || st.s[i] >= S || st.a[i] < 0 || st.a[i] >= A ||
                st.s_next[i] < 0 || st.s_next[i] >= S)
                throw std::invalid_argument("dataset index out of range at step " +
                                            std::to_string(h) + ", trajectory " + std::to_string(i));
            if (h + 1 < H && steps[h + 1].s[i] != st.s_next[i])
                throw std::invalid_argument("trajectory chaining broken at step " +
                                            std::to_string(h) + ", trajectory " + std::to_string(i));
        }
    }
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& q) {
    Eigen::MatrixXd p(q.rows(), q.cols());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        double m = q.row(s).maxCoeff();
        Eigen::ArrayXd e = (q.row(s).array() - m).exp();
        p.row(s) = e / e.sum();
    }
    return p;
}

BehaviorModel solve_ddc(const TabularLinearMdp& mdp, double gamma) {
    BehaviorModel bm;
    bm.gamma = gamma;
    bm.Q.resize(mdp.H);
    bm.V.resize(mdp.H);
    bm.pi_b.probs.resize(mdp.H);

    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(mdp.S);
    for (int h = mdp.H - 1; h >= 0; --h) {
        Eigen::MatrixXd q = mdp.reward_table(h);
        if (gamma != 0.0) {
            Eigen::VectorXd pv = mdp.P[h] * v_next;
            for (int s = 0; s < mdp.S; ++s)
                for (int a = 0; a < mdp.A; ++a) q(s, a) += gamma * pv[s * mdp.A + a];
        }
        Eigen::MatrixXd pi = softmax_rows(q);
        bm.V[h] = (pi.array() * q.array()).rowwise().sum();
        v_next = bm.V[h];
        bm.Q[h] = std::move(q);
        bm.pi_b.probs[h] = std::move(pi);
    }
    return bm;
}

namespace {

int draw_categorical(CounterRng& rng, const Eigen::VectorXd& p) {
    double u = rng.uniform01();
    double cum = 0.0;
    int last = static_cast<int>(p.size()) - 1;
    for (int k = 0; k < p.size(); ++k) {
        cum += p[k];
        if (u <= cum) return k;
    }
    return last;
}

int draw_gumbel_argmax(CounterRng& rng, const Eigen::VectorXd& q) {
    int best = 0;
    double best_v = q[0] + rng.gumbel();
    for (int a = 1; a < q.size(); ++a) {
        double v = q[a] + rng.gumbel();
        if (v > best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

} // namespace

ChoiceDataset sample_dataset(const TabularLinearMdp& mdp, const BehaviorModel& behavior,
                             int n, std::uint64_t seed, SampleMechanism mechanism) {
    if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
    if (behavior.pi_b.horizon() != mdp.H)
        throw std::invalid_argument("sample_dataset: behavior horizon mismatch");

    ChoiceDataset ds;
    ds.n = n;
    ds.H = mdp.H;
    ds.S = mdp.S;
    ds.A = mdp.A;
    ds.seed = seed;
    ds.gamma = behavior.gamma;
    ds.mechanism = mechanism;
    ds.steps.resize(mdp.H);
    for (auto& st : ds.steps) {
        st.s.resize(n);
        st.a.resize(n);
        st.s_next.resize(n);
    }

    for (int i = 0; i < n; ++i) {
        CounterRng rng(mix_key(seed, static_cast<std::uint64_t>(i)));
        int s = mdp.s_init;
        for (int h = 0; h < mdp.H; ++h) {
            int a;
            if (mechanism == SampleMechanism::softmax) {
                a = draw_categorical(rng, behavior.pi_b.probs[h].row(s));
            } else {
                a = draw_gumbel_argmax(rng, behavior.Q[h].row(s));
            }
            int s_next = draw_categorical(rng, mdp.P[h].row(s * mdp.A + a).transpose());
            ds.steps[h].s[i] = s;
            ds.steps[h].a[i] = a;
            ds.steps[h].s_next[i] = s_next;
            s = s_next;
        }
    }
    return ds;
}

std::vector<Eigen::VectorXd> empirical_state_distribution(const ChoiceDataset& ds) {
    if (ds.n < 1) throw std::invalid_argument("empirical_state_distribution: empty dataset");
    std::vector<Eigen::VectorXd> hist(ds.H, Eigen::VectorXd::Zero(ds.S));
    for (int h = 0; h < ds.H; ++h) {
        for (int i = 0; i < ds.n; ++i) hist[h][ds.steps[h].s[i]] += 1.0;
        hist[h] /= static_cast<double>(ds.n);
    }
    return hist;
}

std::vector<Eigen::VectorXd> state_occupancy(const TabularLinearMdp& mdp, const PolicyTable& pi) {
    if (pi.horizon() != mdp.H) throw std::invalid_argument("state_occupancy: horizon mismatch");
    std::vector<Eigen::VectorXd> occ(mdp.H);
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(mdp.S);
    rho[mdp.s_init] = 1.0;
    for (int h = 0; h < mdp.H; ++h) {
        occ[h] = rho;
        Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.S);
        for (int s = 0; s < mdp.S; ++s) {
            if (rho[s] == 0.0) continue;
            for (int a = 0; a < mdp.A; ++a) {
                double m = rho[s] * pi.probs[h](s, a);
                if (m == 0.0) continue;
                next += m * mdp.P[h].row(s * mdp.A + a).transpose();
            }
        }
        rho = next;
    }
    return occ;
}

} // namespace dcppo
