#include "dcppo/mdp.hpp"
#include "dcppo/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dcppo {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::string at(const char* what, int h) {
    std::ostringstream os;
    os << what << " at step " << h;
    return os.str();
}

} // namespace

std::string to_string(FeatureMode mode) {
    return mode == FeatureMode::one_hot_tabular ? "one_hot_tabular" : "random_linear";
}

FeatureMode feature_mode_from_string(const std::string& name) {
    if (name == "one_hot_tabular") return FeatureMode::one_hot_tabular;
    if (name == "random_linear") return FeatureMode::random_linear;
    throw std::invalid_argument("unknown feature_mode: " + name);
}

Eigen::MatrixXd TabularLinearMdp::reward_table(int h) const {
    Eigen::MatrixXd r(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) r(s, a) = reward(h, s, a);
    return r;
}

void TabularLinearMdp::validate() const {
    require(S >= 2, "S must be >= 2 (one absorbing state is reserved)");
    require(A >= 2, "A must be >= 2 (one anchor action is reserved)");
    require(H >= 1, "H must be >= 1");
    require(d >= 1, "d must be >= 1");
    require(s_init >= 0 && s_init < S, "s_init out of range");
    require(s_abs >= 0 && s_abs < S, "s_abs out of range");
    require(a_anchor >= 0 && a_anchor < A, "a_anchor out of range");
    require(phi.rows() == static_cast<Eigen::Index>(S) * A && phi.cols() == d,
            "phi must be (S*A) x d");
    require(static_cast<int>(P.size()) == H, "P must have H entries");
    require(static_cast<int>(w.size()) == H, "w must have H entries");

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double norm = phi.row(s * A + a).norm();
            require(norm <= 1.0 + 1e-12, "feature norm exceeds 1 at (s,a)=(" +
                                             std::to_string(s) + "," + std::to_string(a) + ")");
        }
        require(phi.row(s * A + a_anchor).lpNorm<Eigen::Infinity>() == 0.0,
                "phi(s, a_anchor) must be exactly zero at s=" + std::to_string(s));
    }

    for (int h = 0; h < H; ++h) {
        require(P[h].rows() == static_cast<Eigen::Index>(S) * A && P[h].cols() == S,
                at("P must be (S*A) x S", h));
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const auto row = P[h].row(s * A + a);
                require(row.minCoeff() >= 0.0, at("negative transition probability", h));
                require(std::abs(row.sum() - 1.0) <= 1e-12, at("transition row does not sum to 1", h));
                double r = reward(h, s, a);
                require(r >= -1e-12 && r <= 1.0 + 1e-12, at("reward outside [0,1]", h));
            }
            // Anchor opts out: point mass on the absorbing state.
            require(P[h](s * A + a_anchor, s_abs) == 1.0, at("anchor transition must hit s_abs", h));
        }
        for (int a = 0; a < A; ++a) {
            require(P[h](s_abs * A + a, s_abs) == 1.0, at("s_abs must be absorbing", h));
            require(std::abs(reward(h, s_abs, a)) <= 1e-12, at("s_abs reward must be zero", h));
        }
        require(w[h].size() == d, at("w dimension mismatch", h));
        require(w[h].norm() <= std::sqrt(static_cast<double>(d)) + 1e-9,
                at("||w_h|| exceeds sqrt(d)", h));
    }
}

void PolicyTable::validate(int S, int A) const {
    for (int h = 0; h < horizon(); ++h) {
        if (probs[h].rows() != S || probs[h].cols() != A)
            throw std::invalid_argument(at("policy table dimension mismatch", h));
        for (int s = 0; s < S; ++s) {
            const auto row = probs[h].row(s);
            if (row.minCoeff() < 0.0 || std::abs(row.sum() - 1.0) > 1e-12)
                throw std::invalid_argument(at("policy row is not a distribution", h));
        }
    }
}

PolicyTable PolicyTable::deterministic(const std::vector<Eigen::VectorXi>& actions, int A) {
    PolicyTable pi;
    pi.probs.reserve(actions.size());
    for (const auto& acts : actions) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(acts.size(), A);
        for (Eigen::Index s = 0; s < acts.size(); ++s) m(s, acts[s]) = 1.0;
        pi.probs.push_back(std::move(m));
    }
    return pi;
}

ValueTables evaluate_policy(const TabularLinearMdp& mdp, const PolicyTable& pi, double gamma) {
    if (pi.horizon() != mdp.H)
        throw std::invalid_argument("policy horizon " + std::to_string(pi.horizon()) +
                                    " does not match mdp horizon " + std::to_string(mdp.H));
    pi.validate(mdp.S, mdp.A);

    ValueTables vt;
    vt.Q.resize(mdp.H);
    vt.V.resize(mdp.H);
    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(mdp.S); // V_H = 0
    for (int h = mdp.H - 1; h >= 0; --h) {
        Eigen::MatrixXd q = mdp.reward_table(h);
        if (gamma != 0.0) {
            Eigen::VectorXd pv = mdp.P[h] * v_next; // (S*A)
            for (int s = 0; s < mdp.S; ++s)
                for (int a = 0; a < mdp.A; ++a) q(s, a) += gamma * pv[s * mdp.A + a];
        }
        vt.V[h] = (pi.probs[h].array() * q.array()).rowwise().sum();
        vt.Q[h] = std::move(q);
        v_next = vt.V[h];
    }
    return vt;
}

std::pair<PolicyTable, ValueTables> optimal_policy(const TabularLinearMdp& mdp) {
    ValueTables vt;
    vt.Q.resize(mdp.H);
    vt.V.resize(mdp.H);
    std::vector<Eigen::VectorXi> actions(mdp.H);

    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(mdp.S);
    for (int h = mdp.H - 1; h >= 0; --h) {
        Eigen::MatrixXd q = mdp.reward_table(h);
        Eigen::VectorXd pv = mdp.P[h] * v_next;
        for (int s = 0; s < mdp.S; ++s)
            for (int a = 0; a < mdp.A; ++a) q(s, a) += pv[s * mdp.A + a];

        actions[h].resize(mdp.S);
        vt.V[h].resize(mdp.S);
        for (int s = 0; s < mdp.S; ++s) {
            int best = 0;
            double best_q = q(s, 0);
            for (int a = 1; a < mdp.A; ++a) {
                if (q(s, a) > best_q) { // strict: ties keep the lowest index
                    best_q = q(s, a);
                    best = a;
                }
            }
            actions[h][s] = best;
            vt.V[h][s] = best_q;
        }
        vt.Q[h] = std::move(q);
        v_next = vt.V[h];
    }
    return {PolicyTable::deterministic(actions, mdp.A), std::move(vt)};
}

double suboptimality(const TabularLinearMdp& mdp, const PolicyTable& pi) {
    auto [pi_star, vt_star] = optimal_policy(mdp);
    ValueTables vt = evaluate_policy(mdp, pi, 1.0);
    return vt_star.V[0][mdp.s_init] - vt.V[0][mdp.s_init];
}

TabularLinearMdp random_instance(std::uint64_t seed, int S, int A, int H, int d,
                                 FeatureMode feature_mode, bool deterministic_transitions) {
    if (S < 2) throw std::invalid_argument("random_instance: S must be >= 2");
    if (A < 2) throw std::invalid_argument("random_instance: A must be >= 2");
    if (H < 1) throw std::invalid_argument("random_instance: H must be >= 1");
    if (feature_mode == FeatureMode::one_hot_tabular) {
        int forced = (S - 1) * (A - 1);
        if (d != forced)
            throw std::invalid_argument("random_instance: one_hot_tabular requires d = (S-1)*(A-1) = " +
                                        std::to_string(forced) + ", got " + std::to_string(d));
    } else if (d < 1) {
        throw std::invalid_argument("random_instance: d must be >= 1");
    }

    TabularLinearMdp mdp;
    mdp.S = S;
    mdp.A = A;
    mdp.H = H;
    mdp.d = d;
    mdp.s_init = 0;
    mdp.s_abs = S - 1;
    mdp.a_anchor = 0;
    mdp.feature_mode = feature_mode;
    mdp.seed = seed;

    CounterRng rng(mix_key(seed, 0x6d6470u /* "mdp" */));

    mdp.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S) * A, d);
    if (feature_mode == FeatureMode::one_hot_tabular) {
        int k = 0;
        for (int s = 0; s < S - 1; ++s)
            for (int a = 1; a < A; ++a) mdp.phi(s * A + a, k++) = 1.0;
    } else {
        for (int s = 0; s < S - 1; ++s) {
            for (int a = 1; a < A; ++a) {
                Eigen::VectorXd x(d);
                for (int j = 0; j < d; ++j) x[j] = rng.uniform01();
                x /= x.norm();
                x *= rng.uniform(0.5, 1.0); // keep strictly inside the unit ball
                mdp.phi.row(s * A + a) = x;
            }
        }
    }

    // Rewards in [0, 1/H] per non-anchor pair, so that cumulative values stay
    // in [0,1] and the representing weights satisfy ||w_h|| <= sqrt(d).
    mdp.w.resize(H);
    if (feature_mode == FeatureMode::one_hot_tabular) {
        for (int h = 0; h < H; ++h) {
            Eigen::VectorXd wh(d);
            for (int j = 0; j < d; ++j) wh[j] = rng.uniform01() / H;
            mdp.w[h] = wh;
        }
    } else {
        for (int h = 0; h < H; ++h) {
            Eigen::VectorXd wh(d);
            for (int j = 0; j < d; ++j) wh[j] = rng.uniform01();
            // Scale so the largest reward on the grid is exactly 1/H.
            double rmax = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) rmax = std::max(rmax, mdp.phi.row(s * A + a).dot(wh));
            if (rmax > 0.0) wh *= 1.0 / (H * rmax);
            double cap = std::sqrt(static_cast<double>(d));
            if (wh.norm() > cap) wh *= cap / wh.norm();
            mdp.w[h] = wh;
        }
    }

    mdp.P.assign(H, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S) * A, S));
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                auto row = mdp.P[h].row(s * A + a);
                if (s == mdp.s_abs || a == mdp.a_anchor) {
                    row[mdp.s_abs] = 1.0;
                } else if (deterministic_transitions) {
                    // Point mass on a random non-absorbing state.
                    int target = static_cast<int>(rng.uniform01() * (S - 1));
                    if (target >= S - 1) target = S - 2;
                    row[target] = 1.0;
                } else {
                    // Dirichlet-like draw over non-absorbing states via
                    // normalized exponentials.
                    double total = 0.0;
                    for (int t = 0; t < S - 1; ++t) {
                        double e = -std::log(rng.uniform01());
                        row[t] = e;
                        total += e;
                    }
                    row.head(S - 1) /= total;
                    // Renormalize exactly so the sum is 1 to the last ulp.
                    row.head(S - 1) /= row.head(S - 1).sum();
                }
            }
        }
    }
    mdp.validate();
    return mdp;
}

double linear_transition_residual(const TabularLinearMdp& mdp, int trials, std::uint64_t seed) {
    CounterRng rng(mix_key(seed, 0x6c696eu));
    double worst = 0.0;
    Eigen::MatrixXd pinv; // least-squares via normal equations on the feature grid
    Eigen::MatrixXd gram = mdp.phi.transpose() * mdp.phi;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram + 1e-12 * Eigen::MatrixXd::Identity(mdp.d, mdp.d));
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd v(mdp.S);
        for (int s = 0; s < mdp.S; ++s) v[s] = rng.uniform(0.0, mdp.H);
        v[mdp.s_abs] = 0.0;
        for (int h = 0; h < mdp.H; ++h) {
            Eigen::VectorXd pv = mdp.P[h] * v; // (S*A)
            Eigen::VectorXd u = ldlt.solve(mdp.phi.transpose() * pv);
            double res = (pv - mdp.phi * u).lpNorm<Eigen::Infinity>();
            worst = std::max(worst, res);
        }
    }
    return worst;
}

} // namespace dcppo
