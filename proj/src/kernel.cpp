#include "dcppo/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dcppo {

std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::rbf: return "rbf";
        case KernelKind::polynomial: return "polynomial";
        case KernelKind::linear_via_features: return "linear_via_features";
    }
    return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "rbf") return KernelKind::rbf;
    if (name == "polynomial") return KernelKind::polynomial;
    if (name == "linear_via_features") return KernelKind::linear_via_features;
    throw std::invalid_argument("unknown kernel kind: " + name);
}

namespace {

double base_kernel(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    switch (spec.kind) {
        case KernelKind::rbf: {
            double q = (x - y).squaredNorm();
            return std::exp(-q / (2.0 * spec.bandwidth * spec.bandwidth));
        }
        case KernelKind::polynomial:
            return std::pow(x.dot(y) + spec.offset, spec.degree);
        case KernelKind::linear_via_features:
            return x.dot(y);
    }
    return 0.0;
}

Eigen::LDLT<Eigen::MatrixXd> factor_gram(const Eigen::MatrixXd& K, double lambda) {
    Eigen::MatrixXd M = K + lambda * Eigen::MatrixXd::Identity(K.rows(), K.cols());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
        ldlt.compute(M + 1e-10 * Eigen::MatrixXd::Identity(K.rows(), K.cols()));
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("kernel Gram factorization failed even with jitter");
    }
    return ldlt;
}

} // namespace

KernelMachine::KernelMachine(KernelSpec spec, FeatureMap features)
    : spec_(std::move(spec)), features_(std::move(features)) {
    if (spec_.lambda <= 0.0) throw std::invalid_argument("KernelSpec: lambda must be > 0");
    if (spec_.kind == KernelKind::rbf && spec_.bandwidth <= 0.0)
        throw std::invalid_argument("KernelSpec: bandwidth must be > 0");

    const int G = features_.S * features_.A;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(features_.d);
    full_.resize(G, G);

    // Anchor centering: K~(z,z') = K(z,z') - K(z,0) - K(0,z') + K(0,0). The
    // linear kernel already vanishes at the zero feature, so it is untouched.
    const bool center = spec_.kind != KernelKind::linear_via_features;
    Eigen::VectorXd k0(G);
    double k00 = center ? base_kernel(spec_, zero, zero) : 0.0;
    for (int z = 0; z < G; ++z)
        k0[z] = center ? base_kernel(spec_, features_.phi.row(z).transpose(), zero) : 0.0;

    for (int z1 = 0; z1 < G; ++z1) {
        for (int z2 = z1; z2 < G; ++z2) {
            double v = base_kernel(spec_, features_.phi.row(z1).transpose(),
                                   features_.phi.row(z2).transpose());
            if (center) v += k00 - k0[z1] - k0[z2];
            full_(z1, z2) = v;
            full_(z2, z1) = v;
        }
    }

    double diag_max = full_.diagonal().maxCoeff();
    if (diag_max > 1.0) full_ /= diag_max;
}

Eigen::MatrixXd KernelMachine::gram(const std::vector<int>& z) const {
    Eigen::MatrixXd K(z.size(), z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        for (std::size_t j = 0; j < z.size(); ++j) K(i, j) = full_(z[i], z[j]);
    return K;
}

Eigen::VectorXd KernelMachine::cross(const std::vector<int>& z, int target) const {
    Eigen::VectorXd k(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) k[i] = full_(z[i], target);
    return k;
}

namespace {

// Reduced coordinates for the penalized logistic fit: eigendecompose the
// representer Gram, keep the numerically nonzero part, and optimize over
// b with Q values = B b and ||Q||_H^2 = b.b.
struct ReducedBasis {
    std::vector<int> rep;      // grid indices
    Eigen::MatrixXd B;         // |rep| x r
    Eigen::MatrixXd to_alpha;  // |rep| x r, alpha = to_alpha * b
};

ReducedBasis build_basis(const KernelMachine& machine, const std::vector<int>& rep) {
    ReducedBasis rb;
    rb.rep = rep;
    Eigen::MatrixXd K = machine.gram(rep);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("representer Gram eigendecomposition failed");
    double lmax = eig.eigenvalues().maxCoeff();
    double cut = std::max(1e-12 * std::max(lmax, 0.0), 1e-14);
    std::vector<int> keep;
    for (int j = 0; j < eig.eigenvalues().size(); ++j)
        if (eig.eigenvalues()[j] > cut) keep.push_back(j);
    rb.B.resize(rep.size(), keep.size());
    rb.to_alpha.resize(rep.size(), keep.size());
    for (std::size_t c = 0; c < keep.size(); ++c) {
        double lam = eig.eigenvalues()[keep[c]];
        rb.B.col(c) = eig.eigenvectors().col(keep[c]) * std::sqrt(lam);
        rb.to_alpha.col(c) = eig.eigenvectors().col(keep[c]) / std::sqrt(lam);
    }
    return rb;
}

} // namespace

KernelEstimate kernel_fit_mle(const ChoiceDataset& ds, const KernelMachine& machine,
                              const MleConfig& cfg) {
    if (ds.n < 1) throw std::invalid_argument("kernel_fit_mle: empty dataset");
    if (ds.n > machine.spec().max_points)
        throw std::invalid_argument("kernel_fit_mle: n exceeds the kernel max_points cap (" +
                                    std::to_string(machine.spec().max_points) + ")");

    const FeatureMap& fm = machine.features();
    const int S = fm.S, A = fm.A, H = ds.H;
    const double lambda = machine.spec().lambda;

    KernelEstimate est;
    est.spec = machine.spec();
    est.steps.resize(H);
    est.Q_hat.resize(H);
    est.V_hat.resize(H);
    est.pi_hat.probs.resize(H);
    est.r_hat.resize(H);
    est.diagnostics.resize(H);

    for (int h = 0; h < H; ++h) {
        // Visit counts and the representer set: every action of each visited state.
        Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(S, A);
        Eigen::VectorXd state_total = Eigen::VectorXd::Zero(S);
        for (int i = 0; i < ds.n; ++i) {
            counts(ds.steps[h].s[i], ds.steps[h].a[i]) += 1.0;
            state_total[ds.steps[h].s[i]] += 1.0;
        }
        std::vector<int> visited;
        for (int s = 0; s < S; ++s)
            if (state_total[s] > 0.0) visited.push_back(s);
        std::vector<int> rep;
        for (int s : visited)
            for (int a = 0; a < A; ++a) rep.push_back(s * A + a);

        ReducedBasis rb = build_basis(machine, rep);
        const int r = static_cast<int>(rb.B.cols());
        const int m = static_cast<int>(rep.size());
        const double n = static_cast<double>(ds.n);
        const double pen = lambda / n;

        // rep is ordered (state-major, action-minor), so the row block of
        // visited state v is rows [v*A, v*A + A).
        auto objective = [&](const Eigen::VectorXd& b, Eigen::VectorXd* grad,
                             Eigen::MatrixXd* negH) -> double {
            Eigen::VectorXd v = rb.B * b; // Q values at rep points
            double val = 0.0;
            Eigen::VectorXd gv = Eigen::VectorXd::Zero(m);
            Eigen::MatrixXd Hv;
            if (negH) Hv = Eigen::MatrixXd::Zero(m, m);
            for (std::size_t vi = 0; vi < visited.size(); ++vi) {
                int s = visited[vi];
                int base = static_cast<int>(vi) * A;
                Eigen::VectorXd logits = v.segment(base, A);
                double mx = logits.maxCoeff();
                Eigen::ArrayXd e = (logits.array() - mx).exp();
                double lse = mx + std::log(e.sum());
                Eigen::VectorXd p = e / e.sum();
                for (int a = 0; a < A; ++a) {
                    val += counts(s, a) * logits[a];
                    gv[base + a] += counts(s, a) - state_total[s] * p[a];
                }
                val -= state_total[s] * lse;
                if (negH) {
                    Hv.block(base, base, A, A) +=
                        state_total[s] * (Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose());
                }
            }
            val = val / n - pen * b.squaredNorm();
            if (grad) *grad = rb.B.transpose() * gv / n - 2.0 * pen * b;
            if (negH) *negH = rb.B.transpose() * Hv * rb.B / n +
                              2.0 * pen * Eigen::MatrixXd::Identity(r, r);
            return val;
        };

        Eigen::VectorXd b = Eigen::VectorXd::Zero(r);
        Eigen::VectorXd g;
        Eigen::MatrixXd negH;
        double f = objective(b, nullptr, nullptr);
        int iter = 0;
        bool converged = false;
        for (; iter < cfg.max_iterations; ++iter) {
            objective(b, &g, &negH);
            if (g.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance) {
                converged = true;
                break;
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(
                negH + 1e-12 * Eigen::MatrixXd::Identity(r, r));
            Eigen::VectorXd dir = ldlt.solve(g);
            double t = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls) {
                Eigen::VectorXd trial = b + t * dir;
                double ft = objective(trial, nullptr, nullptr);
                if (ft > f + 1e-4 * t * g.dot(dir)) {
                    b = std::move(trial);
                    f = ft;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if (!moved) break;
        }
        if (!converged) {
            objective(b, &g, nullptr);
            if (g.lpNorm<Eigen::Infinity>() > cfg.gradient_tolerance)
                throw MleConvergenceError(h, iter, g.lpNorm<Eigen::Infinity>(),
                                          rb.to_alpha * b);
        }

        KernelStep& ks = est.steps[h];
        ks.rep = rep;
        ks.alpha_q = rb.to_alpha * b;
        ks.z.resize(ds.n);
        for (int i = 0; i < ds.n; ++i) ks.z[i] = ds.steps[h].s[i] * A + ds.steps[h].a[i];
        ks.K = machine.gram(ks.z);

        est.diagnostics[h] = MleStepDiagnostics{iter, g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0,
                                                false, f};

        // Tabular views on the full grid.
        Eigen::MatrixXd q(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                q(s, a) = machine.cross(rep, s * A + a).dot(ks.alpha_q);
        est.pi_hat.probs[h] = softmax_rows(q);
        est.V_hat[h] = (est.pi_hat.probs[h].array() * q.array()).rowwise().sum();
        est.Q_hat[h] = std::move(q);
    }
    return est;
}

void kernel_recover_reward(const ChoiceDataset& ds, KernelEstimate& est,
                           const KernelMachine& machine, double gamma) {
    const FeatureMap& fm = machine.features();
    const double lambda = machine.spec().lambda;
    for (int h = 0; h < ds.H; ++h) {
        KernelStep& ks = est.steps[h];
        if (static_cast<int>(ks.z.size()) != ds.n)
            throw std::invalid_argument("kernel_recover_reward: estimate not fitted on this dataset");
        ks.y.resize(ds.n);
        for (int i = 0; i < ds.n; ++i) {
            int sn = ds.steps[h].s_next[i];
            double v_next = (h + 1 < ds.H) ? est.V_hat[h + 1][sn] : 0.0;
            ks.y[i] = est.Q_hat[h](ds.steps[h].s[i], ds.steps[h].a[i]) - gamma * v_next;
        }
        auto ldlt = factor_gram(ks.K, lambda);
        ks.alpha_r = ldlt.solve(ks.y);

        est.r_hat[h].resize(fm.S, fm.A);
        for (int s = 0; s < fm.S; ++s)
            for (int a = 0; a < fm.A; ++a)
                est.r_hat[h](s, a) = machine.cross(ks.z, s * fm.A + a).dot(ks.alpha_r);
    }
}

double kernel_penalty(double k_zz, const Eigen::VectorXd& k_z, const Eigen::MatrixXd& K_h,
                      double lambda, double beta) {
    if (lambda <= 0.0) throw std::invalid_argument("kernel_penalty: lambda must be > 0");
    double rad = k_zz;
    if (k_z.size() > 0) {
        auto ldlt = factor_gram(K_h, lambda);
        rad -= k_z.dot(ldlt.solve(k_z));
    }
    if (rad < -1e-8)
        throw std::runtime_error("kernel_penalty: radicand " + std::to_string(rad) +
                                 " is below the roundoff floor");
    rad = std::max(0.0, rad);
    return beta * std::sqrt(rad / lambda);
}

InformationGain information_gain_proxy(const Eigen::MatrixXd& K_D, double lambda) {
    InformationGain ig;
    const int n = static_cast<int>(K_D.rows());
    if (n == 0) return ig;

    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + K_D / lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("information_gain_proxy: factorization failed");
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    ig.realized = 0.5 * logdet;

    // Greedy posterior-variance selection over the realized points via
    // pivoted partial Cholesky with noise lambda on the pivots.
    Eigen::VectorXd diag = K_D.diagonal();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    std::vector<bool> used(n, false);
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        int j = -1;
        double best = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!used[i] && diag[i] > best) {
                best = diag[i];
                j = i;
            }
        }
        if (j < 0 || best <= 1e-15) break; // remaining variance is numerically zero
        used[j] = true;
        total += 0.5 * std::log1p(best / lambda);
        Eigen::VectorXd col = K_D.col(j);
        if (k > 0) col -= L.leftCols(k) * L.row(j).head(k).transpose();
        col /= std::sqrt(best + lambda);
        L.col(k) = col;
        diag -= col.cwiseProduct(col);
        diag = diag.cwiseMax(0.0);
    }
    ig.greedy_total = total;
    ig.greedy_upper = total / (1.0 - std::exp(-1.0));
    return ig;
}

PessimisticPolicy kernel_plan(const ChoiceDataset& ds, KernelEstimate& est,
                              const KernelMachine& machine, double beta) {
    if (beta < 0.0) throw std::invalid_argument("kernel_plan: beta must be >= 0");
    const FeatureMap& fm = machine.features();
    const int S = fm.S, A = fm.A, H = ds.H;
    const double lambda = machine.spec().lambda;
    if (static_cast<int>(est.r_hat.size()) != H || est.r_hat[0].size() == 0)
        throw std::invalid_argument("kernel_plan: reward part of the estimate is missing");

    PessimisticPolicy pp;
    pp.beta = beta;
    pp.lambda_reg = lambda;
    pp.Q_tilde.resize(H);
    pp.V_tilde.resize(H);
    pp.Gamma.resize(H);
    pp.u_tilde.resize(H); // left empty in dual mode
    pp.actions.resize(H);

    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        KernelStep& ks = est.steps[h];
        auto ldlt = factor_gram(ks.K, lambda);
        Eigen::VectorXd ytilde(ds.n);
        for (int i = 0; i < ds.n; ++i) ytilde[i] = v_next[ds.steps[h].s_next[i]];
        ks.alpha_pv = ldlt.solve(ytilde);

        const double cap = static_cast<double>(H - h);
        pp.Q_tilde[h].resize(S, A);
        pp.Gamma[h].resize(S, A);
        pp.V_tilde[h].resize(S);
        pp.actions[h].resize(S);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                int z = s * A + a;
                Eigen::VectorXd kz = machine.cross(ks.z, z);
                double pv = kz.dot(ks.alpha_pv);
                double rad = machine.at(z, z) - kz.dot(ldlt.solve(kz));
                if (rad < -1e-8)
                    throw std::runtime_error("kernel_plan: negative penalty radicand at step " +
                                             std::to_string(h));
                double gamma_pen = beta * std::sqrt(std::max(0.0, rad) / lambda);
                double q = est.r_hat[h](s, a) + pv - gamma_pen;
                pp.Gamma[h](s, a) = gamma_pen;
                pp.Q_tilde[h](s, a) = std::min(std::max(q, 0.0), cap);
            }
            int best = 0;
            double best_q = pp.Q_tilde[h](s, 0);
            for (int a = 1; a < A; ++a) {
                if (pp.Q_tilde[h](s, a) > best_q) {
                    best_q = pp.Q_tilde[h](s, a);
                    best = a;
                }
            }
            pp.actions[h][s] = best;
            pp.V_tilde[h][s] = best_q;
        }
        v_next = pp.V_tilde[h];
    }
    pp.pi_tilde = PolicyTable::deterministic(pp.actions, A);
    return pp;
}

} // namespace dcppo
