#include "dcppo/planner.hpp"

#include <cmath>

namespace dcppo {

PessimisticPolicy plan(const ChoiceDataset& ds, const RecoveredReward& rec,
                       const FeatureMap& features, const PlannerConfig& cfg) {
    if (cfg.beta < 0.0) throw std::invalid_argument("plan: beta must be >= 0");
    if (cfg.lambda_reg <= 0.0) throw std::invalid_argument("plan: lambda_reg must be > 0");
    if (static_cast<int>(rec.w_hat.size()) != ds.H)
        throw std::invalid_argument("plan: reward/dataset horizon mismatch");
    if (rec.w_hat[0].size() != features.d)
        throw std::invalid_argument("plan: feature dimension mismatch");

    const int H = ds.H, S = features.S, A = features.A, d = features.d;
    PessimisticPolicy pp;
    pp.beta = cfg.beta;
    pp.lambda_reg = cfg.lambda_reg;
    pp.Q_tilde.resize(H);
    pp.V_tilde.resize(H);
    pp.Gamma.resize(H);
    pp.u_tilde.resize(H);
    pp.actions.resize(H);

    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S); // V_H = 0
    for (int h = H - 1; h >= 0; --h) {
        Eigen::MatrixXd M =
            rec.Lambda[h] + cfg.lambda_reg * Eigen::MatrixXd::Identity(d, d);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success) {
            ldlt.compute(M + 1e-12 * Eigen::MatrixXd::Identity(d, d));
            if (ldlt.info() != Eigen::Success)
                throw std::runtime_error("plan: Gram factorization failed at step " +
                                         std::to_string(h));
        }

        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < ds.n; ++i)
            rhs += features.row(ds.steps[h].s[i], ds.steps[h].a[i]).transpose() *
                   v_next[ds.steps[h].s_next[i]];
        pp.u_tilde[h] = ldlt.solve(rhs);

        const double cap = static_cast<double>(H - h);
        pp.Q_tilde[h].resize(S, A);
        pp.Gamma[h].resize(S, A);
        pp.V_tilde[h].resize(S);
        pp.actions[h].resize(S);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                Eigen::VectorXd phi = features.row(s, a).transpose();
                double gamma_pen = 0.0;
                if (phi.lpNorm<Eigen::Infinity>() != 0.0)
                    gamma_pen = cfg.beta * std::sqrt(std::max(0.0, phi.dot(ldlt.solve(phi))));
                double q = phi.dot(rec.w_hat[h]) + phi.dot(pp.u_tilde[h]) - gamma_pen;
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

ViolationStats uncertainty_violation_audit(const PessimisticPolicy& pp,
                                           const RecoveredReward& rec,
                                           const TabularLinearMdp& mdp, double gamma_eval) {
    const int H = mdp.H, S = mdp.S, A = mdp.A;
    FeatureMap fm = mdp.features();
    ViolationStats vs;
    vs.violations_per_step.assign(H, 0);
    for (int h = 0; h < H; ++h) {
        Eigen::VectorXd v_next =
            (h + 1 < H) ? pp.V_tilde[h + 1] : Eigen::VectorXd::Zero(S);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                Eigen::VectorXd phi = fm.row(s, a).transpose();
                double est_side = phi.dot(rec.w_hat[h]) + gamma_eval * phi.dot(pp.u_tilde[h]);
                double true_side = mdp.reward(h, s, a) +
                                   gamma_eval * mdp.P[h].row(s * A + a).dot(v_next);
                double err = std::abs(est_side - true_side);
                double gamma_pen = pp.Gamma[h](s, a);
                ++vs.total_cells;
                if (err > gamma_pen) ++vs.violations_per_step[h];
                if (gamma_pen > 0.0) vs.max_ratio = std::max(vs.max_ratio, err / gamma_pen);
            }
        }
        vs.total_violations += vs.violations_per_step[h];
    }
    vs.violation_fraction =
        vs.total_cells > 0 ? static_cast<double>(vs.total_violations) / vs.total_cells : 0.0;
    vs.any_violation = vs.total_violations > 0;
    return vs;
}

double theorem_suboptimality_bound(const PessimisticPolicy& pp, const TabularLinearMdp& mdp,
                                   const PolicyTable& pi_star) {
    std::vector<Eigen::VectorXd> occ = state_occupancy(mdp, pi_star);
    double total = 0.0;
    for (int h = 0; h < mdp.H; ++h) {
        for (int s = 0; s < mdp.S; ++s) {
            if (occ[h][s] == 0.0) continue;
            for (int a = 0; a < mdp.A; ++a)
                total += occ[h][s] * pi_star.probs[h](s, a) * pp.Gamma[h](s, a);
        }
    }
    return 2.0 * total;
}

} // namespace dcppo
