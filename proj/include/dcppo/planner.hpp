#pragma once

#include "dcppo/reward.hpp"

namespace dcppo {

struct PlannerConfig {
    double beta = 0.0;       // penalty scale, >= 0
    double lambda_reg = 1.0; // > 0, shared with the reward recovery Gram
};

/// Output of pessimistic value iteration: greedy policy with its truncated
/// pessimistic values and the penalty surface that produced them.
struct PessimisticPolicy {
    PolicyTable pi_tilde;                 // deterministic rows
    std::vector<Eigen::VectorXi> actions; // argmax per (h, s)
    std::vector<Eigen::MatrixXd> Q_tilde; // per h: S x A, clamped to [0, H-h]
    std::vector<Eigen::VectorXd> V_tilde; // per h: S
    std::vector<Eigen::MatrixXd> Gamma;   // per h: S x A penalties
    std::vector<Eigen::VectorXd> u_tilde; // per h: transition-regression weights
    double beta = 0.0;
    double lambda_reg = 1.0;
};

/// Pessimistic value iteration. Backward from V_H = 0:
///   u_h    = (Lambda_h + lambda I)^{-1} sum_i phi_i V_{h+1}(s_next_i)
///   Gamma  = beta ||phi||_{(Lambda_h + lambda I)^{-1}}
///   Q_h    = clamp(r_hat + phi.u_h - Gamma, 0, H - h)
/// Greedy extraction with lowest-index tie-break.
PessimisticPolicy plan(const ChoiceDataset& ds, const RecoveredReward& rec,
                       const FeatureMap& features, const PlannerConfig& cfg);

struct ViolationStats {
    std::vector<int> violations_per_step; // cells where |error| > Gamma
    int total_violations = 0;
    int total_cells = 0;
    double max_ratio = 0.0; // max |error| / Gamma over cells with Gamma > 0
    double violation_fraction = 0.0;
    bool any_violation = false;
};

/// Checks the pointwise uncertainty-quantifier condition
/// |(r_hat + Ptilde V)(s,a) - (r + P V)(s,a)| <= Gamma(s,a) against the true
/// model, for the value function the planner actually produced.
ViolationStats uncertainty_violation_audit(const PessimisticPolicy& pp,
                                           const RecoveredReward& rec,
                                           const TabularLinearMdp& mdp,
                                           double gamma_eval = 1.0);

/// 2 sum_h E_{pi*}[Gamma_h], the certified suboptimality ceiling on runs
/// where the audit reports no violations. Occupancies of pi* are propagated
/// exactly through the true kernel.
double theorem_suboptimality_bound(const PessimisticPolicy& pp, const TabularLinearMdp& mdp,
                                   const PolicyTable& pi_star);

} // namespace dcppo
