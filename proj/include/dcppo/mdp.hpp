#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dcppo {

enum class FeatureMode { one_hot_tabular, random_linear };

std::string to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& name);

/// Known feature map over the (s,a) grid, shared across steps. This is the
/// part of the environment the learner is allowed to see.
struct FeatureMap {
    int S = 0;
    int A = 0;
    int d = 0;
    int a_anchor = 0;
    Eigen::MatrixXd phi; // (S*A) x d, row index s*A + a

    Eigen::MatrixXd::ConstRowXpr row(int s, int a) const { return phi.row(s * A + a); }
};

/// Finite-horizon MDP with explicit per-(s,a) features, dense transition
/// tensor and linear rewards r_h(s,a) = phi(s,a) . w_h. One state (s_abs) is
/// absorbing with zero reward and one action (a_anchor) opts out into it, so
/// that Q(s, a_anchor) = 0 identically for any discount.
struct TabularLinearMdp {
    int S = 0; // includes the absorbing state s_abs
    int A = 0; // includes the anchor action a_anchor
    int H = 0; // steps indexed 0..H-1
    int d = 0;
    int s_init = 0;
    int s_abs = 0;
    int a_anchor = 0;
    FeatureMode feature_mode = FeatureMode::one_hot_tabular;
    std::uint64_t seed = 0;

    Eigen::MatrixXd phi;            // (S*A) x d, shared across steps
    std::vector<Eigen::MatrixXd> P; // per h: (S*A) x S, row-stochastic
    std::vector<Eigen::VectorXd> w; // per h: reward weights in R^d

    double reward(int h, int s, int a) const { return phi.row(s * A + a).dot(w[h]); }

    /// Dense S x A reward table at step h.
    Eigen::MatrixXd reward_table(int h) const;

    FeatureMap features() const { return FeatureMap{S, A, d, a_anchor, phi}; }

    /// Checks every structural invariant (stochastic rows, feature norms,
    /// anchor construction, reward range, weight norms). Throws
    /// std::invalid_argument naming the first violation.
    void validate() const;
};

/// Stochastic policy, one S x A row-stochastic matrix per step.
struct PolicyTable {
    std::vector<Eigen::MatrixXd> probs;

    int horizon() const { return static_cast<int>(probs.size()); }
    void validate(int S, int A) const;

    /// Deterministic policy from per-step action indices.
    static PolicyTable deterministic(const std::vector<Eigen::VectorXi>& actions, int A);
};

/// Q/V tables produced by policy evaluation or planning.
struct ValueTables {
    std::vector<Eigen::MatrixXd> Q; // per h: S x A
    std::vector<Eigen::VectorXd> V; // per h: S
};

/// Backward-recursion policy evaluation: Q_h = r_h + gamma * P_h V_{h+1},
/// V_h = <pi_h, Q_h>, V_H = 0. gamma = 1 gives the undiscounted objective.
ValueTables evaluate_policy(const TabularLinearMdp& mdp, const PolicyTable& pi, double gamma);

/// Deterministic greedy backward induction at gamma = 1. Ties break to the
/// lowest action index.
std::pair<PolicyTable, ValueTables> optimal_policy(const TabularLinearMdp& mdp);

/// V*_0(s_init) - V^pi_0(s_init) at gamma = 1.
double suboptimality(const TabularLinearMdp& mdp, const PolicyTable& pi);

/// Seed-deterministic random instance. one_hot_tabular forces
/// d = (S-1)*(A-1); transitions for the anchor action and from the absorbing
/// state are point masses on s_abs. deterministic_transitions makes every
/// non-anchor transition a point mass as well (used by oracle fixtures).
TabularLinearMdp random_instance(std::uint64_t seed, int S, int A, int H, int d,
                                 FeatureMode feature_mode,
                                 bool deterministic_transitions = false);

/// Residual of the best linear representation of P_h V against the feature
/// map: max over h, (s,a) of |P_h V (s,a) - phi(s,a).u_h| for `trials` random
/// V with V(s_abs) = 0. Zero (to rounding) exactly when the instance
/// satisfies the linear-transition condition on that subspace; one-hot
/// instances always do.
double linear_transition_residual(const TabularLinearMdp& mdp, int trials, std::uint64_t seed);

} // namespace dcppo
