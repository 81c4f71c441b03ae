#pragma once

#include "dcppo/planner.hpp"

namespace dcppo {

enum class KernelKind { rbf, polynomial, linear_via_features };

std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& name);

struct KernelSpec {
    KernelKind kind = KernelKind::linear_via_features;
    double bandwidth = 1.0; // rbf
    int degree = 2;         // polynomial
    double offset = 1.0;    // polynomial
    double lambda = 1.0;    // regularization, > 0
    double rkhs_norm_bound = 1.0; // R_r, reported in diagnostics only
    int max_points = 2000;  // dual solves are O(n^3); refuse beyond this
};

/// Kernel over state-action pairs embedded through the feature map. The
/// anchor embeds at the zero feature vector; rbf/polynomial kernels are
/// centered there so every function in the induced space vanishes at the
/// anchor, and the diagonal is normalized to max 1 over the grid. The full
/// grid Gram is precomputed once (the grid is tabular and small).
class KernelMachine {
public:
    KernelMachine(KernelSpec spec, FeatureMap features);

    const KernelSpec& spec() const { return spec_; }
    const FeatureMap& features() const { return features_; }
    int grid_size() const { return static_cast<int>(full_.rows()); }

    double at(int z1, int z2) const { return full_(z1, z2); }
    /// Gram over a list of grid indices.
    Eigen::MatrixXd gram(const std::vector<int>& z) const;
    /// k(z) against a list of grid indices.
    Eigen::VectorXd cross(const std::vector<int>& z, int target) const;

private:
    KernelSpec spec_;
    FeatureMap features_;
    Eigen::MatrixXd full_; // (S*A) x (S*A) centered, normalized
};

struct KernelStep {
    std::vector<int> z;      // sample grid indices, length n
    Eigen::MatrixXd K;       // n x n Gram over samples
    Eigen::VectorXd y;       // Bellman-residual responses (reward regression)
    Eigen::VectorXd alpha_r; // (K + lambda I)^{-1} y
    std::vector<int> rep;    // representer points of the logistic fit
    Eigen::VectorXd alpha_q; // dual coefficients of Q over rep
    Eigen::VectorXd alpha_pv; // dual coefficients of the planner's PV fit
};

struct KernelEstimate {
    KernelSpec spec;
    std::vector<KernelStep> steps;  // per h
    std::vector<Eigen::MatrixXd> Q_hat; // per h: S x A evaluated on the grid
    std::vector<Eigen::VectorXd> V_hat;
    PolicyTable pi_hat;
    std::vector<Eigen::MatrixXd> r_hat; // per h: S x A (after reward recovery)
    std::vector<MleStepDiagnostics> diagnostics;
};

/// Kernel logistic regression for Q, penalized by lambda ||Q||_H^2 so the
/// representer expansion is finite. Representer points are every action of
/// each visited state. Fills the Q part of the estimate.
KernelEstimate kernel_fit_mle(const ChoiceDataset& ds, const KernelMachine& machine,
                              const MleConfig& cfg);

/// Kernel ridge regression r(z) = k_h(z)^T (K_h + lambda I)^{-1} y_h with
/// y_i = Qhat(z_i) - gamma Vhat_{h+1}(s_next_i). Fills the r part.
void kernel_recover_reward(const ChoiceDataset& ds, KernelEstimate& est,
                           const KernelMachine& machine, double gamma);

/// beta lambda^{-1/2} (K(z,z) - k^T (K + lambda I)^{-1} k)^{1/2}. A radicand
/// below -1e-8 is a numerical error; small negatives are clamped to zero.
double kernel_penalty(double k_zz, const Eigen::VectorXd& k_z, const Eigen::MatrixXd& K_h,
                      double lambda, double beta);

struct InformationGain {
    double realized = 0.0;     // (1/2) logdet(I + K_D / lambda) of the dataset
    double greedy_total = 0.0; // greedy subset-selection value over the rows
    double greedy_upper = 0.0; // greedy_total / (1 - 1/e), submodular ceiling
};

/// Proxies for the maximal information gain; the exact sup over subsets is
/// not computed.
InformationGain information_gain_proxy(const Eigen::MatrixXd& K_D, double lambda);

/// Pessimistic value iteration with all regressions in dual form. Writes the
/// per-step PV dual coefficients back into the estimate. u_tilde of the
/// result is left empty (there is no primal weight vector in kernel mode).
PessimisticPolicy kernel_plan(const ChoiceDataset& ds, KernelEstimate& est,
                              const KernelMachine& machine, double beta);

} // namespace dcppo
