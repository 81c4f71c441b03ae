#pragma once

#include "dcppo/estimation.hpp"

namespace dcppo {

/// Ridge recovery of the latent reward from the Bellman residual of the
/// estimated value functions.
struct RecoveredReward {
    std::vector<Eigen::VectorXd> w_hat;  // per h
    std::vector<Eigen::MatrixXd> Lambda; // per h: d x d Gram of visited features
    double lambda_reg = 1.0;

    /// r_hat table on the full grid at step h.
    Eigen::MatrixXd reward_table(int h, const FeatureMap& features) const;
};

/// w_hat_h = (Lambda_h + lambda I)^{-1} sum_i phi_i (Qhat_h,i - gamma Vhat_{h+1,i}),
/// with Vhat_H = 0. Solved by LDLT, never by explicit inversion.
RecoveredReward recover_reward(const ChoiceDataset& ds, const EstimatedModel& est,
                               const FeatureMap& features, double gamma, double lambda_reg);

/// sqrt(phi^T (Lambda + lambda I)^{-1} phi), the data-dependent width at phi.
double elliptical_potential(const Eigen::VectorXd& phi_vec, const Eigen::MatrixXd& Lambda,
                            double lambda_reg);

struct RewardCertificate {
    std::vector<Eigen::MatrixXd> abs_err; // per h: S x A, |r - r_hat|
    std::vector<Eigen::MatrixXd> ratio;   // per h: |r - r_hat| / ellip; +inf marker if ellip = 0
    double max_abs_err = 0.0;
    double max_ratio = 0.0; // over finite entries
};

/// Tables of |r - r_hat| and the self-normalized ratio against the elliptical
/// potential. Entries with a zero feature vector and nonzero error are marked
/// +inf (cannot occur for the anchor action).
RewardCertificate reward_error_certificate(const RecoveredReward& rec,
                                           const TabularLinearMdp& mdp);

} // namespace dcppo
