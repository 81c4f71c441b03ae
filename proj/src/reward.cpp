#include "dcppo/reward.hpp"

#include <cmath>
#include <limits>

namespace dcppo {

namespace {

// PD solve with a single jitter retry; Lambda + lambda I is positive definite
// by construction, the retry only covers accumulated roundoff.
Eigen::LDLT<Eigen::MatrixXd> factor_regularized(const Eigen::MatrixXd& Lambda, double lambda_reg) {
    Eigen::MatrixXd M = Lambda + lambda_reg * Eigen::MatrixXd::Identity(Lambda.rows(), Lambda.cols());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
        ldlt.compute(M + 1e-12 * Eigen::MatrixXd::Identity(M.rows(), M.cols()));
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("regularized Gram factorization failed");
    }
    return ldlt;
}

} // namespace

Eigen::MatrixXd RecoveredReward::reward_table(int h, const FeatureMap& features) const {
    Eigen::MatrixXd r(features.S, features.A);
    for (int s = 0; s < features.S; ++s)
        for (int a = 0; a < features.A; ++a) r(s, a) = features.row(s, a).dot(w_hat[h]);
    return r;
}

RecoveredReward recover_reward(const ChoiceDataset& ds, const EstimatedModel& est,
                               const FeatureMap& features, double gamma, double lambda_reg) {
    if (lambda_reg <= 0.0) throw std::invalid_argument("recover_reward: lambda_reg must be > 0");
    if (static_cast<int>(est.Q_hat.size()) != ds.H)
        throw std::invalid_argument("recover_reward: estimate horizon mismatch");

    RecoveredReward rec;
    rec.lambda_reg = lambda_reg;
    rec.w_hat.resize(ds.H);
    rec.Lambda.resize(ds.H);

    for (int h = 0; h < ds.H; ++h) {
        Eigen::MatrixXd Lambda = Eigen::MatrixXd::Zero(features.d, features.d);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(features.d);
        for (int i = 0; i < ds.n; ++i) {
            int s = ds.steps[h].s[i];
            int a = ds.steps[h].a[i];
            int sn = ds.steps[h].s_next[i];
            const auto phi = features.row(s, a);
            double v_next = (h + 1 < ds.H) ? est.V_hat[h + 1][sn] : 0.0;
            double target = est.Q_hat[h](s, a) - gamma * v_next;
            if (!std::isfinite(target))
                throw std::runtime_error("recover_reward: non-finite target at step " +
                                         std::to_string(h) + ", sample " + std::to_string(i));
            Lambda += phi.transpose() * phi;
            rhs += phi.transpose() * target;
        }
        auto ldlt = factor_regularized(Lambda, lambda_reg);
        rec.w_hat[h] = ldlt.solve(rhs);
        rec.Lambda[h] = std::move(Lambda);
    }
    return rec;
}

double elliptical_potential(const Eigen::VectorXd& phi_vec, const Eigen::MatrixXd& Lambda,
                            double lambda_reg) {
    if (lambda_reg <= 0.0) throw std::invalid_argument("elliptical_potential: lambda_reg must be > 0");
    if (phi_vec.lpNorm<Eigen::Infinity>() == 0.0) return 0.0;
    auto ldlt = factor_regularized(Lambda, lambda_reg);
    double q = phi_vec.dot(ldlt.solve(phi_vec));
    return std::sqrt(std::max(0.0, q));
}

RewardCertificate reward_error_certificate(const RecoveredReward& rec,
                                           const TabularLinearMdp& mdp) {
    if (static_cast<int>(rec.w_hat.size()) != mdp.H)
        throw std::invalid_argument("reward_error_certificate: horizon mismatch");
    const double inf = std::numeric_limits<double>::infinity();
    FeatureMap fm = mdp.features();

    RewardCertificate cert;
    cert.abs_err.resize(mdp.H);
    cert.ratio.resize(mdp.H);
    for (int h = 0; h < mdp.H; ++h) {
        auto ldlt = factor_regularized(rec.Lambda[h], rec.lambda_reg);
        cert.abs_err[h].resize(mdp.S, mdp.A);
        cert.ratio[h].resize(mdp.S, mdp.A);
        for (int s = 0; s < mdp.S; ++s) {
            for (int a = 0; a < mdp.A; ++a) {
                Eigen::VectorXd phi = fm.row(s, a).transpose();
                double err = std::abs(mdp.reward(h, s, a) - phi.dot(rec.w_hat[h]));
                double ellip = 0.0;
                if (phi.lpNorm<Eigen::Infinity>() != 0.0)
                    ellip = std::sqrt(std::max(0.0, phi.dot(ldlt.solve(phi))));
                cert.abs_err[h](s, a) = err;
                if (ellip > 0.0) {
                    cert.ratio[h](s, a) = err / ellip;
                    cert.max_ratio = std::max(cert.max_ratio, err / ellip);
                } else {
                    cert.ratio[h](s, a) = (err > 0.0) ? inf : 0.0;
                }
                cert.max_abs_err = std::max(cert.max_abs_err, err);
            }
        }
    }
    return cert;
}

} // namespace dcppo
