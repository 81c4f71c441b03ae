#pragma once

#include "dcppo/choice_agent.hpp"
#include "dcppo/mdp.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace dcppo {

enum class MleSolver { newton, gradient_descent_backtracking };

std::string to_string(MleSolver s);
MleSolver mle_solver_from_string(const std::string& name);

struct MleConfig {
    int max_iterations = 200;
    double gradient_tolerance = 1e-9;
    /// Projection radius for the parameter ball; <= 0 means "use H*sqrt(d)".
    double parameter_bound = 0.0;
    MleSolver solver = MleSolver::newton;
    /// Optional ridge term: the per-step objective becomes
    /// (1/n) sum_i [phi.theta - lse] - (ridge_lambda/n) ||theta||^2.
    /// Zero recovers plain maximum likelihood. The kernel logistic fit is the
    /// dual of this penalized form.
    double ridge_lambda = 0.0;

    double bound_for(int H, int d) const {
        return parameter_bound > 0.0 ? parameter_bound
                                     : H * std::sqrt(static_cast<double>(d));
    }
};

struct MleStepDiagnostics {
    int iterations = 0;
    double gradient_norm = 0.0; // sup norm at the final iterate
    bool on_boundary = false;   // projection active (possible degenerate step)
    double objective = 0.0;     // penalized objective actually maximized
};

struct EstimatedModel {
    std::vector<Eigen::VectorXd> theta;  // per h
    std::vector<Eigen::MatrixXd> Q_hat;  // per h: S x A, phi.theta on the grid
    std::vector<Eigen::VectorXd> V_hat;  // per h: S
    PolicyTable pi_hat;
    std::vector<double> log_likelihood;  // per h, unpenalized value at theta
    std::vector<MleStepDiagnostics> diagnostics;
};

/// Thrown when a per-step fit does not reach the gradient tolerance. Carries
/// the last iterate for post-mortem.
class MleConvergenceError : public std::runtime_error {
public:
    MleConvergenceError(int step, int iterations, double grad_norm, Eigen::VectorXd last);
    int step;
    int iterations;
    double gradient_norm;
    Eigen::VectorXd last_iterate;
};

/// Per-step multinomial-logit maximum likelihood over the parameter ball,
/// then pi_hat = softmax(Q_hat) rowwise and V_hat = <Q_hat, pi_hat>.
EstimatedModel fit_mle(const ChoiceDataset& ds, const FeatureMap& features, const MleConfig& cfg);

/// Unpenalized log-likelihood of theta at step h (the empirical mean form).
double mle_log_likelihood(const ChoiceDataset& ds, const FeatureMap& features, int h,
                          const Eigen::VectorXd& theta);

struct MleErrorReport {
    std::vector<double> pi_err; // per h: E_{D_h}[ ||pi_hat - pi_b||_1^2 ]
    std::vector<double> q_err;  // per h: E_{D_h}[ ||Q_hat - Q||_1^2 ]
    double pi_err_mean = 0.0;   // averaged over steps
    double q_err_mean = 0.0;
};

/// Empirical estimation errors of Theorem-1 form, averaged over the realized
/// dataset states at each step.
MleErrorReport mle_error_report(const EstimatedModel& est, const BehaviorModel& truth,
                                const ChoiceDataset& ds);

} // namespace dcppo
