#pragma once

#include "dcppo/kernel.hpp"

#include <optional>

namespace dcppo {

struct CoverageReport {
    std::vector<double> c_per_step;         // generalized-eigenvalue coverage ratio
    std::vector<double> min_eig_per_step;   // lambda_min of Sigma_b,h
    double c_dagger_estimate = 0.0;         // min over steps
    double min_eig_Sigma_b = 0.0;           // min over steps
    std::vector<Eigen::MatrixXd> Sigma_b;   // E_{pi_b}[phi phi^T] per step
    std::vector<Eigen::MatrixXd> Sigma_star;
};

/// Population analogue of the single-policy-coverage constant: the largest c
/// with Sigma_b,h >= c Sigma*_h on the support of Sigma*_h, computed from
/// exact occupancy propagation. (The sample size cancels from the ratio; it
/// is accepted for interface symmetry with the sample quantities.)
CoverageReport coverage_check(const TabularLinearMdp& mdp, const BehaviorModel& behavior,
                              const PolicyTable& pi_star, int n);

struct EffectiveDimensions {
    double d_eff_sample = 0.0; // sum_h Tr((Lambda_h + lambda I)^{-1} Sigma_b,h)^{1/2}
    double d_eff_pop = 0.0;    // sum_h Tr((n Sigma_b,h + lambda I)^{-1} Sigma*_h)^{1/2}
};

EffectiveDimensions effective_dimensions(const std::vector<Eigen::MatrixXd>& Lambda,
                                         const std::vector<Eigen::MatrixXd>& Sigma_b,
                                         const std::vector<Eigen::MatrixXd>& Sigma_star,
                                         double lambda_reg, int n);

/// Penalty scale of the planning theorem with an unspecified absolute
/// constant c and a cap on the exponential horizon factor:
/// beta(n) = c * H * exp(min(H, h_cap)) * A * d * sqrt(log(n H / delta)).
struct BetaSchedule {
    double c = 1.0;
    double delta = 0.05;
    int h_cap = 6;

    double value(int n, int H, int A, int d) const;
};

struct InstanceSpec {
    std::uint64_t seed = 0;
    int S = 5;
    int A = 3;
    int H = 3;
    int d = 8;
    FeatureMode feature_mode = FeatureMode::one_hot_tabular;
    bool deterministic_transitions = false;

    TabularLinearMdp build() const {
        return random_instance(seed, S, A, H, d, feature_mode, deterministic_transitions);
    }
};

struct SweepSpec {
    InstanceSpec instance;
    double gamma = 0.9;
    SampleMechanism mechanism = SampleMechanism::gumbel_argmax;
    std::vector<int> n_grid{250, 500, 1000, 2000, 4000, 8000, 16000};
    int seeds_per_n = 20;
    std::uint64_t data_seed_base = 1;
    double lambda_reg = 1.0;
    BetaSchedule beta;     // resolved schedule (c already calibrated)
    /// Oracle mode replaces estimation by the true reward and the exact
    /// transition operator; requires one_hot_tabular.
    bool oracle_mode = false;
    MleConfig mle;
    int jobs = 0; // 0 = hardware concurrency
};

struct CellResult {
    int n = 0;
    int rep = 0;
    std::uint64_t data_seed = 0;
    double subopt = 0.0;
    double mle_pi_err = 0.0;
    double mle_q_err = 0.0;
    double cert_max_ratio = 0.0;
    double violation_fraction = 0.0;
    bool any_violation = false;
    double theorem_bound = 0.0;
    bool dominance_ok = true; // subopt <= bound + 1e-8 whenever no violations
    double beta = 0.0;
    bool failed = false;
    std::string failure;
};

struct SlopeFit {
    bool defined = false;
    double slope = 0.0;
    double intercept = 0.0;
    double std_error = 0.0;
    int points_used = 0;
    std::vector<int> excluded_n; // grid points with no usable mean
};

/// OLS fit of log(mean metric) against log(n). Grid points whose mean is not
/// strictly positive (or has no successful runs) are excluded and recorded.
SlopeFit fit_loglog_slope(const std::vector<int>& n_grid, const std::vector<double>& means);

struct SweepResult {
    SweepSpec spec;
    std::vector<CellResult> cells; // row-major: n index major, rep minor
    int failed_runs = 0;
    std::vector<double> mean_subopt;     // per n over successful runs
    std::vector<double> mean_pi_err;
    std::vector<double> mean_cert_ratio;
    SlopeFit subopt_slope;
    SlopeFit pi_err_slope;
    SlopeFit cert_ratio_slope;
};

/// Full pipeline per (n, seed) cell: sample -> fit -> recover -> plan ->
/// measure. Cells run on a deterministic work queue; per-cell failures are
/// recorded, not fatal.
SweepResult run_rate_sweep(const SweepSpec& spec);

struct CalibrationSpec {
    InstanceSpec instance;
    double gamma = 0.9;
    SampleMechanism mechanism = SampleMechanism::gumbel_argmax;
    int n = 1000;
    int seeds = 100;
    std::uint64_t seed_base = 777;
    double lambda_reg = 1.0;
    double delta = 0.05;
    int h_cap = 6;
    std::vector<double> c_grid;
    bool oracle_mode = false;
    MleConfig mle;
    int jobs = 0;
};

struct CalibrationResult {
    double chosen_c = 0.0;
    bool qualified = false;
    std::vector<double> c_grid;
    std::vector<double> violation_frequency; // per c: fraction of seeds with any violation
};

class CalibrationFailure : public std::runtime_error {
public:
    explicit CalibrationFailure(CalibrationResult curve_);
    CalibrationResult curve;
};

/// Smallest grid constant whose seed-level violation frequency is <= delta.
/// Throws CalibrationFailure (carrying the full curve) if no point qualifies.
CalibrationResult calibrate_beta(const CalibrationSpec& spec);

/// Exact second moments E[phi phi^T] of a policy's state-action occupancy.
std::vector<Eigen::MatrixXd> feature_second_moments(const TabularLinearMdp& mdp,
                                                    const PolicyTable& pi);

/// Oracle planner: true reward, exact transition operator, penalty from the
/// dataset Gram. Requires one_hot_tabular features.
PessimisticPolicy oracle_plan(const TabularLinearMdp& mdp, const ChoiceDataset& ds,
                              double beta, double lambda_reg);

/// Oracle reward container (true weights, dataset Gram) for audits.
RecoveredReward oracle_reward(const TabularLinearMdp& mdp, const ChoiceDataset& ds,
                              double lambda_reg);

} // namespace dcppo
