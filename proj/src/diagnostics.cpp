#include "dcppo/diagnostics.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace dcppo {

namespace {

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    jobs = std::min(jobs, count);
    if (jobs <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& t : workers) t.join();
}

double coverage_ratio(const Eigen::MatrixXd& Sigma_b, const Eigen::MatrixXd& Sigma_star) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma_star);
    double lmax = es.eigenvalues().maxCoeff();
    if (lmax <= 0.0) return std::numeric_limits<double>::infinity();
    double tol = 1e-12 * lmax;
    std::vector<int> keep;
    for (int j = 0; j < es.eigenvalues().size(); ++j)
        if (es.eigenvalues()[j] > tol) keep.push_back(j);
    Eigen::MatrixXd U(Sigma_star.rows(), keep.size());
    Eigen::VectorXd dinv_sqrt(keep.size());
    for (std::size_t c = 0; c < keep.size(); ++c) {
        U.col(c) = es.eigenvectors().col(keep[c]);
        dinv_sqrt[c] = 1.0 / std::sqrt(es.eigenvalues()[keep[c]]);
    }
    Eigen::MatrixXd M = dinv_sqrt.asDiagonal() * (U.transpose() * Sigma_b * U) *
                        dinv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(M);
    return std::max(0.0, em.eigenvalues().minCoeff());
}

} // namespace

std::vector<Eigen::MatrixXd> feature_second_moments(const TabularLinearMdp& mdp,
                                                    const PolicyTable& pi) {
    std::vector<Eigen::VectorXd> occ = state_occupancy(mdp, pi);
    std::vector<Eigen::MatrixXd> sigma(mdp.H);
    for (int h = 0; h < mdp.H; ++h) {
        sigma[h] = Eigen::MatrixXd::Zero(mdp.d, mdp.d);
        for (int s = 0; s < mdp.S; ++s) {
            if (occ[h][s] == 0.0) continue;
            for (int a = 0; a < mdp.A; ++a) {
                double m = occ[h][s] * pi.probs[h](s, a);
                if (m == 0.0) continue;
                sigma[h] += m * mdp.phi.row(s * mdp.A + a).transpose() * mdp.phi.row(s * mdp.A + a);
            }
        }
    }
    return sigma;
}

CoverageReport coverage_check(const TabularLinearMdp& mdp, const BehaviorModel& behavior,
                              const PolicyTable& pi_star, int /*n*/) {
    CoverageReport rep;
    rep.Sigma_b = feature_second_moments(mdp, behavior.pi_b);
    rep.Sigma_star = feature_second_moments(mdp, pi_star);
    rep.c_per_step.resize(mdp.H);
    rep.min_eig_per_step.resize(mdp.H);
    rep.c_dagger_estimate = std::numeric_limits<double>::infinity();
    rep.min_eig_Sigma_b = std::numeric_limits<double>::infinity();
    for (int h = 0; h < mdp.H; ++h) {
        rep.c_per_step[h] = coverage_ratio(rep.Sigma_b[h], rep.Sigma_star[h]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.Sigma_b[h]);
        rep.min_eig_per_step[h] = es.eigenvalues().minCoeff();
        rep.c_dagger_estimate = std::min(rep.c_dagger_estimate, rep.c_per_step[h]);
        rep.min_eig_Sigma_b = std::min(rep.min_eig_Sigma_b, rep.min_eig_per_step[h]);
    }
    return rep;
}

EffectiveDimensions effective_dimensions(const std::vector<Eigen::MatrixXd>& Lambda,
                                         const std::vector<Eigen::MatrixXd>& Sigma_b,
                                         const std::vector<Eigen::MatrixXd>& Sigma_star,
                                         double lambda_reg, int n) {
    if (Lambda.size() != Sigma_b.size() || Sigma_b.size() != Sigma_star.size())
        throw std::invalid_argument("effective_dimensions: horizon mismatch");
    EffectiveDimensions ed;
    for (std::size_t h = 0; h < Lambda.size(); ++h) {
        const int d = static_cast<int>(Lambda[h].rows());
        Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
        Eigen::LDLT<Eigen::MatrixXd> samp(Lambda[h] + lambda_reg * I);
        double tr_s = samp.solve(Sigma_b[h]).trace();
        ed.d_eff_sample += std::sqrt(std::max(0.0, tr_s));
        Eigen::LDLT<Eigen::MatrixXd> pop(static_cast<double>(n) * Sigma_b[h] + lambda_reg * I);
        double tr_p = pop.solve(Sigma_star[h]).trace();
        ed.d_eff_pop += std::sqrt(std::max(0.0, tr_p));
    }
    return ed;
}

double BetaSchedule::value(int n, int H, int A, int d) const {
    double logterm = std::log(static_cast<double>(n) * H / delta);
    return c * H * std::exp(std::min(H, h_cap)) * A * d * std::sqrt(std::max(0.0, logterm));
}

SlopeFit fit_loglog_slope(const std::vector<int>& n_grid, const std::vector<double>& means) {
    SlopeFit fit;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (i < means.size() && std::isfinite(means[i]) && means[i] > 0.0) {
            xs.push_back(std::log(static_cast<double>(n_grid[i])));
            ys.push_back(std::log(means[i]));
        } else {
            fit.excluded_n.push_back(n_grid[i]);
        }
    }
    fit.points_used = static_cast<int>(xs.size());
    if (fit.points_used < 2) return fit;

    double xbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xbar += xs[i];
        ybar += ys[i];
    }
    xbar /= xs.size();
    ybar /= ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - xbar) * (xs[i] - xbar);
        sxy += (xs[i] - xbar) * (ys[i] - ybar);
    }
    fit.defined = true;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    if (fit.points_used > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
            rss += r * r;
        }
        fit.std_error = std::sqrt(rss / (fit.points_used - 2) / sxx);
    }
    return fit;
}

RecoveredReward oracle_reward(const TabularLinearMdp& mdp, const ChoiceDataset& ds,
                              double lambda_reg) {
    RecoveredReward rec;
    rec.lambda_reg = lambda_reg;
    rec.w_hat = mdp.w;
    rec.Lambda.resize(mdp.H);
    FeatureMap fm = mdp.features();
    for (int h = 0; h < mdp.H; ++h) {
        rec.Lambda[h] = Eigen::MatrixXd::Zero(mdp.d, mdp.d);
        for (int i = 0; i < ds.n; ++i) {
            const auto phi = fm.row(ds.steps[h].s[i], ds.steps[h].a[i]);
            rec.Lambda[h] += phi.transpose() * phi;
        }
    }
    return rec;
}

PessimisticPolicy oracle_plan(const TabularLinearMdp& mdp, const ChoiceDataset& ds,
                              double beta, double lambda_reg) {
    if (mdp.feature_mode != FeatureMode::one_hot_tabular)
        throw std::invalid_argument("oracle_plan requires one_hot_tabular features");
    RecoveredReward rec = oracle_reward(mdp, ds, lambda_reg);
    FeatureMap fm = mdp.features();

    PessimisticPolicy pp;
    pp.beta = beta;
    pp.lambda_reg = lambda_reg;
    pp.Q_tilde.resize(mdp.H);
    pp.V_tilde.resize(mdp.H);
    pp.Gamma.resize(mdp.H);
    pp.u_tilde.resize(mdp.H);
    pp.actions.resize(mdp.H);

    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(mdp.S);
    for (int h = mdp.H - 1; h >= 0; --h) {
        Eigen::MatrixXd M = rec.Lambda[h] + lambda_reg * Eigen::MatrixXd::Identity(mdp.d, mdp.d);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        Eigen::VectorXd pv = mdp.P[h] * v_next;

        // Exact transition weights read off the tensor: the one-hot coordinate
        // of (s,a) carries P_h V (s,a).
        Eigen::VectorXd u = Eigen::VectorXd::Zero(mdp.d);
        for (int s = 0; s < mdp.S; ++s) {
            for (int a = 0; a < mdp.A; ++a) {
                const auto phi = fm.row(s, a);
                for (int j = 0; j < mdp.d; ++j)
                    if (phi[j] == 1.0) u[j] = pv[s * mdp.A + a];
            }
        }
        pp.u_tilde[h] = u;

        const double cap = static_cast<double>(mdp.H - h);
        pp.Q_tilde[h].resize(mdp.S, mdp.A);
        pp.Gamma[h].resize(mdp.S, mdp.A);
        pp.V_tilde[h].resize(mdp.S);
        pp.actions[h].resize(mdp.S);
        for (int s = 0; s < mdp.S; ++s) {
            for (int a = 0; a < mdp.A; ++a) {
                Eigen::VectorXd phi = fm.row(s, a).transpose();
                double gamma_pen = 0.0;
                if (beta > 0.0 && phi.lpNorm<Eigen::Infinity>() != 0.0)
                    gamma_pen = beta * std::sqrt(std::max(0.0, phi.dot(ldlt.solve(phi))));
                double q = mdp.reward(h, s, a) + pv[s * mdp.A + a] - gamma_pen;
                pp.Gamma[h](s, a) = gamma_pen;
                pp.Q_tilde[h](s, a) = std::min(std::max(q, 0.0), cap);
            }
            int best = 0;
            double best_q = pp.Q_tilde[h](s, 0);
            for (int a = 1; a < mdp.A; ++a) {
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
    pp.pi_tilde = PolicyTable::deterministic(pp.actions, mdp.A);
    return pp;
}

namespace {

struct SharedFixture {
    TabularLinearMdp mdp;
    BehaviorModel behavior;
    PolicyTable pi_star;
    ValueTables vt_star;
    FeatureMap fmap;
};

SharedFixture build_fixture(const InstanceSpec& inst, double gamma) {
    SharedFixture fx{inst.build(), {}, {}, {}, {}};
    fx.behavior = solve_ddc(fx.mdp, gamma);
    auto [ps, vs] = optimal_policy(fx.mdp);
    fx.pi_star = std::move(ps);
    fx.vt_star = std::move(vs);
    fx.fmap = fx.mdp.features();
    return fx;
}

CellResult run_cell(const SharedFixture& fx, const SweepSpec& spec, int n, int rep) {
    CellResult cell;
    cell.n = n;
    cell.rep = rep;
    cell.data_seed = mix_key(spec.data_seed_base, static_cast<std::uint64_t>(n),
                             static_cast<std::uint64_t>(rep));
    try {
        ChoiceDataset ds = sample_dataset(fx.mdp, fx.behavior, n, cell.data_seed, spec.mechanism);
        cell.beta = spec.beta.value(n, fx.mdp.H, fx.mdp.A, fx.mdp.d);

        RecoveredReward rec;
        PessimisticPolicy pp;
        if (spec.oracle_mode) {
            rec = oracle_reward(fx.mdp, ds, spec.lambda_reg);
            pp = oracle_plan(fx.mdp, ds, cell.beta, spec.lambda_reg);
        } else {
            EstimatedModel est = fit_mle(ds, fx.fmap, spec.mle);
            MleErrorReport errs = mle_error_report(est, fx.behavior, ds);
            cell.mle_pi_err = errs.pi_err_mean;
            cell.mle_q_err = errs.q_err_mean;
            rec = recover_reward(ds, est, fx.fmap, spec.gamma, spec.lambda_reg);
            pp = plan(ds, rec, fx.fmap, PlannerConfig{cell.beta, spec.lambda_reg});
        }

        ValueTables vt = evaluate_policy(fx.mdp, pp.pi_tilde, 1.0);
        cell.subopt = fx.vt_star.V[0][fx.mdp.s_init] - vt.V[0][fx.mdp.s_init];
        cell.cert_max_ratio = reward_error_certificate(rec, fx.mdp).max_ratio;
        ViolationStats audit = uncertainty_violation_audit(pp, rec, fx.mdp);
        cell.violation_fraction = audit.violation_fraction;
        cell.any_violation = audit.any_violation;
        cell.theorem_bound = theorem_suboptimality_bound(pp, fx.mdp, fx.pi_star);
        cell.dominance_ok = audit.any_violation || cell.subopt <= cell.theorem_bound + 1e-8;
    } catch (const std::exception& e) {
        cell.failed = true;
        cell.failure = e.what();
    }
    return cell;
}

} // namespace

SweepResult run_rate_sweep(const SweepSpec& spec) {
    SweepResult result;
    result.spec = spec;
    SharedFixture fx = build_fixture(spec.instance, spec.gamma);

    const int reps = spec.seeds_per_n;
    const int total = static_cast<int>(spec.n_grid.size()) * reps;
    result.cells.resize(total);
    parallel_for(total, spec.jobs, [&](int idx) {
        int ni = idx / reps;
        int rep = idx % reps;
        result.cells[idx] = run_cell(fx, spec, spec.n_grid[ni], rep);
    });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    result.mean_subopt.assign(spec.n_grid.size(), nan);
    result.mean_pi_err.assign(spec.n_grid.size(), nan);
    result.mean_cert_ratio.assign(spec.n_grid.size(), nan);
    for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
        double so = 0.0, pe = 0.0, cr = 0.0;
        int ok = 0;
        for (int rep = 0; rep < reps; ++rep) {
            const CellResult& cell = result.cells[ni * reps + rep];
            if (cell.failed) {
                ++result.failed_runs;
                continue;
            }
            so += cell.subopt;
            pe += cell.mle_pi_err;
            cr += cell.cert_max_ratio;
            ++ok;
        }
        if (ok > 0) {
            result.mean_subopt[ni] = so / ok;
            result.mean_pi_err[ni] = pe / ok;
            result.mean_cert_ratio[ni] = cr / ok;
        }
    }
    result.subopt_slope = fit_loglog_slope(spec.n_grid, result.mean_subopt);
    result.pi_err_slope = fit_loglog_slope(spec.n_grid, result.mean_pi_err);
    result.cert_ratio_slope = fit_loglog_slope(spec.n_grid, result.mean_cert_ratio);
    return result;
}

CalibrationFailure::CalibrationFailure(CalibrationResult curve_)
    : std::runtime_error("no grid constant reached the target violation rate"),
      curve(std::move(curve_)) {}

CalibrationResult calibrate_beta(const CalibrationSpec& spec) {
    if (spec.c_grid.empty()) throw std::invalid_argument("calibrate_beta: empty grid");
    SharedFixture fx = build_fixture(spec.instance, spec.gamma);

    std::vector<double> grid = spec.c_grid;
    std::sort(grid.begin(), grid.end());
    const int nc = static_cast<int>(grid.size());

    // violations[k*nc + ci] = 1 if seed k with constant grid[ci] had any
    // violation. Per-seed data and estimates are shared across the grid.
    std::vector<char> violations(static_cast<std::size_t>(spec.seeds) * nc, 0);
    parallel_for(spec.seeds, spec.jobs, [&](int k) {
        std::uint64_t seed = mix_key(spec.seed_base, static_cast<std::uint64_t>(k));
        ChoiceDataset ds = sample_dataset(fx.mdp, fx.behavior, spec.n, seed, spec.mechanism);
        RecoveredReward rec;
        EstimatedModel est;
        if (spec.oracle_mode) {
            rec = oracle_reward(fx.mdp, ds, spec.lambda_reg);
        } else {
            est = fit_mle(ds, fx.fmap, spec.mle);
            rec = recover_reward(ds, est, fx.fmap, spec.gamma, spec.lambda_reg);
        }
        for (int ci = 0; ci < nc; ++ci) {
            BetaSchedule sched{grid[ci], spec.delta, spec.h_cap};
            double beta = sched.value(spec.n, fx.mdp.H, fx.mdp.A, fx.mdp.d);
            PessimisticPolicy pp =
                spec.oracle_mode ? oracle_plan(fx.mdp, ds, beta, spec.lambda_reg)
                                 : plan(ds, rec, fx.fmap, PlannerConfig{beta, spec.lambda_reg});
            ViolationStats audit = uncertainty_violation_audit(pp, rec, fx.mdp);
            violations[static_cast<std::size_t>(k) * nc + ci] = audit.any_violation ? 1 : 0;
        }
    });

    CalibrationResult result;
    result.c_grid = grid;
    result.violation_frequency.resize(nc);
    for (int ci = 0; ci < nc; ++ci) {
        int bad = 0;
        for (int k = 0; k < spec.seeds; ++k)
            bad += violations[static_cast<std::size_t>(k) * nc + ci];
        result.violation_frequency[ci] = static_cast<double>(bad) / spec.seeds;
    }
    for (int ci = 0; ci < nc; ++ci) {
        if (result.violation_frequency[ci] <= spec.delta) {
            result.chosen_c = grid[ci];
            result.qualified = true;
            break;
        }
    }
    if (!result.qualified) throw CalibrationFailure(result);
    return result;
}

} // namespace dcppo
