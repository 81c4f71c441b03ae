#include "dcppo/estimation.hpp"

#include <cmath>
#include <limits>

namespace dcppo {

std::string to_string(MleSolver s) {
    return s == MleSolver::newton ? "newton" : "gradient_descent_backtracking";
}

MleSolver mle_solver_from_string(const std::string& name) {
    if (name == "newton") return MleSolver::newton;
    if (name == "gradient_descent_backtracking") return MleSolver::gradient_descent_backtracking;
    throw std::invalid_argument("unknown mle solver: " + name);
}

MleConvergenceError::MleConvergenceError(int step_, int iterations_, double grad_norm_,
                                         Eigen::VectorXd last)
    : std::runtime_error("mle fit did not converge at step " + std::to_string(step_) +
                         " after " + std::to_string(iterations_) +
                         " iterations (gradient sup-norm " + std::to_string(grad_norm_) + ")"),
      step(step_), iterations(iterations_), gradient_norm(grad_norm_),
      last_iterate(std::move(last)) {}

namespace {

// Per-step sufficient statistics: visit counts over the (s,a) grid. The
// likelihood depends on the data only through these.
struct StepCounts {
    Eigen::MatrixXd counts;      // S x A
    Eigen::VectorXd state_total; // S
    double n = 0.0;
};

StepCounts collect_counts(const ChoiceDataset& ds, int h, int S, int A) {
    StepCounts sc;
    sc.counts = Eigen::MatrixXd::Zero(S, A);
    sc.state_total = Eigen::VectorXd::Zero(S);
    for (int i = 0; i < ds.n; ++i) {
        sc.counts(ds.steps[h].s[i], ds.steps[h].a[i]) += 1.0;
        sc.state_total[ds.steps[h].s[i]] += 1.0;
    }
    sc.n = static_cast<double>(ds.n);
    return sc;
}

struct Objective {
    const FeatureMap& fm;
    const StepCounts& sc;
    double ridge; // ridge_lambda / n

    // Value, gradient and (negated) Hessian of the penalized mean
    // log-likelihood. Only visited states contribute.
    double value(const Eigen::VectorXd& theta) const {
        double data = 0.0;
        for (int s = 0; s < fm.S; ++s) {
            if (sc.state_total[s] == 0.0) continue;
            Eigen::VectorXd logits(fm.A);
            for (int a = 0; a < fm.A; ++a) logits[a] = fm.row(s, a).dot(theta);
            double m = logits.maxCoeff();
            double lse = m + std::log((logits.array() - m).exp().sum());
            for (int a = 0; a < fm.A; ++a) data += sc.counts(s, a) * logits[a];
            data -= sc.state_total[s] * lse;
        }
        return data / sc.n - ridge * theta.squaredNorm();
    }

    void grad_and_neg_hessian(const Eigen::VectorXd& theta, Eigen::VectorXd& g,
                              Eigen::MatrixXd* negH) const {
        g = Eigen::VectorXd::Zero(fm.d);
        if (negH) *negH = Eigen::MatrixXd::Zero(fm.d, fm.d);
        for (int s = 0; s < fm.S; ++s) {
            if (sc.state_total[s] == 0.0) continue;
            Eigen::VectorXd logits(fm.A);
            for (int a = 0; a < fm.A; ++a) logits[a] = fm.row(s, a).dot(theta);
            double m = logits.maxCoeff();
            Eigen::ArrayXd e = (logits.array() - m).exp();
            Eigen::VectorXd p = e / e.sum();

            Eigen::VectorXd mean_phi = Eigen::VectorXd::Zero(fm.d);
            for (int a = 0; a < fm.A; ++a) {
                g += sc.counts(s, a) * fm.row(s, a).transpose();
                mean_phi += p[a] * fm.row(s, a).transpose();
            }
            g -= sc.state_total[s] * mean_phi;
            if (negH) {
                Eigen::MatrixXd second = Eigen::MatrixXd::Zero(fm.d, fm.d);
                for (int a = 0; a < fm.A; ++a)
                    second += p[a] * fm.row(s, a).transpose() * fm.row(s, a);
                *negH += sc.state_total[s] * (second - mean_phi * mean_phi.transpose());
            }
        }
        g /= sc.n;
        g -= 2.0 * ridge * theta;
        if (negH) {
            *negH /= sc.n;
            *negH += 2.0 * ridge * Eigen::MatrixXd::Identity(fm.d, fm.d);
        }
    }
};

Eigen::VectorXd project_ball(const Eigen::VectorXd& x, double radius) {
    double nrm = x.norm();
    if (nrm <= radius) return x;
    return x * (radius / nrm);
}

// Stationarity measure for max f(theta) s.t. ||theta|| <= R: in the interior
// the plain gradient, on the boundary the tangential component whenever the
// radial part points outward.
double stationarity(const Eigen::VectorXd& theta, const Eigen::VectorXd& g, double radius,
                    bool* on_boundary) {
    double nrm = theta.norm();
    bool boundary = nrm >= radius * (1.0 - 1e-12);
    if (on_boundary) *on_boundary = boundary;
    if (!boundary) return g.lpNorm<Eigen::Infinity>();
    Eigen::VectorXd unit = theta / nrm;
    double radial = g.dot(unit);
    if (radial <= 0.0) return g.lpNorm<Eigen::Infinity>();
    Eigen::VectorXd tangential = g - radial * unit;
    return tangential.lpNorm<Eigen::Infinity>();
}

struct FitResult {
    Eigen::VectorXd theta;
    MleStepDiagnostics diag;
};

FitResult fit_step(const Objective& obj, const MleConfig& cfg, double radius, int h) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(obj.fm.d);
    double f = obj.value(theta);
    Eigen::VectorXd g;
    Eigen::MatrixXd negH;
    const bool use_newton = cfg.solver == MleSolver::newton;

    int iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
        obj.grad_and_neg_hessian(theta, g, use_newton ? &negH : nullptr);
        bool boundary = false;
        double stat = stationarity(theta, g, radius, &boundary);
        if (stat <= cfg.gradient_tolerance) {
            MleStepDiagnostics diag{iter, stat, boundary, f};
            return {theta, diag};
        }

        Eigen::VectorXd dir;
        if (use_newton) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(
                negH + 1e-12 * Eigen::MatrixXd::Identity(obj.fm.d, obj.fm.d));
            dir = ldlt.solve(g);
        } else {
            dir = g;
        }

        // Backtracking on the projection arc.
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            Eigen::VectorXd trial = project_ball(theta + t * dir, radius);
            double ft = obj.value(trial);
            if (ft > f + 1e-4 * g.dot(trial - theta)) {
                theta = std::move(trial);
                f = ft;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved && use_newton) {
            // Newton direction rejected; retry with the raw gradient.
            double tg = 1.0;
            for (int ls = 0; ls < 60; ++ls) {
                Eigen::VectorXd trial = project_ball(theta + tg * g, radius);
                double ft = obj.value(trial);
                if (ft > f + 1e-4 * g.dot(trial - theta)) {
                    theta = std::move(trial);
                    f = ft;
                    moved = true;
                    break;
                }
                tg *= 0.5;
            }
        }
        if (!moved) break; // no ascent direction left at this scale
    }

    obj.grad_and_neg_hessian(theta, g, nullptr);
    bool boundary = false;
    double stat = stationarity(theta, g, radius, &boundary);
    if (stat <= cfg.gradient_tolerance) {
        MleStepDiagnostics diag{iter, stat, boundary, f};
        return {theta, diag};
    }
    throw MleConvergenceError(h, iter, stat, theta);
}

} // namespace

double mle_log_likelihood(const ChoiceDataset& ds, const FeatureMap& features, int h,
                          const Eigen::VectorXd& theta) {
    StepCounts sc = collect_counts(ds, h, features.S, features.A);
    Objective obj{features, sc, 0.0};
    return obj.value(theta);
}

EstimatedModel fit_mle(const ChoiceDataset& ds, const FeatureMap& features, const MleConfig& cfg) {
    if (ds.n < 1) throw std::invalid_argument("fit_mle: empty dataset");
    for (int s = 0; s < features.S; ++s)
        if (features.row(s, features.a_anchor).lpNorm<Eigen::Infinity>() != 0.0)
            throw std::invalid_argument("fit_mle: features must vanish at the anchor action");

    const double radius = cfg.bound_for(ds.H, features.d);
    EstimatedModel est;
    est.theta.resize(ds.H);
    est.Q_hat.resize(ds.H);
    est.V_hat.resize(ds.H);
    est.pi_hat.probs.resize(ds.H);
    est.log_likelihood.resize(ds.H);
    est.diagnostics.resize(ds.H);

    for (int h = 0; h < ds.H; ++h) {
        StepCounts sc = collect_counts(ds, h, features.S, features.A);
        Objective obj{features, sc, cfg.ridge_lambda / sc.n};
        FitResult fr = fit_step(obj, cfg, radius, h);
        est.theta[h] = fr.theta;
        est.diagnostics[h] = fr.diag;

        Eigen::MatrixXd q(features.S, features.A);
        for (int s = 0; s < features.S; ++s)
            for (int a = 0; a < features.A; ++a) q(s, a) = features.row(s, a).dot(fr.theta);
        est.pi_hat.probs[h] = softmax_rows(q);
        est.V_hat[h] = (est.pi_hat.probs[h].array() * q.array()).rowwise().sum();
        est.Q_hat[h] = std::move(q);
        est.log_likelihood[h] = Objective{features, sc, 0.0}.value(fr.theta);
    }
    return est;
}

MleErrorReport mle_error_report(const EstimatedModel& est, const BehaviorModel& truth,
                                const ChoiceDataset& ds) {
    MleErrorReport rep;
    rep.pi_err.resize(ds.H);
    rep.q_err.resize(ds.H);
    for (int h = 0; h < ds.H; ++h) {
        if (est.Q_hat[h].rows() != truth.Q[h].rows() || est.Q_hat[h].cols() != truth.Q[h].cols())
            throw std::invalid_argument("mle_error_report: shape mismatch at step " +
                                        std::to_string(h));
        double pe = 0.0, qe = 0.0;
        for (int i = 0; i < ds.n; ++i) {
            int s = ds.steps[h].s[i];
            double l1_pi = (est.pi_hat.probs[h].row(s) - truth.pi_b.probs[h].row(s))
                               .lpNorm<1>();
            double l1_q = (est.Q_hat[h].row(s) - truth.Q[h].row(s)).lpNorm<1>();
            pe += l1_pi * l1_pi;
            qe += l1_q * l1_q;
        }
        rep.pi_err[h] = pe / ds.n;
        rep.q_err[h] = qe / ds.n;
        rep.pi_err_mean += rep.pi_err[h] / ds.H;
        rep.q_err_mean += rep.q_err[h] / ds.H;
    }
    return rep;
}

} // namespace dcppo
