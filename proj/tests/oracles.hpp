#pragma once

// Independent oracles for the test suite. These deliberately avoid the
// library's backward-recursion code paths: policy values come from explicit
// trajectory enumeration and optimal values from a separate memoized
// recursion, so agreement is meaningful.

#include "dcppo/mdp.hpp"

#include <map>
#include <vector>

namespace oracles {

// Expected return from (h, s) under pi by summing over every trajectory
// suffix, weighted by its probability. Exponential in H - h; fine for the
// desk instances used in tests.
inline double enumerate_value(const dcppo::TabularLinearMdp& mdp, const dcppo::PolicyTable& pi,
                              double gamma, int h, int s) {
    if (h == mdp.H) return 0.0;
    double total = 0.0;
    for (int a = 0; a < mdp.A; ++a) {
        double pa = pi.probs[h](s, a);
        if (pa == 0.0) continue;
        double q = mdp.reward(h, s, a);
        for (int sn = 0; sn < mdp.S; ++sn) {
            double p = mdp.P[h](s * mdp.A + a, sn);
            if (p == 0.0) continue;
            q += gamma * p * enumerate_value(mdp, pi, gamma, h + 1, sn);
        }
        total += pa * q;
    }
    return total;
}

inline double enumerate_q(const dcppo::TabularLinearMdp& mdp, const dcppo::PolicyTable& pi,
                          double gamma, int h, int s, int a) {
    double q = mdp.reward(h, s, a);
    for (int sn = 0; sn < mdp.S; ++sn) {
        double p = mdp.P[h](s * mdp.A + a, sn);
        if (p == 0.0) continue;
        q += gamma * p * enumerate_value(mdp, pi, gamma, h + 1, sn);
    }
    return q;
}

// Top-down memoized optimal values at gamma = 1, written independently of
// the library's bottom-up induction.
class MemoizedOptimal {
public:
    explicit MemoizedOptimal(const dcppo::TabularLinearMdp& mdp) : mdp_(mdp) {}

    double value(int h, int s) {
        if (h == mdp_.H) return 0.0;
        auto key = std::make_pair(h, s);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        double best = -1e300;
        for (int a = 0; a < mdp_.A; ++a) {
            double q = mdp_.reward(h, s, a);
            for (int sn = 0; sn < mdp_.S; ++sn) {
                double p = mdp_.P[h](s * mdp_.A + a, sn);
                if (p != 0.0) q += p * value(h + 1, sn);
            }
            if (q > best) best = q;
        }
        memo_[key] = best;
        return best;
    }

private:
    const dcppo::TabularLinearMdp& mdp_;
    std::map<std::pair<int, int>, double> memo_;
};

// Total-variation distance between two distributions over the same support.
inline double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    return 0.5 * (p - q).lpNorm<1>();
}

// Hand-built 3-state (incl. absorbing) / 3-action / H=2 instance where
// action 2 strictly dominates and actions 1 and 2 share the same uniform
// transition over the two live states. One-hot features, d = 4.
inline dcppo::TabularLinearMdp dominance_instance() {
    dcppo::TabularLinearMdp mdp;
    mdp.S = 3;
    mdp.A = 3;
    mdp.H = 2;
    mdp.d = 4;
    mdp.s_init = 0;
    mdp.s_abs = 2;
    mdp.a_anchor = 0;
    mdp.feature_mode = dcppo::FeatureMode::one_hot_tabular;
    mdp.seed = 0;

    mdp.phi = Eigen::MatrixXd::Zero(9, 4);
    int k = 0;
    for (int s = 0; s < 2; ++s)
        for (int a = 1; a < 3; ++a) mdp.phi(s * 3 + a, k++) = 1.0;

    Eigen::VectorXd w(4);
    w << 0.1, 0.4, 0.1, 0.4; // r(s,1) = 0.1, r(s,2) = 0.4 for live states
    mdp.w = {w, w};

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(9, 3);
    for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < 3; ++a) {
            auto row = P.row(s * 3 + a);
            if (s == 2 || a == 0) {
                row[2] = 1.0;
            } else {
                row[0] = 0.5;
                row[1] = 0.5;
            }
        }
    }
    mdp.P = {P, P};
    mdp.validate();
    return mdp;
}

// 2-state (one live, one absorbing) / 2-action / H=2 instance small enough
// for full hand verification.
inline dcppo::TabularLinearMdp tiny_instance() {
    dcppo::TabularLinearMdp mdp;
    mdp.S = 2;
    mdp.A = 2;
    mdp.H = 2;
    mdp.d = 1;
    mdp.s_init = 0;
    mdp.s_abs = 1;
    mdp.a_anchor = 0;
    mdp.feature_mode = dcppo::FeatureMode::one_hot_tabular;
    mdp.seed = 0;

    mdp.phi = Eigen::MatrixXd::Zero(4, 1);
    mdp.phi(0 * 2 + 1, 0) = 1.0; // phi(live, a1) = e_0

    Eigen::VectorXd w0(1), w1(1);
    w0 << 0.3;
    w1 << 0.5;
    mdp.w = {w0, w1};

    // Taking a1 from the live state stays live with prob 0.75.
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(4, 2);
    P.row(0 * 2 + 0) << 0.0, 1.0;
    P.row(0 * 2 + 1) << 0.75, 0.25;
    P.row(1 * 2 + 0) << 0.0, 1.0;
    P.row(1 * 2 + 1) << 0.0, 1.0;
    mdp.P = {P, P};
    mdp.validate();
    return mdp;
}

} // namespace oracles
