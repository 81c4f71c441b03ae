#pragma once

#include "dcppo/mdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcppo {

enum class SampleMechanism { softmax, gumbel_argmax };

std::string to_string(SampleMechanism m);
SampleMechanism mechanism_from_string(const std::string& name);

/// The bounded-rational agent: discounted Q/V and the softmax choice policy
/// they induce.
struct BehaviorModel {
    double gamma = 1.0;
    std::vector<Eigen::MatrixXd> Q; // per h: S x A
    std::vector<Eigen::VectorXd> V; // per h: S (ex-ante value)
    PolicyTable pi_b;
};

/// One step of recorded choices: parallel arrays over trajectories.
struct StepRecord {
    std::vector<int> s;
    std::vector<int> a;
    std::vector<int> s_next;
};

struct ChoiceDataset {
    int n = 0;
    int H = 0;
    int S = 0;
    int A = 0;
    std::uint64_t seed = 0;
    double gamma = 1.0;
    SampleMechanism mechanism = SampleMechanism::softmax;
    std::vector<StepRecord> steps; // H entries

    /// Verifies index ranges and that s_next of step h equals s of step h+1
    /// within each trajectory.
    void validate() const;
};

/// Row-wise softmax, stable under large entries.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& q);

/// Solves the discounted choice Bellman system by backward recursion:
/// Q_h = r_h + gamma * P_h V_{h+1}, pi = softmax(Q_h), V_h = <pi, Q_h>.
BehaviorModel solve_ddc(const TabularLinearMdp& mdp, double gamma);

/// n independent trajectories from s_init. Actions come either from the
/// softmax policy directly or from argmax_a { Q_h(s,a) + Gumbel }; the two
/// mechanisms induce the same choice law. Draws are keyed by
/// (seed, trajectory), so output is identical however trajectories are
/// scheduled.
ChoiceDataset sample_dataset(const TabularLinearMdp& mdp, const BehaviorModel& behavior,
                             int n, std::uint64_t seed, SampleMechanism mechanism);

/// Per-step state visitation frequencies of a dataset (each row sums to 1).
std::vector<Eigen::VectorXd> empirical_state_distribution(const ChoiceDataset& ds);

/// Exact per-step state marginals of a policy pushed through the transition
/// kernel from s_init.
std::vector<Eigen::VectorXd> state_occupancy(const TabularLinearMdp& mdp, const PolicyTable& pi);

} // namespace dcppo
