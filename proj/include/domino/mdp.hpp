#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace domino {

/// Which long-run weighting an occupancy (and a value) refers to.
enum class Criterion { Average, Discounted };

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& name);

class InvalidMdp : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NotUnichain : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Finite MDP with state-action rewards and state-action features.
///
/// Transition rows are indexed by the flat state-action index `s * A + a`;
/// the same flat index is used for occupancies and for feature rows.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    Eigen::MatrixXd transition;    // (S*A) x S
    Eigen::MatrixXd reward;        // S x A, extrinsic reward
    Eigen::MatrixXd features;      // (S*A) x d
    double discount = 0.99;
    Eigen::VectorXd initial_dist;  // S

    int index(int s, int a) const { return s * num_actions + a; }
    int num_pairs() const { return num_states * num_actions; }
    int feature_dim() const { return static_cast<int>(features.cols()); }
};

/// Stochastic tabular policy; row s is a distribution over actions.
struct Policy {
    Eigen::MatrixXd probs;  // S x A

    int num_states() const { return static_cast<int>(probs.rows()); }
    int num_actions() const { return static_cast<int>(probs.cols()); }

    static Policy uniform(int num_states, int num_actions);
    static Policy deterministic(const std::vector<int>& actions, int num_actions);
};

/// State-action occupancy, flattened with the same `s * A + a` layout as
/// the MDP's transition rows.
struct Occupancy {
    Criterion flavor = Criterion::Average;
    Eigen::VectorXd values;
};

using ExpectedFeatures = Eigen::VectorXd;

/// Per state-action discounted successor features, rows indexed `s * A + a`.
struct SuccessorFeatures {
    Eigen::MatrixXd values;  // (S*A) x d
};

/// Checks every structural and probabilistic invariant; throws InvalidMdp
/// naming the first offending entry.
const TabularMdp& validate_mdp(const TabularMdp& mdp);

/// Throws std::invalid_argument if the policy does not fit the MDP or a row
/// is not a distribution.
void validate_policy(const TabularMdp& mdp, const Policy& policy);

/// Checks that an S x A matrix fits the MDP and is finite.
void validate_reward(const TabularMdp& mdp, const Eigen::MatrixXd& reward);

/// State-to-state transition matrix P_pi(s, s') of the induced Markov chain.
Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const Policy& policy);

/// Flattens an S x A matrix into the `s * A + a` layout.
Eigen::VectorXd flatten(const Eigen::MatrixXd& per_state_action);
Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, int num_states, int num_actions);

struct StationarySolve {
    Occupancy occupancy;
    bool smoothed = false;  // true when the epsilon-uniform retry was needed
    double residual = 0.0;  // ||rho^T P_pi - rho^T||_inf of the returned solution
};

/// Stationary state-action distribution of the chain induced by `policy`.
/// Rank-deficient (multichain) systems are retried once with the policy
/// mixed with the uniform policy at weight 1e-6; NotUnichain if that fails.
StationarySolve solve_stationary(const TabularMdp& mdp, const Policy& policy);
Occupancy stationary_distribution(const TabularMdp& mdp, const Policy& policy);

/// Normalized discounted occupancy, d = (1-gamma) sum_t gamma^t P(s_t=s) pi(a|s)
/// with t starting at 0 and s_0 ~ initial_dist.
Occupancy discounted_occupancy(const TabularMdp& mdp, const Policy& policy);

Occupancy occupancy(const TabularMdp& mdp, const Policy& policy, Criterion criterion);

double policy_value(const TabularMdp& mdp, const Occupancy& occupancy);
double policy_value(const Eigen::MatrixXd& reward, const Occupancy& occupancy);

ExpectedFeatures expected_features(const TabularMdp& mdp, const Occupancy& occupancy);

/// Solves psi(s,a) = (1-gamma) phi(s,a) + gamma E[psi(s',a')]. With this
/// normalization the initial-distribution average of psi equals
/// expected_features(discounted_occupancy).
SuccessorFeatures successor_features(const TabularMdp& mdp, const Policy& policy);

/// Aggregates per-state successor features under initial_dist and `policy`.
ExpectedFeatures aggregate_successor_features(const TabularMdp& mdp, const Policy& policy,
                                              const SuccessorFeatures& sf);

/// Markov policy realizing an occupancy: pi(a|s) proportional to d(s,a).
/// States with no mass copy the row of `fallback` if given, else uniform.
Policy policy_from_occupancy(const TabularMdp& mdp, const Occupancy& occupancy,
                             const Policy* fallback = nullptr);

enum class PlannerMethod { ValueIteration, PolicyIteration };

struct PlannerOptions {
    PlannerMethod method = PlannerMethod::ValueIteration;
    double tolerance = 1e-9;
    int max_iterations = 1'000'000;
    // Average criterion only: weight on the self-loop of the aperiodicity
    // transform used by relative value iteration.
    double aperiodicity = 0.5;
};

struct PlannerResult {
    Policy policy;
    Eigen::VectorXd values;  // discounted: (1-gamma)-scaled state values; average: bias h
    double gain = 0.0;       // average criterion only
    int iterations = 0;
};

/// Optimal deterministic policy for `reward`. Greedy ties go to the lowest
/// action index (actions within 1e-10 relative of the best are tied).
PlannerResult solve_planner(const TabularMdp& mdp, const Eigen::MatrixXd& reward,
                            Criterion criterion, const PlannerOptions& options = {});

Policy best_response(const TabularMdp& mdp, const Eigen::MatrixXd& reward, Criterion criterion,
                     const PlannerOptions& options = {});

}  // namespace domino
