#pragma once

#include "domino/diversity.hpp"
#include "domino/mdp.hpp"
#include "domino/policy_set.hpp"
#include "domino/random.hpp"
#include "domino/strategies.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace domino {

enum class FtlMode {
    MovingAverage,  // decayed average of best-response occupancies
    FullAverage,    // running mean over all best responses
};

std::string to_string(FtlMode m);
FtlMode parse_ftl_mode(const std::string& name);

struct ExactTrainConfig {
    int outer_iterations = 400;
    Criterion criterion = Criterion::Discounted;
    double lagrange_lr = 1.0;
    FtlMode ftl_mode = FtlMode::MovingAverage;
    MovingAverageConfig averages;
    PlannerOptions planner{PlannerMethod::PolicyIteration};
    std::uint64_t seed = 0;

    void validate() const;
};

struct SampleTrainConfig {
    int total_episodes = 4000;
    int episode_length = 200;
    double policy_lr = 0.1;
    double value_lr = 0.1;
    double entropy_weight = 0.01;
    int n_step = 5;
    double discount = 0.99;
    double lagrange_lr = 1e-3;
    bool adam_lagrange = true;
    MovingAverageConfig averages;
    int psi_refresh_interval = 1;  // episodes between diversity-reward snapshots
    int eval_interval = 100;       // episodes between exact-evaluation trace rows
    Criterion eval_criterion = Criterion::Average;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TraceRecord {
    int iteration = 0;
    Eigen::VectorXd exact_value;      // per policy
    Eigen::VectorXd estimated_value;  // per policy, moving average
    Eigen::VectorXd sigma_mu;         // per policy extrinsic weight
    double diversity_score = 0.0;
    double objective = 0.0;
};

struct TrainTrace {
    std::vector<TraceRecord> records;
};

struct TrainResult {
    PolicySet set;
    TrainTrace trace;
    Eigen::MatrixXd psi;   // n x d exact expected features of the returned policies
    Eigen::VectorXd value; // exact extrinsic values of the returned policies
};

/// Raised when a table or the objective becomes non-finite; carries the
/// trace recorded up to that point.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, TrainTrace partial);
    TrainTrace trace;
};

/// Exact expected features and values of every policy in a set.
void evaluate_set(const TabularMdp& mdp, const PolicySet& set, Criterion criterion, Eigen::MatrixXd& psi,
                  Eigen::VectorXd& value);

TrainResult train_exact(const TabularMdp& mdp, int n, const DiversityConfig& diversity,
                        const StrategyConfig& strategy, const ExactTrainConfig& cfg);

TrainResult train_sampled(const TabularMdp& mdp, int n, const DiversityConfig& diversity,
                          const StrategyConfig& strategy, const SampleTrainConfig& cfg);

struct Trajectory {
    std::vector<int> states;  // horizon + 1 entries, including the final state
    std::vector<int> actions;
    std::vector<double> rewards;
    Eigen::MatrixXd features;  // horizon x d
};

Trajectory rollout(const TabularMdp& mdp, const Policy& policy, int horizon, std::uint64_t seed);
Trajectory rollout(const TabularMdp& mdp, const Policy& policy, int horizon, Rng& rng);

}  // namespace domino
