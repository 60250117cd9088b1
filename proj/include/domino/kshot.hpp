#pragma once

#include "domino/envs.hpp"
#include "domino/mdp.hpp"
#include "domino/policy_set.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace domino {

struct KShotConfig {
    int k_select = 10;
    int n_eval = 40;
    int n_train_seeds = 5;
    double ci_level = 0.95;
    int horizon = 50;
    int resamples = 2000;

    void validate() const;
};

/// Undiscounted return of one seeded episode.
double episode_return(const TabularMdp& mdp, const Policy& policy, int horizon, std::uint64_t seed);

struct Selection {
    int index = 0;
    Eigen::VectorXd mean_returns;  // per policy, over the selection episodes
};

/// Runs k_select episodes per policy on the perturbed MDP and picks the best
/// mean (ties to the lowest index). Episode e uses the same seed for every
/// policy, so the comparison is on common random numbers.
Selection kshot_select(const std::vector<Policy>& policies, const PerturbedMdp& perturbed, const KShotConfig& cfg,
                       std::uint64_t seed);

/// n_eval episode returns; episode e uses hash64(seed, e).
std::vector<double> evaluate_returns(const Policy& policy, const PerturbedMdp& perturbed, int n_eval, int horizon,
                                     std::uint64_t seed);

struct SeedOutcome {
    int selected = 0;
    std::vector<double> method_returns;
    double method_mean = 0.0;
    double baseline_mean = 0.0;
    double ratio = 0.0;  // NaN when the baseline mean is <= 0
};

struct KShotResult {
    std::vector<SeedOutcome> per_seed;
    bool ratio_defined = true;
    double ratio = 0.0;  // mean over seeds and episodes of r_method / mean r_baseline
    double abs_return = 0.0;
    double baseline_return = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// One method against its baseline on one perturbed MDP. `sets[j]` and
/// `baselines[j]` are the sets trained with training seed j; the baseline
/// set's first policy is the reference.
KShotResult kshot_evaluate(const std::vector<PolicySet>& sets, const std::vector<PolicySet>& baselines,
                           const PerturbedMdp& perturbed, const KShotConfig& cfg, std::uint64_t seed);

/// Nested percentile bootstrap of the grand mean: resample outer units (seeds)
/// with replacement, then inner samples (episodes) within each drawn unit.
std::pair<double, double> bootstrap_ci(const std::vector<std::vector<double>>& samples, double level,
                                       int resamples, std::uint64_t seed);

/// Single-level bootstrap over all samples pooled together.
std::pair<double, double> pooled_bootstrap_ci(const std::vector<std::vector<double>>& samples, double level,
                                              int resamples, std::uint64_t seed);

/// Linear-interpolation quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace domino
