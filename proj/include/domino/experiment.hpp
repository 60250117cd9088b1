#pragma once

#include "domino/diversity.hpp"
#include "domino/envs.hpp"
#include "domino/io.hpp"
#include "domino/kshot.hpp"
#include "domino/strategies.hpp"
#include "domino/trainer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace domino {

/// Config problem; the message starts with the JSON pointer of the key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct EnvironmentConfig {
    enum class Type { Gridworld, Chain, Mdp } type = Type::Gridworld;
    GridSpec grid;
    ChainSpec chain;
    TabularMdp mdp;  // Type::Mdp only

    Environment build() const;
};

struct TrainerConfig {
    enum class Mode { Exact, Sampled } mode = Mode::Exact;
    ExactTrainConfig exact;
    SampleTrainConfig sampled;
};

struct SweepConfig {
    std::vector<StrategyKind> strategy;
    std::vector<double> alpha;
    std::vector<int> n;
    std::vector<double> contact_distance;
    std::vector<double> c_e;
    std::vector<double> c_d;
};

struct MethodConfig {
    std::string name;
    int n = 1;
    StrategyConfig strategy;
    DiversityConfig diversity;
    std::optional<std::string> checkpoints;  // directory holding seed_<j>.json
};

struct PerturbationConfig {
    Perturbation base;                // magnitude is overwritten per entry
    std::vector<double> magnitudes;   // always starts with 0
};

struct KShotSection {
    KShotConfig cfg;
    MethodConfig baseline;
    std::vector<MethodConfig> methods;
    std::vector<PerturbationConfig> perturbations;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t master_seed = 0;
    std::string output_dir = "out";
    EnvironmentConfig environment;
    int n = 5;
    DiversityConfig diversity;
    StrategyConfig strategy;
    TrainerConfig trainer;
    SweepConfig sweep;
    std::vector<std::uint64_t> seeds{0};
    std::optional<KShotSection> kshot;
};

/// Parses and validates; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const Json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Environment object parser, shared with committed environment files.
EnvironmentConfig parse_environment(const Json& j, const std::string& path, const std::string& base_dir);

struct RunSpec {
    int run_index = 0;
    int n = 1;
    StrategyConfig strategy;
    DiversityConfig diversity;
    std::uint64_t seed = 0;      // value from the config's seed list
    std::uint64_t run_seed = 0;  // hash64(master_seed, run_index)
};

/// Cross product in the order strategy, alpha, n, contact_distance, c_e, c_d,
/// seed (last varies fastest).
std::vector<RunSpec> expand_sweep(const ExperimentConfig& cfg);

struct RunOutcome {
    RunSpec spec;
    bool ok = false;
    std::string error;
    TrainResult result;
    double optimal_value = 0.0;
};

TrainResult train(const Environment& env, int n, const DiversityConfig& diversity, const StrategyConfig& strategy,
                  const TrainerConfig& trainer, std::uint64_t seed);

RunOutcome execute_run(const ExperimentConfig& cfg, const Environment& env, const RunSpec& spec);

/// Runs fn(0..count-1) on `workers` threads; exceptions are rethrown after
/// all workers stop.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

/// Worker count from DOMINO_WORKERS, else the hardware concurrency.
int worker_count();

std::string qd_csv(const ExperimentConfig& cfg, const std::vector<RunOutcome>& outcomes);
std::string trace_csv(const TrainTrace& trace);
Json checkpoint_json(const RunOutcome& outcome);

/// Writes qd.csv, traces/run_XXXX.csv and checkpoints/run_XXXX.json under the
/// output directory. Returns the number of failed runs.
int run_experiment(const ExperimentConfig& cfg, int workers, std::ostream& log);

struct KShotRow {
    std::string method;
    std::string strategy_params;
    std::string perturbation;
    double magnitude = 0.0;
    std::string seed;  // "all" for aggregate rows
    double ratio = 0.0;
    double abs_return = 0.0;
    double baseline_return = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool has_ci = true;
};

std::vector<KShotRow> run_kshot_grid(const ExperimentConfig& cfg, int workers, std::ostream& log);
std::string kshot_csv(const std::vector<KShotRow>& rows);

/// Runs the grid and writes kshot.csv under the output directory.
void run_kshot(const ExperimentConfig& cfg, int workers, std::ostream& log);

std::string csv_escape(const std::string& field);

}  // namespace domino
