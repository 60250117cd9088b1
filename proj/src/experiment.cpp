#include "domino/experiment.hpp"

#include "domino/random.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <initializer_list>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace domino {

namespace fs = std::filesystem;

namespace {

// Typed access to a JSON object that remembers where it sits in the document.
class Node {
public:
    Node(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError((path_.empty() ? "/" : path_) + ": " + msg); }
    [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const {
        throw ConfigError(path_ + "/" + key + ": " + msg);
    }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!ok.count(it.key())) fail_key(it.key(), "unknown key");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const Json& raw(const std::string& key) const { return j_.at(key); }
    std::string child(const std::string& key) const { return path_ + "/" + key; }
    Node object(const std::string& key) const { return Node(j_.at(key), child(key)); }

    double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const Json& v = j_.at(key);
        if (!v.is_number()) fail_key(key, "expected a number");
        return v.get<double>();
    }
    int integer(const std::string& key, int fallback) const {
        if (!has(key)) return fallback;
        const Json& v = j_.at(key);
        if (!v.is_number_integer()) fail_key(key, "expected an integer");
        return v.get<int>();
    }
    std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const Json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            fail_key(key, "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const Json& v = j_.at(key);
        if (!v.is_boolean()) fail_key(key, "expected true or false");
        return v.get<bool>();
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const Json& v = j_.at(key);
        if (!v.is_string()) fail_key(key, "expected a string");
        return v.get<std::string>();
    }

    // Runs a parse function, prefixing plain invalid_argument errors with the key's path.
    template <typename F>
    auto guarded(const std::string& key, F&& f) const {
        try {
            return f();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            fail_key(key, e.what());
        }
    }

    const std::string& path() const { return path_; }

private:
    const Json& j_;
    std::string path_;
};

template <typename T, typename F>
std::vector<T> list_of(const Node& node, const std::string& key, F&& item) {
    const Json& v = node.raw(key);
    if (!v.is_array()) node.fail_key(key, "expected a list");
    if (v.empty()) node.fail_key(key, "list must not be empty");
    std::vector<T> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(item(v[k], node.child(key) + "/" + std::to_string(k)));
    return out;
}

double item_number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return v.get<double>();
}

int item_integer(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return v.get<int>();
}

Cell item_cell(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw ConfigError(path + ": expected [row, col]");
    return {v[0].get<int>(), v[1].get<int>()};
}

void parse_goals(const Node& node, GridSpec& g) {
    if (!node.has("goals")) return;
    const Json& goals = node.raw("goals");
    if (!goals.is_array()) node.fail_key("goals", "expected a list");
    g.goal_cells.clear();
    for (std::size_t k = 0; k < goals.size(); ++k) {
        Node goal(goals[k], node.child("goals") + "/" + std::to_string(k));
        goal.allow({"cell", "reward"});
        if (!goal.has("cell")) goal.fail_key("cell", "missing");
        g.goal_cells[item_cell(goal.raw("cell"), goal.child("cell"))] = goal.number("reward", 1.0);
    }
}

void parse_grid_common(const Node& node, GridSpec& g) {
    parse_goals(node, g);
    if (node.has("start")) g.start = item_cell(node.raw("start"), node.child("start"));
    g.slip_prob = node.number("slip_prob", g.slip_prob);
    g.discount = node.number("discount", g.discount);
    if (node.has("features"))
        g.feature_kind = node.guarded("features", [&] { return parse_feature_kind(node.text("features", "")); });
    node.guarded("type", [&] {
        g.validate();
        return 0;
    });
}

DiversityConfig parse_diversity(const Node& node, DiversityConfig d) {
    node.allow({"kind", "contact_distance", "attractive_power", "repulsive_power", "attractive_coeff", "scaling"});
    if (node.has("kind")) d.kind = node.guarded("kind", [&] { return parse_diversity_kind(node.text("kind", "")); });
    d.contact_distance = node.number("contact_distance", d.contact_distance);
    d.attractive_power = node.number("attractive_power", d.attractive_power);
    d.repulsive_power = node.number("repulsive_power", d.repulsive_power);
    d.attractive_coeff = node.number("attractive_coeff", d.attractive_coeff);
    if (node.has("scaling"))
        d.scaling = node.guarded("scaling", [&] { return parse_reward_scaling(node.text("scaling", "")); });
    return d;
}

StrategyConfig parse_strategy(const Node& node, StrategyConfig s) {
    node.allow({"kind", "alpha", "c_d", "c_e"});
    if (node.has("kind")) s.kind = node.guarded("kind", [&] { return parse_strategy_kind(node.text("kind", "")); });
    s.alpha = node.number("alpha", s.alpha);
    s.c_d = node.number("c_d", s.c_d);
    s.c_e = node.number("c_e", s.c_e);
    return s;
}

MovingAverageConfig parse_averages(const Node& node) {
    node.allow({"value_decay", "feature_decay"});
    MovingAverageConfig m;
    m.value_decay = node.number("value_decay", m.value_decay);
    m.feature_decay = node.number("feature_decay", m.feature_decay);
    return m;
}

TrainerConfig parse_trainer(const Node& node) {
    node.allow({"mode", "exact", "sampled", "moving_average"});
    TrainerConfig t;
    const std::string mode = node.text("mode", "exact");
    if (mode == "exact")
        t.mode = TrainerConfig::Mode::Exact;
    else if (mode == "sampled")
        t.mode = TrainerConfig::Mode::Sampled;
    else
        node.fail_key("mode", "expected \"exact\" or \"sampled\"");
    if (node.has("moving_average")) {
        t.exact.averages = parse_averages(node.object("moving_average"));
        t.sampled.averages = t.exact.averages;
    }
    if (node.has("exact")) {
        const Node e = node.object("exact");
        e.allow({"outer_iterations", "criterion", "lagrange_lr", "ftl_mode", "planner", "planner_tolerance"});
        ExactTrainConfig& x = t.exact;
        x.outer_iterations = e.integer("outer_iterations", x.outer_iterations);
        if (e.has("criterion"))
            x.criterion = e.guarded("criterion", [&] { return parse_criterion(e.text("criterion", "")); });
        x.lagrange_lr = e.number("lagrange_lr", x.lagrange_lr);
        if (e.has("ftl_mode")) x.ftl_mode = e.guarded("ftl_mode", [&] { return parse_ftl_mode(e.text("ftl_mode", "")); });
        const std::string planner = e.text("planner", "PolicyIteration");
        if (planner == "PolicyIteration")
            x.planner.method = PlannerMethod::PolicyIteration;
        else if (planner == "ValueIteration")
            x.planner.method = PlannerMethod::ValueIteration;
        else
            e.fail_key("planner", "expected \"PolicyIteration\" or \"ValueIteration\"");
        x.planner.tolerance = e.number("planner_tolerance", x.planner.tolerance);
    }
    if (node.has("sampled")) {
        const Node s = node.object("sampled");
        s.allow({"total_episodes", "episode_length", "policy_lr", "value_lr", "entropy_weight", "n_step", "discount",
                 "lagrange_lr", "adam_lagrange", "psi_refresh_interval", "eval_interval", "eval_criterion"});
        SampleTrainConfig& x = t.sampled;
        x.total_episodes = s.integer("total_episodes", x.total_episodes);
        x.episode_length = s.integer("episode_length", x.episode_length);
        x.policy_lr = s.number("policy_lr", x.policy_lr);
        x.value_lr = s.number("value_lr", x.value_lr);
        x.entropy_weight = s.number("entropy_weight", x.entropy_weight);
        x.n_step = s.integer("n_step", x.n_step);
        x.discount = s.number("discount", x.discount);
        x.lagrange_lr = s.number("lagrange_lr", x.lagrange_lr);
        x.adam_lagrange = s.boolean("adam_lagrange", x.adam_lagrange);
        x.psi_refresh_interval = s.integer("psi_refresh_interval", x.psi_refresh_interval);
        x.eval_interval = s.integer("eval_interval", x.eval_interval);
        if (s.has("eval_criterion"))
            x.eval_criterion = s.guarded("eval_criterion", [&] { return parse_criterion(s.text("eval_criterion", "")); });
    }
    node.guarded("exact", [&] {
        t.exact.validate();
        return 0;
    });
    node.guarded("sampled", [&] {
        t.sampled.validate();
        return 0;
    });
    return t;
}

Schedule parse_schedule(const Node& node) {
    node.allow({"kind", "period", "duration", "start"});
    Schedule s;
    const std::string kind = node.text("kind", "Always");
    if (kind == "Always")
        s.kind = Schedule::Kind::Always;
    else if (kind == "Periodic")
        s.kind = Schedule::Kind::Periodic;
    else
        node.fail_key("kind", "expected \"Always\" or \"Periodic\"");
    s.period = node.integer("period", s.period);
    s.duration = node.integer("duration", s.duration);
    s.start = node.integer("start", s.start);
    return s;
}

MethodConfig parse_method(const Node& node, const ExperimentConfig& base, const std::string& base_dir,
                          const std::string& default_name) {
    node.allow({"name", "n", "strategy", "diversity", "checkpoints"});
    MethodConfig m;
    m.name = node.text("name", default_name);
    m.n = node.integer("n", base.n);
    if (m.n < 1) node.fail_key("n", "must be >= 1");
    m.strategy = node.has("strategy") ? parse_strategy(node.object("strategy"), base.strategy) : base.strategy;
    m.diversity = node.has("diversity") ? parse_diversity(node.object("diversity"), base.diversity) : base.diversity;
    node.guarded("strategy", [&] {
        m.strategy.validate();
        return 0;
    });
    node.guarded("diversity", [&] {
        m.diversity.validate();
        return 0;
    });
    if (node.has("checkpoints")) m.checkpoints = (fs::path(base_dir) / node.text("checkpoints", "")).string();
    return m;
}

KShotSection parse_kshot(const Node& node, const ExperimentConfig& base, const std::string& base_dir) {
    node.allow({"k_select", "n_eval", "n_train_seeds", "ci_level", "horizon", "resamples", "baseline", "methods",
                "perturbations"});
    KShotSection k;
    k.cfg.k_select = node.integer("k_select", k.cfg.k_select);
    k.cfg.n_eval = node.integer("n_eval", k.cfg.n_eval);
    k.cfg.n_train_seeds = node.integer("n_train_seeds", k.cfg.n_train_seeds);
    k.cfg.ci_level = node.number("ci_level", k.cfg.ci_level);
    k.cfg.horizon = node.integer("horizon", k.cfg.horizon);
    k.cfg.resamples = node.integer("resamples", k.cfg.resamples);
    node.guarded("k_select", [&] {
        k.cfg.validate();
        return 0;
    });

    ExperimentConfig baseline_base = base;
    baseline_base.n = 1;
    baseline_base.strategy.kind = StrategyKind::NoDiversity;
    if (node.has("baseline")) {
        k.baseline = parse_method(node.object("baseline"), baseline_base, base_dir, "baseline");
    } else {
        k.baseline.name = "baseline";
        k.baseline.n = 1;
        k.baseline.strategy = baseline_base.strategy;
        k.baseline.diversity = base.diversity;
    }
    if (!node.has("methods")) node.fail_key("methods", "missing");
    int idx = 0;
    k.methods = list_of<MethodConfig>(node, "methods", [&](const Json& v, const std::string& path) {
        return parse_method(Node(v, path), base, base_dir, "method_" + std::to_string(idx++));
    });
    if (!node.has("perturbations")) node.fail_key("perturbations", "missing");
    k.perturbations = list_of<PerturbationConfig>(node, "perturbations", [&](const Json& v, const std::string& path) {
        Node p(v, path);
        p.allow({"kind", "magnitudes", "schedule", "actions", "noop_action"});
        PerturbationConfig pc;
        pc.base.kind = p.guarded("kind", [&] { return parse_perturbation_kind(p.text("kind", "")); });
        if (p.has("schedule")) pc.base.schedule = parse_schedule(p.object("schedule"));
        if (p.has("actions")) pc.base.actions = list_of<int>(p, "actions", item_integer);
        if (p.has("noop_action")) pc.base.noop_action = p.integer("noop_action", 0);
        if (!p.has("magnitudes")) p.fail_key("magnitudes", "missing");
        std::vector<double> mags = list_of<double>(p, "magnitudes", item_number);
        if (std::find(mags.begin(), mags.end(), 0.0) == mags.end()) mags.insert(mags.begin(), 0.0);
        pc.magnitudes = mags;
        for (double m : mags) {
            Perturbation probe = pc.base;
            probe.magnitude = m;
            p.guarded("magnitudes", [&] {
                probe.validate(base.environment.build().mdp.num_actions);
                return 0;
            });
        }
        return pc;
    });
    return k;
}

std::string join_path(const std::string& base_dir, const std::string& rel) {
    const fs::path p(rel);
    return p.is_absolute() ? rel : (fs::path(base_dir) / p).string();
}

}  // namespace

Environment EnvironmentConfig::build() const {
    switch (type) {
        case Type::Gridworld: return make_environment(grid);
        case Type::Chain: return make_environment(chain);
        case Type::Mdp: return make_environment(mdp);
    }
    throw std::logic_error("unknown environment type");
}

EnvironmentConfig parse_environment(const Json& j, const std::string& path, const std::string& base_dir) {
    const Node node(j, path);
    EnvironmentConfig env;
    const std::string type = node.text("type", "");
    if (type == "gridworld") {
        node.allow({"type", "width", "height", "walls", "goals", "start", "slip_prob", "features", "discount"});
        env.type = EnvironmentConfig::Type::Gridworld;
        GridSpec& g = env.grid;
        g.width = node.integer("width", 1);
        g.height = node.integer("height", 1);
        if (node.has("walls")) {
            const Json& walls = node.raw("walls");
            if (!walls.is_array()) node.fail_key("walls", "expected a list");
            for (std::size_t k = 0; k < walls.size(); ++k)
                g.walls.insert(item_cell(walls[k], node.child("walls") + "/" + std::to_string(k)));
        }
        parse_grid_common(node, g);
    } else if (type == "four_rooms") {
        node.allow({"type", "size", "goals", "start", "slip_prob", "features", "discount"});
        env.type = EnvironmentConfig::Type::Gridworld;
        env.grid = node.guarded("size", [&] { return four_rooms(node.integer("size", 7)); });
        parse_grid_common(node, env.grid);
    } else if (type == "chain") {
        node.allow({"type", "length", "features", "slip_prob", "left_reward", "right_reward", "discount", "start"});
        env.type = EnvironmentConfig::Type::Chain;
        ChainSpec& c = env.chain;
        c.length = node.integer("length", c.length);
        if (node.has("features"))
            c.feature = node.guarded("features", [&] { return parse_chain_feature(node.text("features", "")); });
        c.slip_prob = node.number("slip_prob", c.slip_prob);
        c.left_reward = node.number("left_reward", c.left_reward);
        c.right_reward = node.number("right_reward", c.right_reward);
        c.discount = node.number("discount", c.discount);
        c.start = node.integer("start", c.start);
        node.guarded("type", [&] {
            c.validate();
            return 0;
        });
    } else if (type == "file") {
        node.allow({"type", "path"});
        const std::string file = join_path(base_dir, node.text("path", ""));
        Json inner;
        try {
            inner = read_json_file(file);
        } catch (const std::exception& e) {
            node.fail_key("path", e.what());
        }
        const std::string inner_dir = fs::path(file).parent_path().string();
        if (inner.is_object() && inner.contains("num_states")) {
            env.type = EnvironmentConfig::Type::Mdp;
            env.mdp = node.guarded("path", [&] { return mdp_from_json(inner); });
        } else {
            env = parse_environment(inner, path + "/path{" + file + "}", inner_dir);
        }
    } else {
        node.fail_key("type", "expected gridworld, four_rooms, chain or file");
    }
    return env;
}

ExperimentConfig parse_config(const Json& j, const std::string& base_dir) {
    const Node root(j, "");
    root.allow({"name", "master_seed", "output_dir", "environment", "n", "diversity", "strategy", "trainer", "sweep",
                "seeds", "kshot"});
    ExperimentConfig cfg;
    cfg.name = root.text("name", cfg.name);
    cfg.master_seed = root.seed("master_seed", cfg.master_seed);
    cfg.output_dir = join_path(base_dir, root.text("output_dir", cfg.output_dir));
    if (!root.has("environment")) root.fail_key("environment", "missing");
    cfg.environment = parse_environment(root.raw("environment"), "/environment", base_dir);
    cfg.n = root.integer("n", cfg.n);
    if (cfg.n < 1) root.fail_key("n", "must be >= 1");
    if (root.has("diversity")) cfg.diversity = parse_diversity(root.object("diversity"), cfg.diversity);
    if (root.has("strategy")) cfg.strategy = parse_strategy(root.object("strategy"), cfg.strategy);
    root.guarded("diversity", [&] {
        cfg.diversity.validate();
        return 0;
    });
    root.guarded("strategy", [&] {
        cfg.strategy.validate();
        return 0;
    });
    if (root.has("trainer")) cfg.trainer = parse_trainer(root.object("trainer"));

    if (root.has("sweep")) {
        const Node s = root.object("sweep");
        s.allow({"strategy", "alpha", "n", "contact_distance", "c_e", "c_d"});
        SweepConfig& w = cfg.sweep;
        if (s.has("strategy"))
            w.strategy = list_of<StrategyKind>(s, "strategy", [](const Json& v, const std::string& path) {
                if (!v.is_string()) throw ConfigError(path + ": expected a string");
                try {
                    return parse_strategy_kind(v.get<std::string>());
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(path + ": " + e.what());
                }
            });
        if (s.has("alpha")) w.alpha = list_of<double>(s, "alpha", item_number);
        if (s.has("n")) w.n = list_of<int>(s, "n", item_integer);
        if (s.has("contact_distance")) w.contact_distance = list_of<double>(s, "contact_distance", item_number);
        if (s.has("c_e")) w.c_e = list_of<double>(s, "c_e", item_number);
        if (s.has("c_d")) w.c_d = list_of<double>(s, "c_d", item_number);
        for (std::size_t k = 0; k < w.n.size(); ++k)
            if (w.n[k] < 1) throw ConfigError("/sweep/n/" + std::to_string(k) + ": must be >= 1");
    }
    SweepConfig& w = cfg.sweep;
    if (w.strategy.empty()) w.strategy = {cfg.strategy.kind};
    if (w.alpha.empty()) w.alpha = {cfg.strategy.alpha};
    if (w.n.empty()) w.n = {cfg.n};
    if (w.contact_distance.empty()) w.contact_distance = {cfg.diversity.contact_distance};
    if (w.c_e.empty()) w.c_e = {cfg.strategy.c_e};
    if (w.c_d.empty()) w.c_d = {cfg.strategy.c_d};

    if (root.has("seeds")) {
        cfg.seeds = list_of<std::uint64_t>(root, "seeds", [](const Json& v, const std::string& path) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw ConfigError(path + ": expected a non-negative integer");
            return v.get<std::uint64_t>();
        });
    }
    // every sweep point must be a valid configuration
    for (const RunSpec& r : expand_sweep(cfg)) {
        try {
            r.strategy.validate();
            r.diversity.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("/sweep: run " + std::to_string(r.run_index) + ": " + e.what());
        }
    }
    if (root.has("kshot")) cfg.kshot = parse_kshot(root.object("kshot"), cfg, base_dir);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    Json j;
    try {
        j = read_json_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    const std::string dir = fs::path(path).parent_path().string();
    return parse_config(j, dir.empty() ? "." : dir);
}

std::vector<RunSpec> expand_sweep(const ExperimentConfig& cfg) {
    std::vector<RunSpec> runs;
    const SweepConfig& w = cfg.sweep;
    int index = 0;
    for (StrategyKind kind : w.strategy)
        for (double alpha : w.alpha)
            for (int n : w.n)
                for (double l0 : w.contact_distance)
                    for (double c_e : w.c_e)
                        for (double c_d : w.c_d)
                            for (std::uint64_t seed : cfg.seeds) {
                                RunSpec r;
                                r.run_index = index;
                                r.n = n;
                                r.strategy = cfg.strategy;
                                r.strategy.kind = kind;
                                r.strategy.alpha = alpha;
                                r.strategy.c_e = c_e;
                                r.strategy.c_d = c_d;
                                r.diversity = cfg.diversity;
                                r.diversity.contact_distance = l0;
                                r.seed = seed;
                                r.run_seed = hash64(cfg.master_seed, static_cast<std::uint64_t>(index));
                                runs.push_back(r);
                                ++index;
                            }
    return runs;
}

TrainResult train(const Environment& env, int n, const DiversityConfig& diversity, const StrategyConfig& strategy,
                  const TrainerConfig& trainer, std::uint64_t seed) {
    if (trainer.mode == TrainerConfig::Mode::Exact) {
        ExactTrainConfig c = trainer.exact;
        c.seed = seed;
        return train_exact(env.mdp, n, diversity, strategy, c);
    }
    SampleTrainConfig c = trainer.sampled;
    c.seed = seed;
    return train_sampled(env.mdp, n, diversity, strategy, c);
}

RunOutcome execute_run(const ExperimentConfig& cfg, const Environment& env, const RunSpec& spec) {
    RunOutcome out;
    out.spec = spec;
    try {
        out.result = train(env, spec.n, spec.diversity, spec.strategy, cfg.trainer, spec.run_seed);
        const Criterion crit = cfg.trainer.mode == TrainerConfig::Mode::Exact ? cfg.trainer.exact.criterion
                                                                              : cfg.trainer.sampled.eval_criterion;
        const Policy best = best_response(env.mdp, env.mdp.reward, crit, cfg.trainer.exact.planner);
        out.optimal_value = policy_value(env.mdp, occupancy(env.mdp, best, crit));
        out.ok = true;
    } catch (const TrainingDiverged& e) {
        out.error = e.what();
        out.result.trace = e.trace;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int k = next.fetch_add(1);
                if (k >= count) return;
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

int worker_count() {
    if (const char* env = std::getenv("DOMINO_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

namespace {

std::string join_values(const Eigen::VectorXd& v) {
    std::string out;
    for (int k = 0; k < v.size(); ++k) {
        if (k) out += ';';
        out += format_double(v[k]);
    }
    return out;
}

class CsvLine {
public:
    CsvLine& operator<<(const std::string& s) {
        add(csv_escape(s));
        return *this;
    }
    CsvLine& operator<<(const char* s) { return *this << std::string(s); }
    CsvLine& operator<<(double x) {
        add(format_double(x));
        return *this;
    }
    CsvLine& operator<<(int x) {
        add(std::to_string(x));
        return *this;
    }
    CsvLine& operator<<(std::uint64_t x) {
        add(std::to_string(x));
        return *this;
    }
    std::string str() const { return line_ + "\n"; }

private:
    void add(const std::string& s) {
        if (!first_) line_ += ',';
        line_ += s;
        first_ = false;
    }
    std::string line_;
    bool first_ = true;
};

}  // namespace

std::string qd_csv(const ExperimentConfig& cfg, const std::vector<RunOutcome>& outcomes) {
    std::string out =
        "run_index,strategy,alpha,n,contact_distance,c_e,c_d,diversity_kind,scaling,attractive_power,"
        "repulsive_power,attractive_coeff,trainer_mode,criterion,iterations,lagrange_lr,ftl_mode,value_decay,"
        "feature_decay,policy_lr,value_lr,entropy_weight,n_step,rl_discount,episode_length,seed,run_seed,"
        "optimal_value,extrinsic_value_mean,extrinsic_value_per_policy,diversity_score,diversity_sum,objective,"
        "status\n";
    const bool exact = cfg.trainer.mode == TrainerConfig::Mode::Exact;
    const ExactTrainConfig& ex = cfg.trainer.exact;
    const SampleTrainConfig& sa = cfg.trainer.sampled;
    for (const RunOutcome& o : outcomes) {
        const RunSpec& r = o.spec;
        CsvLine line;
        line << r.run_index << to_string(r.strategy.kind) << r.strategy.alpha << r.n << r.diversity.contact_distance
             << r.strategy.c_e << r.strategy.c_d << to_string(r.diversity.kind) << to_string(r.diversity.scaling)
             << r.diversity.attractive_power << r.diversity.repulsive_power << r.diversity.attractive_coeff
             << (exact ? "exact" : "sampled") << to_string(exact ? ex.criterion : sa.eval_criterion)
             << (exact ? ex.outer_iterations : sa.total_episodes) << (exact ? ex.lagrange_lr : sa.lagrange_lr)
             << (exact ? to_string(ex.ftl_mode) : std::string("-"))
             << (exact ? ex.averages.value_decay : sa.averages.value_decay)
             << (exact ? ex.averages.feature_decay : sa.averages.feature_decay);
        if (exact)
            line << "-" << "-" << "-" << "-" << "-" << "-";
        else
            line << sa.policy_lr << sa.value_lr << sa.entropy_weight << sa.n_step << sa.discount << sa.episode_length;
        line << r.seed << r.run_seed;
        if (o.ok) {
            const Eigen::VectorXd& v = o.result.value;
            double score = 0.0, sum = 0.0, objective = 0.0;
            if (o.result.psi.rows() >= 2) {
                const DiversityScore ds = diversity_score(o.result.psi);
                score = ds.mean;
                sum = ds.sum;
                objective = diversity_objective(o.result.psi, r.diversity);
            }
            line << o.optimal_value << v.mean() << join_values(v) << score << sum << objective << "ok";
        } else {
            line << "" << "" << "" << "" << "" << "" << ("error: " + o.error);
        }
        out += line.str();
    }
    return out;
}

std::string trace_csv(const TrainTrace& trace) {
    const int n = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().exact_value.size());
    std::string out = "iteration,diversity_score,objective";
    for (int i = 0; i < n; ++i) out += ",exact_value_" + std::to_string(i);
    for (int i = 0; i < n; ++i) out += ",estimated_value_" + std::to_string(i);
    for (int i = 0; i < n; ++i) out += ",sigma_mu_" + std::to_string(i);
    out += "\n";
    for (const TraceRecord& r : trace.records) {
        CsvLine line;
        line << r.iteration << r.diversity_score << r.objective;
        for (int i = 0; i < n; ++i) line << r.exact_value[i];
        for (int i = 0; i < n; ++i) line << r.estimated_value[i];
        for (int i = 0; i < n; ++i) line << r.sigma_mu[i];
        out += line.str();
    }
    return out;
}

Json checkpoint_json(const RunOutcome& o) {
    Json j = policy_set_to_json(o.result.set);
    j["run_index"] = o.spec.run_index;
    j["seed"] = o.spec.seed;
    j["run_seed"] = o.spec.run_seed;
    j["strategy"] = to_string(o.spec.strategy.kind);
    j["alpha"] = o.spec.strategy.alpha;
    j["n"] = o.spec.n;
    return j;
}

namespace {

std::string run_file(const std::string& dir, const std::string& stem, int index, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%04d", index);
    return (fs::path(dir) / (stem + buf + ext)).string();
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, int workers, std::ostream& log) {
    const Environment env = cfg.environment.build();
    const std::vector<RunSpec> runs = expand_sweep(cfg);
    std::vector<RunOutcome> outcomes(runs.size());
    std::mutex log_mutex;
    parallel_for(static_cast<int>(runs.size()), workers, [&](int k) {
        outcomes[k] = execute_run(cfg, env, runs[k]);
        std::lock_guard<std::mutex> lock(log_mutex);
        log << "run " << k + 1 << "/" << runs.size() << (outcomes[k].ok ? " ok" : " failed: " + outcomes[k].error)
            << "\n";
    });
    int failures = 0;
    for (const RunOutcome& o : outcomes) {
        if (!o.ok) ++failures;
        write_text_file(run_file(cfg.output_dir + "/traces", "run", o.spec.run_index, ".csv"), trace_csv(o.result.trace));
        if (o.ok)
            write_text_file(run_file(cfg.output_dir + "/checkpoints", "run", o.spec.run_index, ".json"),
                            checkpoint_json(o).dump(1) + "\n");
    }
    write_text_file(cfg.output_dir + "/qd.csv", qd_csv(cfg, outcomes));
    return failures;
}

namespace {

std::string strategy_params(const MethodConfig& m) {
    std::ostringstream os;
    os << "kind=" << to_string(m.strategy.kind) << ";n=" << m.n;
    switch (m.strategy.kind) {
        case StrategyKind::DominoLagrangian: os << ";alpha=" << format_double(m.strategy.alpha); break;
        case StrategyKind::Smerl:
        case StrategyKind::ReverseSmerl:
            os << ";alpha=" << format_double(m.strategy.alpha) << ";c_d=" << format_double(m.strategy.c_d);
            break;
        case StrategyKind::MultiObjective: os << ";c_e=" << format_double(m.strategy.c_e); break;
        case StrategyKind::NoDiversity: break;
    }
    if (m.n >= 2 && m.strategy.kind != StrategyKind::NoDiversity) {
        os << ";diversity=" << to_string(m.diversity.kind);
        if (m.diversity.kind != DiversityKind::Repulsive) os << ";l0=" << format_double(m.diversity.contact_distance);
    }
    return os.str();
}

PolicySet obtain_set(const ExperimentConfig& cfg, const Environment& env, const MethodConfig& m, int j) {
    const std::uint64_t seed = hash64(cfg.master_seed, static_cast<std::uint64_t>(j));
    if (m.checkpoints) {
        const std::string file = run_file(*m.checkpoints, "seed", j, ".json");
        if (!fs::exists(file)) throw std::runtime_error("missing checkpoint '" + file + "' for method " + m.name);
        PolicySet set = policy_set_from_json(read_json_file(file));
        for (const Policy& p : set.policies) validate_policy(env.mdp, p);
        return set;
    }
    return train(env, m.n, m.diversity, m.strategy, cfg.trainer, seed).set;
}

}  // namespace

std::vector<KShotRow> run_kshot_grid(const ExperimentConfig& cfg, int workers, std::ostream& log) {
    if (!cfg.kshot) throw ConfigError("/kshot: missing");
    const KShotSection& ks = *cfg.kshot;
    const Environment env = cfg.environment.build();
    const int seeds = ks.cfg.n_train_seeds;

    // methods[0..M) then the baseline at index M
    std::vector<MethodConfig> all = ks.methods;
    all.push_back(ks.baseline);
    const int M = static_cast<int>(ks.methods.size());
    std::vector<std::vector<PolicySet>> sets(all.size(), std::vector<PolicySet>(seeds));
    parallel_for(static_cast<int>(all.size()) * seeds, workers, [&](int k) {
        const int m = k / seeds, j = k % seeds;
        sets[m][j] = obtain_set(cfg, env, all[m], j);
    });
    log << "trained " << all.size() << " methods x " << seeds << " seeds\n";

    struct Cell {
        int pert, mag;
    };
    std::vector<Cell> cells;
    for (std::size_t p = 0; p < ks.perturbations.size(); ++p)
        for (std::size_t g = 0; g < ks.perturbations[p].magnitudes.size(); ++g)
            cells.push_back({static_cast<int>(p), static_cast<int>(g)});

    std::vector<std::vector<KShotRow>> cell_rows(cells.size());
    parallel_for(static_cast<int>(cells.size()), workers, [&](int c) {
        const PerturbationConfig& pc = ks.perturbations[cells[c].pert];
        Perturbation p = pc.base;
        p.magnitude = pc.magnitudes[cells[c].mag];
        const std::uint64_t cell_seed = hash64(hash64(cfg.master_seed, 0x6b73686f74ULL + cells[c].pert), cells[c].mag);
        // infeasible random instances are redrawn with the next attempt seed
        PerturbedMdp perturbed;
        bool built = false;
        for (int attempt = 0; attempt < 100 && !built; ++attempt) {
            try {
                perturbed = perturb(env, p, hash64(cell_seed, 1000 + attempt));
                built = true;
            } catch (const PerturbationInfeasible&) {
            }
        }
        if (!built) throw std::runtime_error("could not build a feasible " + to_string(p.kind) + " instance");
        for (int m = 0; m < M; ++m) {
            const KShotResult res = kshot_evaluate(sets[m], sets[M], perturbed, ks.cfg, cell_seed);
            KShotRow agg;
            agg.method = all[m].name;
            agg.strategy_params = strategy_params(all[m]);
            agg.perturbation = to_string(p.kind);
            agg.magnitude = p.magnitude;
            agg.seed = "all";
            agg.ratio = res.ratio;
            agg.abs_return = res.abs_return;
            agg.baseline_return = res.baseline_return;
            agg.ci_low = res.ci_low;
            agg.ci_high = res.ci_high;
            cell_rows[c].push_back(agg);
            for (int j = 0; j < seeds; ++j) {
                KShotRow row = agg;
                row.seed = std::to_string(j);
                row.ratio = res.per_seed[j].ratio;
                row.abs_return = res.per_seed[j].method_mean;
                row.baseline_return = res.per_seed[j].baseline_mean;
                row.has_ci = false;
                cell_rows[c].push_back(row);
            }
        }
    });
    // method-major order: all cells of method 0, then method 1, ...
    std::vector<KShotRow> rows;
    const int per_method = seeds + 1;
    for (int m = 0; m < M; ++m)
        for (const auto& cr : cell_rows)
            rows.insert(rows.end(), cr.begin() + m * per_method, cr.begin() + (m + 1) * per_method);
    return rows;
}

std::string kshot_csv(const std::vector<KShotRow>& rows) {
    std::string out = "method,strategy_params,perturbation,magnitude,seed,ratio,abs_return,baseline_return,ci_low,ci_high\n";
    for (const KShotRow& r : rows) {
        CsvLine line;
        line << r.method << r.strategy_params << r.perturbation << r.magnitude << r.seed << r.ratio << r.abs_return
             << r.baseline_return;
        if (r.has_ci)
            line << r.ci_low << r.ci_high;
        else
            line << "" << "";
        out += line.str();
    }
    return out;
}

void run_kshot(const ExperimentConfig& cfg, int workers, std::ostream& log) {
    const std::vector<KShotRow> rows = run_kshot_grid(cfg, workers, log);
    write_text_file(cfg.output_dir + "/kshot.csv", kshot_csv(rows));
}

}  // namespace domino
