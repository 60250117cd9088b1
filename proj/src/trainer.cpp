#include "domino/trainer.hpp"

#include "domino/random.hpp"

#include <cmath>
#include <stdexcept>

namespace domino {

std::string to_string(FtlMode m) { return m == FtlMode::MovingAverage ? "MovingAverage" : "FullAverage"; }

FtlMode parse_ftl_mode(const std::string& name) {
    if (name == "MovingAverage") return FtlMode::MovingAverage;
    if (name == "FullAverage") return FtlMode::FullAverage;
    throw std::invalid_argument("unknown ftl_mode '" + name + "'");
}

void ExactTrainConfig::validate() const {
    if (outer_iterations < 1) throw std::invalid_argument("outer_iterations must be >= 1");
    if (!(lagrange_lr >= 0.0 && std::isfinite(lagrange_lr))) throw std::invalid_argument("lagrange_lr must be >= 0");
    averages.validate();
}

void SampleTrainConfig::validate() const {
    if (total_episodes < 1) throw std::invalid_argument("total_episodes must be >= 1");
    if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
    if (!(policy_lr > 0.0) || !(value_lr > 0.0)) throw std::invalid_argument("learning rates must be > 0");
    if (!(entropy_weight >= 0.0)) throw std::invalid_argument("entropy_weight must be >= 0");
    if (n_step < 1) throw std::invalid_argument("n_step must be >= 1");
    if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in [0, 1)");
    if (!(lagrange_lr >= 0.0)) throw std::invalid_argument("lagrange_lr must be >= 0");
    if (psi_refresh_interval < 1) throw std::invalid_argument("psi_refresh_interval must be >= 1");
    if (eval_interval < 1) throw std::invalid_argument("eval_interval must be >= 1");
    averages.validate();
}

TrainingDiverged::TrainingDiverged(const std::string& what, TrainTrace partial)
    : std::runtime_error(what), trace(std::move(partial)) {}

void evaluate_set(const TabularMdp& mdp, const PolicySet& set, Criterion criterion, Eigen::MatrixXd& psi,
                  Eigen::VectorXd& value) {
    const int n = set.size();
    psi.resize(n, mdp.feature_dim());
    value.resize(n);
    for (int i = 0; i < n; ++i) {
        const Occupancy occ = occupancy(mdp, set.policies[i], criterion);
        psi.row(i) = expected_features(mdp, occ).transpose();
        value[i] = policy_value(mdp, occ);
    }
}

namespace {

void fill_set_metrics(TraceRecord& rec, const Eigen::MatrixXd& psis, const DiversityConfig& diversity) {
    if (psis.rows() >= 2) {
        rec.diversity_score = diversity_score(psis).mean;
        rec.objective = diversity_objective(psis, diversity);
    }
}

Eigen::VectorXd sigmas(const PolicySet& set) {
    Eigen::VectorXd s(set.size());
    for (int i = 0; i < set.size(); ++i) s[i] = set.weight(i);
    return s;
}

}  // namespace

TrainResult train_exact(const TabularMdp& mdp, int n, const DiversityConfig& diversity,
                        const StrategyConfig& strategy, const ExactTrainConfig& cfg) {
    validate_mdp(mdp);
    diversity.validate();
    strategy.validate();
    cfg.validate();
    if (n < 1) throw std::invalid_argument("set size must be >= 1");

    const int S = mdp.num_states, A = mdp.num_actions, d = mdp.feature_dim();
    const Criterion crit = cfg.criterion;
    TrainResult out;
    PolicySet& set = out.set;
    set = init_set(n, d, S, A, PolicyInit::UniformRandom, cfg.seed);

    // Two averages per policy. The cost player's features (set.avg_psi) keep
    // the initial point as their zeroth term, so distinct random starts never
    // tie exactly, and decay per ftl_mode. The returned policies realize the
    // uniform average of best-response plays (avg_occ, restarted at the first
    // play): best responses flip between goal-seeking and goal-avoiding as
    // sigmoid(mu) crosses a threshold, and only the full average of those plays
    // settles on the constraint.
    std::vector<Eigen::VectorXd> avg_occ(n);
    for (int i = 0; i < n; ++i) {
        const Occupancy occ = occupancy(mdp, set.policies[i], crit);
        avg_occ[i] = occ.values;
        set.avg_psi.row(i) = expected_features(mdp, occ).transpose();
        set.avg_value[i] = policy_value(mdp, occ);
    }
    std::vector<Policy> last_br(n);
    {
        // policy 0 never sees the others, so its statistics can start at its optimum
        const Occupancy opt = occupancy(mdp, best_response(mdp, mdp.reward, crit, cfg.planner), crit);
        set.vstar_estimate = policy_value(mdp, opt);
        avg_occ[0] = opt.values;
        set.avg_psi.row(0) = expected_features(mdp, opt).transpose();
        set.avg_value[0] = set.vstar_estimate;
    }

    const double decay = cfg.averages.feature_decay;
    const Eigen::VectorXd r_e_flat = flatten(mdp.reward);
    const double vdecay = cfg.averages.value_decay;
    Eigen::MatrixXd played_psi(n, d);
    Eigen::VectorXd played_value(n);
    for (int k = 1; k <= cfg.outer_iterations; ++k) {
        // cost player: rewards are the gradient at the averaged features
        const FeatureSet psis = set.avg_psi;
        std::vector<Eigen::VectorXd> br_occ(n);
        for (int i = 0; i < n; ++i) {
            const MixWeights w = mix_weights(strategy, set, i);
            Eigen::MatrixXd reward = mdp.reward;
            if (w.diversity != 0.0 && n >= 2)
                reward = mix(strategy, mdp.reward, diversity_reward(mdp, psis, i, diversity), set, i);
            else if (w.extrinsic != 1.0)
                reward = w.extrinsic * mdp.reward;
            last_br[i] = best_response(mdp, reward, crit, cfg.planner);
            br_occ[i] = occupancy(mdp, last_br[i], crit).values;
        }

        for (int i = 0; i < n; ++i) {
            const Eigen::RowVectorXd br_psi = (mdp.features.transpose() * br_occ[i]).transpose();
            avg_occ[i] = k == 1 ? br_occ[i] : Eigen::VectorXd(avg_occ[i] + (br_occ[i] - avg_occ[i]) / static_cast<double>(k));
            if (cfg.ftl_mode == FtlMode::MovingAverage)
                set.avg_psi.row(i) = decay * set.avg_psi.row(i) + (1.0 - decay) * br_psi;
            else
                set.avg_psi.row(i) += (br_psi - set.avg_psi.row(i)) / static_cast<double>(k + 1);
            played_psi.row(i) = (mdp.features.transpose() * avg_occ[i]).transpose();
            played_value[i] = r_e_flat.dot(avg_occ[i]);
            // the multiplier tracks a faster value average than the features
            const double br_value = r_e_flat.dot(br_occ[i]);
            if (cfg.ftl_mode == FtlMode::MovingAverage && k > 1)
                set.avg_value[i] = vdecay * set.avg_value[i] + (1.0 - vdecay) * br_value;
            else
                set.avg_value[i] = played_value[i];
        }
        // policy 0 always best-responds to r_e, so this is the current optimal value
        set.vstar_estimate = r_e_flat.dot(br_occ[0]);

        if (strategy.kind == StrategyKind::DominoLagrangian) lagrange_step(set, strategy.alpha, cfg.lagrange_lr);

        TraceRecord rec;
        rec.iteration = k;
        rec.exact_value = played_value;
        rec.estimated_value = set.avg_value;
        rec.sigma_mu = sigmas(set);
        fill_set_metrics(rec, played_psi, diversity);
        const bool finite = std::isfinite(rec.objective) && set.mu.allFinite() && set.avg_psi.allFinite();
        out.trace.records.push_back(std::move(rec));
        if (!finite) throw TrainingDiverged("exact training produced a non-finite objective", out.trace);
    }

    for (int i = 0; i < n; ++i) {
        Occupancy occ{crit, avg_occ[i]};
        set.policies[i] = policy_from_occupancy(mdp, occ, &last_br[i]);
    }
    evaluate_set(mdp, set, crit, out.psi, out.value);
    return out;
}

Trajectory rollout(const TabularMdp& mdp, const Policy& policy, int horizon, Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    Trajectory tr;
    tr.states.reserve(horizon + 1);
    tr.actions.reserve(horizon);
    tr.rewards.reserve(horizon);
    tr.features.resize(horizon, mdp.feature_dim());
    int s = rng.categorical(mdp.initial_dist);
    tr.states.push_back(s);
    for (int t = 0; t < horizon; ++t) {
        const int a = rng.categorical(policy.probs.row(s));
        const int row = mdp.index(s, a);
        tr.actions.push_back(a);
        tr.rewards.push_back(mdp.reward(s, a));
        tr.features.row(t) = mdp.features.row(row);
        s = rng.categorical(mdp.transition.row(row));
        tr.states.push_back(s);
    }
    return tr;
}

Trajectory rollout(const TabularMdp& mdp, const Policy& policy, int horizon, std::uint64_t seed) {
    Rng rng(seed);
    return rollout(mdp, policy, horizon, rng);
}

namespace {

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits) {
    Eigen::RowVectorXd p = (logits.array() - logits.maxCoeff()).exp();
    return p / p.sum();
}

Policy softmax_policy(const Eigen::MatrixXd& logits) {
    Policy p;
    p.probs.resize(logits.rows(), logits.cols());
    for (int s = 0; s < logits.rows(); ++s) p.probs.row(s) = softmax_row(logits.row(s));
    return p;
}

// n-step bootstrapped targets; the episode is truncated, not terminated, so
// the tail bootstraps from the critic at the final state.
std::vector<double> nstep_targets(const std::vector<double>& r, const std::vector<int>& states,
                                  const Eigen::VectorXd& v, double gamma, int n) {
    const int T = static_cast<int>(r.size());
    std::vector<double> g(T);
    for (int t = 0; t < T; ++t) {
        const int m = std::min(n, T - t);
        double acc = 0.0, disc = 1.0;
        for (int j = 0; j < m; ++j) {
            acc += disc * r[t + j];
            disc *= gamma;
        }
        g[t] = acc + disc * v[states[t + m]];
    }
    return g;
}

}  // namespace

TrainResult train_sampled(const TabularMdp& mdp, int n, const DiversityConfig& diversity,
                          const StrategyConfig& strategy, const SampleTrainConfig& cfg) {
    validate_mdp(mdp);
    diversity.validate();
    strategy.validate();
    cfg.validate();
    if (n < 1) throw std::invalid_argument("set size must be >= 1");

    const int S = mdp.num_states, A = mdp.num_actions, d = mdp.feature_dim();
    TrainResult out;
    PolicySet& set = out.set;
    set = init_set(n, d, S, A, PolicyInit::Uniform, cfg.seed);
    Rng rng(hash64(cfg.seed, 1));

    std::vector<Eigen::MatrixXd> logits(n, Eigen::MatrixXd::Zero(S, A));
    std::vector<Eigen::VectorXd> v_e(n, Eigen::VectorXd::Zero(S)), v_d(n, Eigen::VectorXd::Zero(S));
    std::vector<Eigen::VectorXd> direction(n, Eigen::VectorXd::Zero(d));
    LagrangeAdam adam(n, cfg.lagrange_lr);

    auto record = [&](int episode) {
        TraceRecord rec;
        rec.iteration = episode;
        for (int i = 0; i < n; ++i) set.policies[i] = softmax_policy(logits[i]);
        Eigen::MatrixXd psi;
        evaluate_set(mdp, set, cfg.eval_criterion, psi, rec.exact_value);
        rec.estimated_value = set.avg_value;
        rec.sigma_mu = sigmas(set);
        fill_set_metrics(rec, psi, diversity);
        out.trace.records.push_back(std::move(rec));
    };

    for (int ep = 0; ep < cfg.total_episodes; ++ep) {
        if (n >= 2 && ep % cfg.psi_refresh_interval == 0) {
            const FeatureSet snapshot = set.avg_psi;
            for (int i = 1; i < n; ++i) direction[i] = reward_direction(snapshot, i, diversity);
        }
        const int z = rng.below(n);
        const Policy pi = softmax_policy(logits[z]);
        const Trajectory tr = rollout(mdp, pi, cfg.episode_length, rng);
        const int T = cfg.episode_length;

        std::vector<double> r_d(T, 0.0);
        const MixWeights w = mix_weights(strategy, set, z);
        if (z != 0) {
            const Eigen::VectorXd rd = tr.features * direction[z];
            for (int t = 0; t < T; ++t) r_d[t] = rd[t];
        }
        const std::vector<double> g_e = nstep_targets(tr.rewards, tr.states, v_e[z], cfg.discount, cfg.n_step);
        const std::vector<double> g_d = nstep_targets(r_d, tr.states, v_d[z], cfg.discount, cfg.n_step);

        for (int t = 0; t < T; ++t) {
            const int s = tr.states[t], a = tr.actions[t];
            const double adv_e = g_e[t] - v_e[z][s];
            const double adv_d = g_d[t] - v_d[z][s];
            const double adv = w.extrinsic * adv_e + w.diversity * adv_d;

            const Eigen::RowVectorXd p = softmax_row(logits[z].row(s));
            double entropy = 0.0;
            for (int b = 0; b < A; ++b)
                if (p[b] > 0.0) entropy -= p[b] * std::log(p[b]);
            for (int b = 0; b < A; ++b) {
                const double score = (b == a ? 1.0 : 0.0) - p[b];
                const double ent_grad = p[b] > 0.0 ? -p[b] * (std::log(p[b]) + entropy) : 0.0;
                logits[z](s, b) += cfg.policy_lr * (adv * score + cfg.entropy_weight * ent_grad);
            }
            v_e[z][s] += cfg.value_lr * adv_e;
            v_d[z][s] += cfg.value_lr * adv_d;
        }

        update_moving_averages(set, z, tr.rewards, tr.features, cfg.averages);
        set.vstar_estimate = set.avg_value[0];
        if (strategy.kind == StrategyKind::DominoLagrangian) {
            if (cfg.adam_lagrange)
                adam.step(set, strategy.alpha);
            else
                lagrange_step(set, strategy.alpha, cfg.lagrange_lr);
        }

        if (!logits[z].allFinite() || !v_e[z].allFinite() || !v_d[z].allFinite() || !set.mu.allFinite() ||
            !set.avg_psi.allFinite())
            throw TrainingDiverged("sampled training produced non-finite tables at episode " + std::to_string(ep),
                                   out.trace);
        if ((ep + 1) % cfg.eval_interval == 0 || ep + 1 == cfg.total_episodes) record(ep + 1);
    }

    for (int i = 0; i < n; ++i) set.policies[i] = softmax_policy(logits[i]);
    evaluate_set(mdp, set, cfg.eval_criterion, out.psi, out.value);
    return out;
}

}  // namespace domino
