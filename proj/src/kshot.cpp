#include "domino/kshot.hpp"

#include "domino/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace domino {

void KShotConfig::validate() const {
    if (k_select < 1 || n_eval < 1 || n_train_seeds < 1 || horizon < 1 || resamples < 1)
        throw std::invalid_argument("k-shot counts must be positive");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw std::invalid_argument("ci_level must lie in (0, 1)");
}

double episode_return(const TabularMdp& mdp, const Policy& policy, int horizon, std::uint64_t seed) {
    Rng rng(seed);
    int s = rng.categorical(mdp.initial_dist);
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) {
        const int a = rng.categorical(policy.probs.row(s));
        total += mdp.reward(s, a);
        s = rng.categorical(mdp.transition.row(mdp.index(s, a)));
    }
    return total;
}

Selection kshot_select(const std::vector<Policy>& policies, const PerturbedMdp& perturbed, const KShotConfig& cfg,
                       std::uint64_t seed) {
    if (policies.empty()) throw std::invalid_argument("cannot select from an empty set");
    Selection out;
    out.mean_returns = Eigen::VectorXd::Zero(static_cast<int>(policies.size()));
    for (std::size_t i = 0; i < policies.size(); ++i) {
        const Policy lifted = lift_policy(policies[i], perturbed);
        double total = 0.0;
        for (int e = 0; e < cfg.k_select; ++e) total += episode_return(perturbed.mdp, lifted, cfg.horizon, hash64(seed, e));
        out.mean_returns[static_cast<int>(i)] = total / cfg.k_select;
    }
    out.mean_returns.maxCoeff(&out.index);  // first maximum
    return out;
}

std::vector<double> evaluate_returns(const Policy& policy, const PerturbedMdp& perturbed, int n_eval, int horizon,
                                     std::uint64_t seed) {
    const Policy lifted = lift_policy(policy, perturbed);
    std::vector<double> out(n_eval);
    for (int e = 0; e < n_eval; ++e) out[e] = episode_return(perturbed.mdp, lifted, horizon, hash64(seed, e));
    return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::pair<double, double> percentile_interval(std::vector<double> stats, double level) {
    std::sort(stats.begin(), stats.end());
    const double tail = 0.5 * (1.0 - level);
    return {quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
}

}  // namespace

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> bootstrap_ci(const std::vector<std::vector<double>>& samples, double level,
                                       int resamples, std::uint64_t seed) {
    const int m = static_cast<int>(samples.size());
    if (m < 2) throw std::invalid_argument("nested bootstrap needs at least two outer samples");
    for (const auto& inner : samples)
        if (inner.empty()) throw std::invalid_argument("nested bootstrap needs non-empty inner samples");
    Rng rng(seed);
    std::vector<double> stats(resamples);
    for (int b = 0; b < resamples; ++b) {
        double outer = 0.0;
        for (int k = 0; k < m; ++k) {
            const auto& inner = samples[rng.below(m)];
            const int len = static_cast<int>(inner.size());
            double acc = 0.0;
            for (int e = 0; e < len; ++e) acc += inner[rng.below(len)];
            outer += acc / len;
        }
        stats[b] = outer / m;
    }
    return percentile_interval(std::move(stats), level);
}

std::pair<double, double> pooled_bootstrap_ci(const std::vector<std::vector<double>>& samples, double level,
                                              int resamples, std::uint64_t seed) {
    std::vector<double> pooled;
    for (const auto& inner : samples) pooled.insert(pooled.end(), inner.begin(), inner.end());
    if (pooled.size() < 2) throw std::invalid_argument("bootstrap needs at least two samples");
    Rng rng(seed);
    const int len = static_cast<int>(pooled.size());
    std::vector<double> stats(resamples);
    for (int b = 0; b < resamples; ++b) {
        double acc = 0.0;
        for (int e = 0; e < len; ++e) acc += pooled[rng.below(len)];
        stats[b] = acc / len;
    }
    return percentile_interval(std::move(stats), level);
}

KShotResult kshot_evaluate(const std::vector<PolicySet>& sets, const std::vector<PolicySet>& baselines,
                           const PerturbedMdp& perturbed, const KShotConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (sets.empty() || sets.size() != baselines.size())
        throw std::invalid_argument("need one baseline per trained set");
    KShotResult out;
    std::vector<std::vector<double>> ratio_samples;
    double abs_total = 0.0, base_total = 0.0;
    for (std::size_t j = 0; j < sets.size(); ++j) {
        // selection and evaluation episodes are shared across methods through these seeds
        const std::uint64_t select_seed = hash64(seed, 2 * j);
        const std::uint64_t eval_seed = hash64(seed, 2 * j + 1);
        SeedOutcome so;
        so.selected = kshot_select(sets[j].policies, perturbed, cfg, select_seed).index;
        so.method_returns = evaluate_returns(sets[j].policies[so.selected], perturbed, cfg.n_eval, cfg.horizon, eval_seed);
        const std::vector<double> base =
            evaluate_returns(baselines[j].policies.at(0), perturbed, cfg.n_eval, cfg.horizon, eval_seed);
        so.method_mean = mean_of(so.method_returns);
        so.baseline_mean = mean_of(base);
        abs_total += so.method_mean;
        base_total += so.baseline_mean;
        if (so.baseline_mean > 0.0) {
            std::vector<double> ratios(so.method_returns.size());
            for (std::size_t e = 0; e < ratios.size(); ++e) ratios[e] = so.method_returns[e] / so.baseline_mean;
            so.ratio = mean_of(ratios);
            ratio_samples.push_back(std::move(ratios));
        } else {
            so.ratio = std::numeric_limits<double>::quiet_NaN();
            out.ratio_defined = false;
        }
        out.per_seed.push_back(std::move(so));
    }
    const double m = static_cast<double>(sets.size());
    out.abs_return = abs_total / m;
    out.baseline_return = base_total / m;
    if (!out.ratio_defined) {
        out.ratio = out.ci_low = out.ci_high = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double total = 0.0;
    for (const auto& so : out.per_seed) total += so.ratio;
    out.ratio = total / m;
    if (ratio_samples.size() >= 2) {
        auto [lo, hi] = bootstrap_ci(ratio_samples, cfg.ci_level, cfg.resamples, hash64(seed, 0xc1));
        // percentile intervals of a skewed statistic can miss the point estimate by round-off
        out.ci_low = std::min(lo, out.ratio);
        out.ci_high = std::max(hi, out.ratio);
    } else {
        out.ci_low = out.ci_high = out.ratio;
    }
    return out;
}

}  // namespace domino
