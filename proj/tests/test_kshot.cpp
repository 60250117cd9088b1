#include "domino/kshot.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace domino;

namespace {

// Expected undiscounted return over `horizon` steps by pushing the state
// distribution forward.
double exact_finite_return(const TabularMdp& m, const Policy& pi, int horizon) {
    Eigen::VectorXd x = m.initial_dist;
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) {
        for (int s = 0; s < m.num_states; ++s) total += x[s] * m.reward.row(s).dot(pi.probs.row(s));
        x = oracle::step(m, pi, x);
    }
    return total;
}

PolicySet set_of(std::vector<Policy> ps) {
    PolicySet s = init_set(static_cast<int>(ps.size()), 1, ps[0].num_states(), ps[0].num_actions(),
                           PolicyInit::Uniform, 0);
    s.policies = std::move(ps);
    return s;
}

PerturbedMdp unperturbed(const TabularMdp& m) {
    PerturbedMdp p{m, {}};
    for (int s = 0; s < m.num_states; ++s) p.base_state.push_back(s);
    return p;
}

// Positive-reward random MDP so returns and ratios are well defined.
TabularMdp positive_mdp(Rng& rng, int S, int A) {
    TabularMdp m = oracle::random_mdp(rng, S, A, 1);
    m.reward = m.reward.array().abs() + 0.1;
    return m;
}

}  // namespace

TEST_CASE("episode returns agree with the exact finite-horizon expectation") {
    Rng rng(81);
    const TabularMdp m = positive_mdp(rng, 4, 2);
    const Policy pi = oracle::random_policy(rng, 4, 2);
    const double exact = exact_finite_return(m, pi, 15);
    const std::vector<double> r = evaluate_returns(pi, unperturbed(m), 20000, 15, 5);
    double mean = 0.0, sq = 0.0;
    for (double x : r) {
        mean += x / r.size();
        sq += x * x / r.size();
    }
    const double se = std::sqrt((sq - mean * mean) / r.size());
    CHECK(std::abs(mean - exact) <= 2.576 * se);
}

TEST_CASE("selection from a single policy always picks it") {
    Rng rng(82);
    const TabularMdp m = positive_mdp(rng, 3, 2);
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        CHECK(kshot_select({oracle::random_policy(rng, 3, 2)}, unperturbed(m), KShotConfig{}, seed).index == 0);
}

TEST_CASE("a strictly dominant policy is selected at k = 50") {
    Rng rng(83);
    const TabularMdp m = positive_mdp(rng, 4, 3);
    const Policy best = best_response(m, m.reward, Criterion::Average);
    std::vector<Policy> ps{oracle::random_policy(rng, 4, 3), best, oracle::random_policy(rng, 4, 3)};
    KShotConfig cfg;
    cfg.k_select = 50;
    cfg.horizon = 30;
    const double gap = exact_finite_return(m, best, 30) -
                       std::max(exact_finite_return(m, ps[0], 30), exact_finite_return(m, ps[2], 30));
    REQUIRE(gap > 0.5);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) hits += kshot_select(ps, unperturbed(m), cfg, seed).index == 1;
    CHECK(hits >= 48);
}

TEST_CASE("selection does no worse than a random pick on average") {
    Rng rng(84);
    const TabularMdp m = positive_mdp(rng, 5, 3);
    std::vector<Policy> ps;
    double random_pick = 0.0;
    for (int i = 0; i < 4; ++i) {
        ps.push_back(oracle::random_policy(rng, 5, 3));
        random_pick += exact_finite_return(m, ps.back(), 20) / 4;
    }
    KShotConfig cfg;
    cfg.horizon = 20;
    double selected = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed)
        selected += exact_finite_return(m, ps[kshot_select(ps, unperturbed(m), cfg, seed).index], 20) / 200;
    CHECK(selected >= random_pick);
}

TEST_CASE("unperturbed selection lands near the best policy of the set") {
    Rng rng(85);
    const TabularMdp m = positive_mdp(rng, 5, 3);
    std::vector<Policy> ps;
    double best = 0.0;
    for (int i = 0; i < 5; ++i) {
        ps.push_back(oracle::random_policy(rng, 5, 3));
        best = std::max(best, exact_finite_return(m, ps.back(), 30));
    }
    KShotConfig cfg;
    cfg.horizon = 30;
    cfg.k_select = 40;
    double sel = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        sel += exact_finite_return(m, ps[kshot_select(ps, unperturbed(m), cfg, seed).index], 30) / 100;
    CHECK(sel >= 0.97 * best);
}

TEST_CASE("a method compared with its own baseline has ratio exactly 1") {
    Rng rng(86);
    const TabularMdp m = positive_mdp(rng, 4, 2);
    std::vector<PolicySet> sets;
    for (int j = 0; j < 4; ++j) sets.push_back(set_of({oracle::random_policy(rng, 4, 2)}));
    KShotConfig cfg;
    cfg.resamples = 500;
    const KShotResult r = kshot_evaluate(sets, sets, unperturbed(m), cfg, 3);
    CHECK(r.ratio_defined);
    CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.ci_low <= 1.0 + 1e-12);
    CHECK(r.ci_high >= 1.0 - 1e-12);
    CHECK(r.abs_return == doctest::Approx(r.baseline_return));
    CHECK(r.per_seed.size() == 4);
}

TEST_CASE("total action failure makes every method tie with the baseline") {
    GridSpec g = four_rooms(5);
    g.goal_cells[{0, 0}] = 1.0;  // reward at the start so the baseline return is positive
    g.goal_cells[{4, 4}] = 2.0;
    const Environment env = make_environment(g);
    Perturbation p;
    p.magnitude = 1.0;
    const PerturbedMdp pm = perturb(env, p, 0);
    Rng rng(87);
    const int S = env.mdp.num_states;
    std::vector<PolicySet> sets, base;
    for (int j = 0; j < 3; ++j) {
        sets.push_back(set_of({oracle::random_policy(rng, S, 4), oracle::random_policy(rng, S, 4)}));
        base.push_back(set_of({oracle::random_policy(rng, S, 4)}));
    }
    const KShotResult r = kshot_evaluate(sets, base, pm, KShotConfig{}, 1);
    CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("non-positive baseline returns leave the ratio undefined") {
    Rng rng(88);
    TabularMdp m = oracle::random_mdp(rng, 3, 2, 1);
    m.reward.setConstant(-1.0);
    std::vector<PolicySet> sets{set_of({Policy::uniform(3, 2)}), set_of({Policy::uniform(3, 2)})};
    const KShotResult r = kshot_evaluate(sets, sets, unperturbed(m), KShotConfig{}, 0);
    CHECK_FALSE(r.ratio_defined);
    CHECK(std::isnan(r.ratio));
    CHECK(std::isnan(r.per_seed[0].ratio));
    CHECK(r.abs_return == doctest::Approx(-50.0));
}

TEST_CASE("bootstrap intervals") {
    const std::vector<std::vector<double>> flat{{2.5, 2.5}, {2.5, 2.5, 2.5}, {2.5}};
    const auto [lo, hi] = bootstrap_ci(flat, 0.95, 300, 1);
    CHECK(lo == 2.5);
    CHECK(hi == 2.5);

    CHECK_THROWS(bootstrap_ci({{1.0, 2.0}}, 0.95, 100, 0));

    // strong between-seed spread: the nested interval must be wider than pooled
    Rng rng(89);
    std::vector<std::vector<double>> two_level;
    for (int j = 0; j < 6; ++j) {
        const double centre = 10.0 * rng.uniform();
        std::vector<double> inner;
        for (int e = 0; e < 40; ++e) inner.push_back(centre + 0.1 * (rng.uniform() - 0.5));
        two_level.push_back(inner);
    }
    const auto nested = bootstrap_ci(two_level, 0.95, 2000, 4);
    const auto pooled = pooled_bootstrap_ci(two_level, 0.95, 2000, 4);
    CHECK(nested.second - nested.first > pooled.second - pooled.first);

    CHECK(bootstrap_ci(two_level, 0.9, 500, 11) == bootstrap_ci(two_level, 0.9, 500, 11));
}

TEST_CASE("quantiles interpolate linearly") {
    const std::vector<double> v{1, 2, 3, 4, 5};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 5.0);
    CHECK(quantile_sorted(v, 0.5) == 3.0);
    CHECK(quantile_sorted(v, 0.125) == doctest::Approx(1.5));
    CHECK_THROWS(quantile_sorted({}, 0.5));
}

TEST_CASE("k-shot evaluation is deterministic in its seed") {
    Rng rng(90);
    const TabularMdp m = positive_mdp(rng, 4, 2);
    std::vector<PolicySet> sets, base;
    for (int j = 0; j < 3; ++j) {
        sets.push_back(set_of({oracle::random_policy(rng, 4, 2), oracle::random_policy(rng, 4, 2)}));
        base.push_back(set_of({oracle::random_policy(rng, 4, 2)}));
    }
    KShotConfig cfg;
    cfg.resamples = 300;
    const KShotResult a = kshot_evaluate(sets, base, unperturbed(m), cfg, 12);
    const KShotResult b = kshot_evaluate(sets, base, unperturbed(m), cfg, 12);
    CHECK(a.ratio == b.ratio);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
    CHECK(a.ci_low <= a.ratio);
    CHECK(a.ci_high >= a.ratio);
}

TEST_CASE("config validation") {
    KShotConfig c;
    c.ci_level = 1.0;
    CHECK_THROWS(c.validate());
    c = KShotConfig{};
    c.k_select = 0;
    CHECK_THROWS(c.validate());
    CHECK(KShotConfig{}.k_select == 10);
    CHECK(KShotConfig{}.n_eval == 40);
}
