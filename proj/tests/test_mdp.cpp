#include "domino/mdp.hpp"
#include "domino/trainer.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace domino;

namespace {

TabularMdp self_loop() {
    TabularMdp m;
    m.num_states = 1;
    m.num_actions = 1;
    m.transition = Eigen::MatrixXd::Ones(1, 1);
    m.reward = Eigen::MatrixXd::Ones(1, 1);
    m.features = Eigen::MatrixXd::Ones(1, 1);
    m.discount = 0.9;
    m.initial_dist = Eigen::VectorXd::Ones(1);
    return m;
}

// s0 -> s1 -> s0, one action
TabularMdp two_cycle() {
    TabularMdp m;
    m.num_states = 2;
    m.num_actions = 1;
    m.transition.resize(2, 2);
    m.transition << 0, 1, 1, 0;
    m.reward.resize(2, 1);
    m.reward << 2, 0;
    m.features = Eigen::MatrixXd::Identity(2, 2);
    m.discount = 0.9;
    m.initial_dist = Eigen::Vector2d(1, 0);
    return m;
}

}  // namespace

TEST_CASE("validate_mdp accepts the trivial self-loop") { CHECK_NOTHROW(validate_mdp(self_loop())); }

TEST_CASE("validate_mdp names the offending state-action pair") {
    TabularMdp m = two_cycle();
    m.transition(1, 0) = 0.9;
    m.transition(1, 1) = 0.0;
    try {
        validate_mdp(m);
        FAIL("expected InvalidMdp");
    } catch (const InvalidMdp& e) {
        CHECK(std::string(e.what()).find("(s=1, a=0)") != std::string::npos);
    }
}

TEST_CASE("validate_mdp rejects negative probabilities and bad initial distributions") {
    TabularMdp m = two_cycle();
    m.transition.row(0) << -0.5, 1.5;
    CHECK_THROWS_AS(validate_mdp(m), InvalidMdp);
    m = two_cycle();
    m.initial_dist << 0.5, 0.4;
    CHECK_THROWS_AS(validate_mdp(m), InvalidMdp);
    m = two_cycle();
    m.features(0, 0) = NAN;
    CHECK_THROWS_AS(validate_mdp(m), InvalidMdp);
    m = two_cycle();
    m.discount = 1.0;
    CHECK_THROWS_AS(validate_mdp(m), InvalidMdp);
}

TEST_CASE("stationary distribution of trivial chains") {
    CHECK(stationary_distribution(self_loop(), Policy::uniform(1, 1)).values[0] == doctest::Approx(1.0));
    const Occupancy d = stationary_distribution(two_cycle(), Policy::uniform(2, 1));
    CHECK(d.values[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.values[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(policy_value(two_cycle(), d) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stationary distribution matches power iteration on random MDPs") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const TabularMdp m = oracle::random_mdp(rng, 3, 2, 2);
        const Policy pi = Policy::uniform(3, 2);
        const StationarySolve sol = solve_stationary(m, pi);
        CHECK(sol.residual <= 1e-9);
        CHECK_FALSE(sol.smoothed);
        const Eigen::VectorXd ref = oracle::power_iteration_stationary(m, pi);
        CHECK((sol.occupancy.values - ref).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("multichain policies are smoothed, then reported") {
    // two absorbing states reachable from nothing: rank-deficient under "stay"
    TabularMdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.transition.resize(4, 2);
    m.transition << 1, 0,  // s0 stay
        0, 1,              // s0 move
        0, 1,              // s1 stay
        1, 0;              // s1 move
    m.reward = Eigen::MatrixXd::Zero(2, 2);
    m.features = Eigen::MatrixXd::Ones(4, 1);
    m.initial_dist = Eigen::Vector2d(0.5, 0.5);
    const StationarySolve sol = solve_stationary(m, Policy::deterministic({0, 0}, 2));
    CHECK(sol.smoothed);
    CHECK(sol.occupancy.values.sum() == doctest::Approx(1.0));

    // no smoothing can connect two closed classes with no exits at all
    TabularMdp closed = m;
    closed.transition << 1, 0, 1, 0, 0, 1, 0, 1;
    CHECK_THROWS_AS(solve_stationary(closed, Policy::uniform(2, 2)), NotUnichain);
}

TEST_CASE("discounted occupancy: closed forms and truncated series") {
    CHECK(discounted_occupancy(self_loop(), Policy::uniform(1, 1)).values[0] == doctest::Approx(1.0));

    TabularMdp m;
    m.num_states = 2;
    m.num_actions = 1;
    m.transition.resize(2, 2);
    m.transition << 0, 1, 0, 1;
    m.reward = Eigen::MatrixXd::Zero(2, 1);
    m.features = Eigen::MatrixXd::Identity(2, 2);
    m.discount = 0.5;
    m.initial_dist = Eigen::Vector2d(1, 0);
    const Occupancy d = discounted_occupancy(m, Policy::uniform(2, 1));
    CHECK(d.values[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.values[1] == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const TabularMdp r = oracle::random_mdp(rng, 4, 2, 3, 0.9);
        const Policy pi = oracle::random_policy(rng, 4, 2);
        const Eigen::VectorXd got = discounted_occupancy(r, pi).values;
        CHECK((got - oracle::truncated_discounted(r, pi)).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("occupancies are distributions and satisfy discounted flow conservation") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int S = 2 + rng.below(6), A = 1 + rng.below(3);
        const TabularMdp m = oracle::random_mdp(rng, S, A, 2, 0.5 + 0.49 * rng.uniform());
        const Policy pi = oracle::random_policy(rng, S, A);
        for (Criterion c : {Criterion::Average, Criterion::Discounted}) {
            const Occupancy d = occupancy(m, pi, c);
            CHECK(d.values.minCoeff() >= 0.0);
            CHECK(std::abs(d.values.sum() - 1.0) <= 1e-8);
        }
        const Eigen::VectorXd x = discounted_occupancy(m, pi).values;
        for (int s = 0; s < S; ++s) {
            double out = 0.0, in = 0.0;
            for (int a = 0; a < A; ++a) out += x[s * A + a];
            for (int sp = 0; sp < S; ++sp)
                for (int a = 0; a < A; ++a) in += x[sp * A + a] * m.transition(sp * A + a, s);
            CHECK(std::abs(out - ((1.0 - m.discount) * m.initial_dist[s] + m.discount * in)) <= 1e-9);
        }
    }
}

TEST_CASE("policy value is linear in the reward") {
    Rng rng(14);
    const TabularMdp m = oracle::random_mdp(rng, 5, 3, 2);
    const Occupancy d = discounted_occupancy(m, oracle::random_policy(rng, 5, 3));
    CHECK(policy_value(Eigen::MatrixXd::Ones(5, 3), d) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(policy_value(Eigen::MatrixXd::Zero(5, 3), d) == 0.0);
    const Eigen::MatrixXd r1 = Eigen::MatrixXd::Random(5, 3), r2 = Eigen::MatrixXd::Random(5, 3);
    for (double c : {-2.0, 0.0, 0.3, 7.0})
        CHECK(policy_value(Eigen::MatrixXd(r1 + c * r2), d) ==
              doctest::Approx(policy_value(r1, d) + c * policy_value(r2, d)).epsilon(1e-12));
}

TEST_CASE("expected features") {
    Rng rng(15);
    TabularMdp m = oracle::random_mdp(rng, 3, 2, 6);
    m.features = Eigen::MatrixXd::Identity(6, 6);
    const Occupancy d = discounted_occupancy(m, oracle::random_policy(rng, 3, 2));
    CHECK(expected_features(m, d) == d.values);

    m.features = Eigen::MatrixXd::Constant(6, 2, 0.7);
    const ExpectedFeatures c = expected_features(m, d);
    CHECK(c[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(c[1] == doctest::Approx(0.7).epsilon(1e-12));

    m = oracle::random_mdp(rng, 4, 3, 3);
    const Occupancy e = stationary_distribution(m, oracle::random_policy(rng, 4, 3));
    const ExpectedFeatures psi = expected_features(m, e);
    for (int k = 0; k < 3; ++k) {
        double sum = 0.0;
        for (int r = 0; r < 12; ++r) sum += m.features(r, k) * e.values[r];
        CHECK(std::abs(psi[k] - sum) <= 1e-12);
    }
}

TEST_CASE("successor features") {
    const SuccessorFeatures one = successor_features(self_loop(), Policy::uniform(1, 1));
    CHECK(one.values(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp m = oracle::random_mdp(rng, 4, 2, 3, 0.9);
        const Policy pi = oracle::random_policy(rng, 4, 2);
        const SuccessorFeatures sf = successor_features(m, pi);
        // fixed-point residual
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 2; ++a) {
                Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(3);
                for (int sp = 0; sp < 4; ++sp)
                    for (int ap = 0; ap < 2; ++ap)
                        next += m.transition(s * 2 + a, sp) * pi.probs(sp, ap) * sf.values.row(sp * 2 + ap);
                const Eigen::RowVectorXd rhs = (1.0 - m.discount) * m.features.row(s * 2 + a) + m.discount * next;
                CHECK((sf.values.row(s * 2 + a) - rhs).lpNorm<Eigen::Infinity>() <= 1e-9);
            }
        const ExpectedFeatures agg = aggregate_successor_features(m, pi, sf);
        CHECK((agg - expected_features(m, discounted_occupancy(m, pi))).lpNorm<Eigen::Infinity>() <= 1e-8);

        // nearly no bootstrapping: psi approaches phi
        m.discount = 1e-9;
        const SuccessorFeatures myopic = successor_features(m, pi);
        CHECK((myopic.values - m.features).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("best response: zero reward picks the lowest action everywhere") {
    Rng rng(17);
    const TabularMdp m = oracle::random_mdp(rng, 4, 3, 2);
    for (Criterion c : {Criterion::Discounted, Criterion::Average})
        for (PlannerMethod method : {PlannerMethod::ValueIteration, PlannerMethod::PolicyIteration}) {
            const Policy p = best_response(m, Eigen::MatrixXd::Zero(4, 3), c, {method});
            CHECK(p.probs.col(0).sum() == doctest::Approx(4.0));
        }
}

TEST_CASE("best response: a strictly dominant action is chosen") {
    TabularMdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.transition = Eigen::MatrixXd::Constant(4, 2, 0.5);
    m.reward.resize(2, 2);
    m.reward << 0, 1, 0, 1;
    m.features = Eigen::MatrixXd::Ones(4, 1);
    m.initial_dist = Eigen::Vector2d(1, 0);
    for (Criterion c : {Criterion::Discounted, Criterion::Average}) {
        const Policy p = best_response(m, m.reward, c);
        CHECK(p.probs(0, 1) == 1.0);
        CHECK(p.probs(1, 1) == 1.0);
    }
}

TEST_CASE("best response matches exhaustive enumeration") {
    Rng rng(18);
    for (int trial = 0; trial < 20; ++trial) {
        const TabularMdp m = oracle::random_mdp(rng, 4, 3, 1, 0.9);
        double best = -INFINITY;
        oracle::for_each_deterministic(4, 3, [&](const std::vector<int>& acts) {
            best = std::max(best, oracle::iterative_value(m, oracle::deterministic(acts, 3), m.reward));
        });
        for (PlannerMethod method : {PlannerMethod::ValueIteration, PlannerMethod::PolicyIteration}) {
            const Policy p = best_response(m, m.reward, Criterion::Discounted, {method});
            CHECK(std::abs(oracle::iterative_value(m, p, m.reward) - best) <= 1e-7);
        }
    }
}

TEST_CASE("average-reward best response matches enumeration of stationary values") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const TabularMdp m = oracle::random_mdp(rng, 4, 2, 1);
        double best = -INFINITY;
        oracle::for_each_deterministic(4, 2, [&](const std::vector<int>& acts) {
            const Policy p = oracle::deterministic(acts, 2);
            best = std::max(best, flatten(m.reward).dot(oracle::power_iteration_stationary(m, p)));
        });
        const PlannerResult res = solve_planner(m, m.reward, Criterion::Average);
        CHECK(res.gain == doctest::Approx(best).epsilon(1e-7));
        CHECK(policy_value(m, stationary_distribution(m, res.policy)) == doctest::Approx(best).epsilon(1e-7));
    }
}

TEST_CASE("policy_from_occupancy reproduces discounted occupancies") {
    Rng rng(20);
    for (int trial = 0; trial < 10; ++trial) {
        const TabularMdp m = oracle::random_mdp(rng, 5, 3, 2);
        const Occupancy a = discounted_occupancy(m, oracle::random_policy(rng, 5, 3));
        const Occupancy b = discounted_occupancy(m, oracle::random_policy(rng, 5, 3));
        Occupancy mix{Criterion::Discounted, 0.3 * a.values + 0.7 * b.values};
        const Occupancy back = discounted_occupancy(m, policy_from_occupancy(m, mix));
        CHECK((back.values - mix.values).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("Monte-Carlo discounted returns agree with the occupancy value") {
    Rng rng(21);
    const TabularMdp m = oracle::random_mdp(rng, 4, 2, 1, 0.8);
    const Policy pi = oracle::random_policy(rng, 4, 2);
    const double exact = policy_value(m, discounted_occupancy(m, pi));
    const int N = 10000, H = 120;  // 0.8^120 ~ 2e-12
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < N; ++k) {
        const Trajectory tr = rollout(m, pi, H, hash64(99, k));
        double g = 0.0, w = 1.0 - m.discount;
        for (double r : tr.rewards) {
            g += w * r;
            w *= m.discount;
        }
        sum += g;
        sq += g * g;
    }
    const double mean = sum / N;
    const double se = std::sqrt((sq / N - mean * mean) / N);
    CHECK(std::abs(mean - exact) <= 2.576 * se);
}
