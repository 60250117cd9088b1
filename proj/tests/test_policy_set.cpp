#include "domino/policy_set.hpp"
#include "domino/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace domino;

namespace {

PolicySet frozen(std::vector<double> values, std::vector<double> mu) {
    PolicySet s = init_set(static_cast<int>(values.size()), 2, 2, 2, PolicyInit::Uniform, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        s.avg_value[i] = values[i];
        s.mu[i] = mu[i];
    }
    s.vstar_estimate = values[0];
    return s;
}

}  // namespace

TEST_CASE("init_set") {
    const PolicySet s = init_set(3, 2, 4, 3, PolicyInit::UniformRandom, 7);
    CHECK(s.size() == 3);
    CHECK(s.first_pinned);
    CHECK(s.mu[1] == 0.0);
    CHECK(s.mu[2] == 0.0);
    CHECK(s.weight(0) == 1.0);
    CHECK(s.weight(1) == 0.5);
    CHECK(s.avg_psi.rows() == 3);
    CHECK((s.avg_psi.array() == 0.5).all());
    CHECK((s.avg_value.array() == 0.0).all());
    for (const Policy& p : s.policies) {
        CHECK(p.probs.rows() == 4);
        CHECK((p.probs.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
    CHECK(init_set(1, 3, 2, 2, PolicyInit::Uniform, 0).size() == 1);
    CHECK_THROWS(init_set(0, 3, 2, 2, PolicyInit::Uniform, 0));

    // same seed, same draws; different seeds, different draws
    const PolicySet t = init_set(3, 2, 4, 3, PolicyInit::UniformRandom, 7);
    CHECK(t.policies[2].probs == s.policies[2].probs);
    CHECK(init_set(3, 2, 4, 3, PolicyInit::UniformRandom, 8).policies[2].probs != s.policies[2].probs);
}

TEST_CASE("moving averages") {
    PolicySet s = init_set(2, 1, 2, 2, PolicyInit::Uniform, 0);
    s.avg_psi.setZero();
    MovingAverageConfig none{0.0, 0.0};
    update_moving_averages(s, 1, {1.0, 3.0}, Eigen::MatrixXd::Constant(2, 1, 4.0), none);
    CHECK(s.avg_value[1] == 2.0);
    CHECK(s.avg_psi(1, 0) == 4.0);

    PolicySet t = init_set(2, 1, 2, 2, PolicyInit::Uniform, 0);
    t.avg_psi.setZero();
    const MovingAverageConfig cfg{0.9, 0.99};
    update_moving_averages(t, 0, {1.0}, Eigen::MatrixXd::Ones(1, 1), cfg);
    CHECK(t.avg_value[0] == doctest::Approx(0.1).epsilon(1e-15));
    // closed form after k updates with constant mean m: m (1 - decay^k)
    for (int k = 2; k <= 50; ++k) {
        update_moving_averages(t, 0, {1.0}, Eigen::MatrixXd::Ones(1, 1), cfg);
        CHECK(t.avg_value[0] == doctest::Approx(1.0 - std::pow(0.9, k)).epsilon(1e-12));
        CHECK(t.avg_psi(0, 0) == doctest::Approx(1.0 - std::pow(0.99, k)).epsilon(1e-12));
    }
    CHECK_THROWS(update_moving_averages(t, 0, {}, Eigen::MatrixXd(0, 1), cfg));
    CHECK_THROWS(MovingAverageConfig{1.0, 0.5}.validate());
}

TEST_CASE("moving averages stay inside the hull of episode means") {
    Rng rng(41);
    PolicySet s = init_set(1, 1, 1, 1, PolicyInit::Uniform, 0);
    s.avg_value[0] = 0.5;
    for (int k = 0; k < 200; ++k) {
        const double m = rng.uniform();
        update_moving_averages(s, 0, {m}, Eigen::MatrixXd::Constant(1, 1, m), {0.9, 0.5});
        CHECK(s.avg_value[0] >= 0.0);
        CHECK(s.avg_value[0] <= 1.0);
    }
}

TEST_CASE("combined reward") {
    PolicySet s = frozen({1, 1}, {0, 0});
    const Eigen::MatrixXd re = Eigen::MatrixXd::Constant(2, 2, 2.0), rd = Eigen::MatrixXd::Constant(2, 2, 4.0);
    CHECK(combined_reward(re, rd, s, 0) == re);
    CHECK(combined_reward(re, rd, s, 1)(0, 0) == 3.0);
    s.mu[1] = 50.0;
    CHECK((combined_reward(re, rd, s, 1) - re).cwiseAbs().maxCoeff() <= 1e-12);
    // a huge mu[0] changes nothing: pinning is a flag
    s.mu[0] = -1e9;
    CHECK(combined_reward(re, rd, s, 0) == re);
}

TEST_CASE("sigmoid stays strictly inside (0, 1) for moderate multipliers") {
    for (double x = -30; x <= 30; x += 0.5) {
        CHECK(sigmoid(x) > 0.0);
        CHECK(sigmoid(x) < 1.0);
        CHECK(sigmoid_derivative(x) == doctest::Approx(sigmoid(x) * (1 - sigmoid(x))));
    }
    CHECK(logit(0.5) == 0.0);
    CHECK(sigmoid(logit(0.3)) == doctest::Approx(0.3));
}

TEST_CASE("lagrange step arithmetic and signs") {
    PolicySet s = frozen({1.0, 0.9 - 1.0, 0.5}, {0, 0, 0});
    // v_1 - 0.9 v_0 = -1
    lagrange_step(s, 0.9, 1e-3);
    CHECK(s.mu[1] == doctest::Approx(2.5e-4).epsilon(1e-12));
    CHECK(s.mu[0] == 0.0);

    Rng rng(42);
    for (int t = 0; t < 500; ++t) {
        const double v0 = 2.0 * rng.uniform() - 0.5, alpha = rng.uniform();
        const double vi = 2.0 * rng.uniform() - 0.5, mu = 6.0 * rng.uniform() - 3.0;
        PolicySet p = frozen({v0, vi}, {mu, mu});
        const double want = alpha * v0 - vi;
        if (want == 0.0) continue;
        lagrange_step(p, alpha, 0.1);
        CHECK(p.mu[0] == mu);
        CHECK((p.mu[1] - mu > 0) == (want > 0));
        CHECK(p.mu[1] != mu);
    }
}

TEST_CASE("adam multiplier steps follow the same sign on the first step") {
    PolicySet s = frozen({1.0, 0.2, 1.5}, {0, 0, 0});
    LagrangeAdam adam(3, 1e-3);
    adam.step(s, 0.9);
    CHECK(s.mu[0] == 0.0);
    CHECK(s.mu[1] > 0.0);
    CHECK(s.mu[2] < 0.0);
}

TEST_CASE("constraint indicator") {
    CHECK_FALSE(constraint_indicator(frozen({1, 1}, {0, 0}), 1, 0.9));
    CHECK(constraint_indicator(frozen({1, 0.5}, {0, 0}), 1, 0.9));
    CHECK_FALSE(constraint_indicator(frozen({1, 0.75}, {0, 0}), 1, 0.75));
}
