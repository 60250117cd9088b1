#include "domino/strategies.hpp"
#include "domino/random.hpp"

#include <doctest.h>

using namespace domino;

namespace {

PolicySet two(double v0, double v1, double mu1 = 0.0) {
    PolicySet s = init_set(2, 1, 1, 1, PolicyInit::Uniform, 0);
    s.avg_value << v0, v1;
    s.mu[1] = mu1;
    s.vstar_estimate = v0;
    return s;
}

Eigen::MatrixXd c(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

StrategyConfig strat(StrategyKind k, double alpha = 0.9, double c_d = 0.5, double c_e = 0.7) {
    StrategyConfig s;
    s.kind = k;
    s.alpha = alpha;
    s.c_d = c_d;
    s.c_e = c_e;
    return s;
}

}  // namespace

TEST_CASE("kind names round-trip") {
    for (StrategyKind k : {StrategyKind::DominoLagrangian, StrategyKind::Smerl, StrategyKind::ReverseSmerl,
                           StrategyKind::MultiObjective, StrategyKind::NoDiversity})
        CHECK(parse_strategy_kind(to_string(k)) == k);
    CHECK(to_string(StrategyKind::ReverseSmerl) == "ReverseSmerl");
    CHECK_THROWS(parse_strategy_kind("smerl"));
}

TEST_CASE("smerl") {
    const StrategyConfig s = strat(StrategyKind::Smerl);
    CHECK(mix(s, c(1), c(2), two(1, 1), 1)(0, 0) == 2.0);
    CHECK(mix(s, c(1), c(2), two(1, 0.5), 1)(0, 0) == 1.0);
}

TEST_CASE("reverse smerl") {
    const StrategyConfig s = strat(StrategyKind::ReverseSmerl);
    CHECK(mix(s, c(1), c(2), two(1, 1), 1)(0, 0) == 1.0);  // 0.5 * 2 only
    CHECK(mix(s, c(3), c(2), two(1, 0.5), 1)(0, 0) == 4.0);
}

TEST_CASE("indicator boundary: outputs change only when it flips") {
    for (StrategyKind k : {StrategyKind::Smerl, StrategyKind::ReverseSmerl}) {
        const StrategyConfig s = strat(k, 0.8);
        const double below = mix(s, c(1), c(2), two(1, 0.8 - 1e-9), 1)(0, 0);
        const double at = mix(s, c(1), c(2), two(1, 0.8), 1)(0, 0);
        const double above = mix(s, c(1), c(2), two(1, 0.95), 1)(0, 0);
        CHECK(at == above);
        CHECK(below != at);
    }
}

TEST_CASE("multi-objective and no-diversity") {
    CHECK(mix(strat(StrategyKind::MultiObjective), c(1), c(2), two(1, 1), 1)(0, 0) == doctest::Approx(0.7 + 0.6));
    CHECK(mix(strat(StrategyKind::MultiObjective, 0.9, 0.5, 1.0), c(1.25), c(9), two(1, 1), 1)(0, 0) == 1.25);
    CHECK(mix(strat(StrategyKind::Smerl, 0.9, 0.0), c(1.25), c(9), two(1, 1), 1)(0, 0) == 1.25);
    CHECK(mix(strat(StrategyKind::NoDiversity), c(1.25), c(9), two(1, 1), 1)(0, 0) == 1.25);
}

TEST_CASE("domino delegates to the bounded multiplier mix") {
    CHECK(mix(strat(StrategyKind::DominoLagrangian), c(2), c(4), two(1, 1), 1)(0, 0) == 3.0);
    CHECK(mix(strat(StrategyKind::DominoLagrangian), c(2), c(4), two(1, 1, 60.0), 1)(0, 0) ==
          doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("policy 0 is extrinsic-only under every strategy") {
    for (StrategyKind k : {StrategyKind::DominoLagrangian, StrategyKind::Smerl, StrategyKind::ReverseSmerl,
                           StrategyKind::MultiObjective, StrategyKind::NoDiversity}) {
        const MixWeights w = mix_weights(strat(k), two(1, 0.1), 0);
        CHECK(w.extrinsic == 1.0);
        CHECK(w.diversity == 0.0);
    }
}

TEST_CASE("mixers are linear in the rewards") {
    Rng rng(51);
    for (int t = 0; t < 100; ++t) {
        const StrategyKind k = static_cast<StrategyKind>(rng.below(5));
        const StrategyConfig s = strat(k, rng.uniform(), rng.uniform(), rng.uniform());
        const PolicySet set = two(rng.uniform(), rng.uniform(), 4 * rng.uniform() - 2);
        const Eigen::MatrixXd a = Eigen::MatrixXd::Random(3, 2), b = Eigen::MatrixXd::Random(3, 2);
        const Eigen::MatrixXd e = Eigen::MatrixXd::Random(3, 2), f = Eigen::MatrixXd::Random(3, 2);
        const double x = rng.uniform() * 4 - 2;
        const Eigen::MatrixXd lhs = mix(s, a + x * e, b + x * f, set, 1);
        const Eigen::MatrixXd rhs = mix(s, a, b, set, 1) + x * mix(s, e, f, set, 1);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("config validation") {
    CHECK_THROWS(strat(StrategyKind::Smerl, 1.5).validate());
    CHECK_THROWS(strat(StrategyKind::Smerl, 0.5, -1).validate());
    CHECK_THROWS(strat(StrategyKind::MultiObjective, 0.5, 0.5, 2).validate());
    CHECK_NOTHROW(strat(StrategyKind::Smerl).validate());
}
