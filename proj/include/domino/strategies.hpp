#pragma once

#include "domino/policy_set.hpp"

#include <Eigen/Dense>

#include <string>

namespace domino {

enum class StrategyKind { DominoLagrangian, Smerl, ReverseSmerl, MultiObjective, NoDiversity };

std::string to_string(StrategyKind k);
StrategyKind parse_strategy_kind(const std::string& name);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::DominoLagrangian;
    double alpha = 0.9;  // optimality ratio
    double c_d = 0.5;    // Smerl / ReverseSmerl diversity weight
    double c_e = 0.7;    // MultiObjective extrinsic weight; diversity gets 1 - c_e

    void validate() const;
};

/// Every strategy is a linear mix w_e r_e + w_d r_d for fixed set state.
struct MixWeights {
    double extrinsic = 1.0;
    double diversity = 0.0;
};

MixWeights mix_weights(const StrategyConfig& strategy, const PolicySet& set, int i);

Eigen::MatrixXd mix(const StrategyConfig& strategy, const Eigen::MatrixXd& r_e, const Eigen::MatrixXd& r_d,
                    const PolicySet& set, int i);

}  // namespace domino
