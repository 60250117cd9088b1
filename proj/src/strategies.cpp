#include "domino/strategies.hpp"

#include <cmath>
#include <stdexcept>

namespace domino {

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::DominoLagrangian: return "DominoLagrangian";
        case StrategyKind::Smerl: return "Smerl";
        case StrategyKind::ReverseSmerl: return "ReverseSmerl";
        case StrategyKind::MultiObjective: return "MultiObjective";
        case StrategyKind::NoDiversity: return "NoDiversity";
    }
    return "?";
}

StrategyKind parse_strategy_kind(const std::string& name) {
    if (name == "DominoLagrangian") return StrategyKind::DominoLagrangian;
    if (name == "Smerl") return StrategyKind::Smerl;
    if (name == "ReverseSmerl") return StrategyKind::ReverseSmerl;
    if (name == "MultiObjective") return StrategyKind::MultiObjective;
    if (name == "NoDiversity") return StrategyKind::NoDiversity;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

void StrategyConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(c_d >= 0.0 && std::isfinite(c_d))) throw std::invalid_argument("c_d must be >= 0");
    if (!(c_e >= 0.0 && c_e <= 1.0)) throw std::invalid_argument("c_e must lie in [0, 1]");
}

MixWeights mix_weights(const StrategyConfig& st, const PolicySet& set, int i) {
    if (i == 0) return {1.0, 0.0};
    switch (st.kind) {
        case StrategyKind::DominoLagrangian: {
            const double w = set.weight(i);
            return {w, 1.0 - w};
        }
        case StrategyKind::Smerl: {
            const bool violated = constraint_indicator(set, i, st.alpha);
            return {1.0, violated ? 0.0 : st.c_d};
        }
        case StrategyKind::ReverseSmerl: {
            const bool violated = constraint_indicator(set, i, st.alpha);
            return {violated ? 1.0 : 0.0, st.c_d};
        }
        case StrategyKind::MultiObjective: return {st.c_e, 1.0 - st.c_e};
        case StrategyKind::NoDiversity: return {1.0, 0.0};
    }
    return {1.0, 0.0};
}

Eigen::MatrixXd mix(const StrategyConfig& st, const Eigen::MatrixXd& r_e, const Eigen::MatrixXd& r_d,
                    const PolicySet& set, int i) {
    const MixWeights w = mix_weights(st, set, i);
    // skip exact-zero terms so the reductions to r_e are bit-exact
    if (w.diversity == 0.0) return w.extrinsic == 1.0 ? r_e : Eigen::MatrixXd(w.extrinsic * r_e);
    if (w.extrinsic == 0.0) return w.diversity * r_d;
    return w.extrinsic * r_e + w.diversity * r_d;
}

}  // namespace domino
