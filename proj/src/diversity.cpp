#include "domino/diversity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace domino {

namespace {

void require_pairs(const FeatureSet& psis) {
    if (psis.rows() < 2) throw std::invalid_argument("diversity needs at least two policies");
}

// Every kind reduces to c(l) = k * [(1-a)(l/l0)^pr - a(l/l0)^pa] / (D or 1).
struct Force {
    double a = 0.0;
    double pr = 0.0;
    double pa = 3.0;
    double l0 = 1.0;
    double k = 1.0;
    bool per_dim = false;
};

Force force_of(const DiversityConfig& cfg) {
    Force f;
    const bool coefficient_form = cfg.scaling == RewardScaling::AppendixCode;
    f.per_dim = coefficient_form;
    switch (cfg.kind) {
        case DiversityKind::Repulsive:
            f.a = 0.0;
            f.pr = 0.0;
            break;
        case DiversityKind::VanDerWaals:
            f.a = 0.5;
            f.pr = 0.0;
            f.pa = 3.0;
            f.l0 = cfg.contact_distance;
            f.k = coefficient_form ? 1.0 : 2.0;
            break;
        case DiversityKind::Generalized:
            f.a = cfg.attractive_coeff;
            f.pr = cfg.repulsive_power;
            f.pa = cfg.attractive_power;
            f.l0 = cfg.contact_distance;
            break;
    }
    return f;
}

double scaled_power(double l, double l0, double p) {
    if (p == 0.0) return 1.0;
    return std::pow(l / l0, p);
}

}  // namespace

std::string to_string(DiversityKind k) {
    switch (k) {
        case DiversityKind::Repulsive: return "Repulsive";
        case DiversityKind::VanDerWaals: return "VanDerWaals";
        case DiversityKind::Generalized: return "Generalized";
    }
    return "?";
}

std::string to_string(RewardScaling s) {
    return s == RewardScaling::PaperExact ? "PaperExact" : "AppendixCode";
}

DiversityKind parse_diversity_kind(const std::string& name) {
    if (name == "Repulsive") return DiversityKind::Repulsive;
    if (name == "VanDerWaals") return DiversityKind::VanDerWaals;
    if (name == "Generalized") return DiversityKind::Generalized;
    throw std::invalid_argument("unknown diversity kind '" + name + "'");
}

RewardScaling parse_reward_scaling(const std::string& name) {
    if (name == "PaperExact") return RewardScaling::PaperExact;
    if (name == "AppendixCode") return RewardScaling::AppendixCode;
    throw std::invalid_argument("unknown reward scaling '" + name + "'");
}

void DiversityConfig::validate() const {
    if (kind != DiversityKind::Repulsive && !(contact_distance > 0.0 && std::isfinite(contact_distance)))
        throw std::invalid_argument("contact_distance must be > 0");
    if (kind == DiversityKind::Generalized) {
        if (!(attractive_coeff >= 0.0 && attractive_coeff <= 1.0))
            throw std::invalid_argument("attractive_coeff must lie in [0, 1]");
        if (!(attractive_power > repulsive_power))
            throw std::invalid_argument("attractive_power must exceed repulsive_power");
        // keeps the potential l^(p+2) finite at l = 0
        if (!(repulsive_power > -2.0)) throw std::invalid_argument("repulsive_power must be > -2");
    }
}

Nearest nearest_index(const FeatureSet& psis, int i) {
    require_pairs(psis);
    if (i < 0 || i >= psis.rows()) throw std::out_of_range("policy index out of range");
    Nearest best;
    double best_sq = std::numeric_limits<double>::infinity();
    for (int j = 0; j < psis.rows(); ++j) {
        if (j == i) continue;
        const double sq = (psis.row(i) - psis.row(j)).squaredNorm();
        if (sq < best_sq) {
            best_sq = sq;
            best.index = j;
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

double repulsive_objective(const FeatureSet& psis) {
    require_pairs(psis);
    double total = 0.0;
    for (int i = 0; i < psis.rows(); ++i) {
        const double l = nearest_index(psis, i).distance;
        total += 0.5 * l * l;
    }
    return total;
}

double vdw_objective(const FeatureSet& psis, double l0) {
    require_pairs(psis);
    if (!(l0 > 0.0)) throw std::invalid_argument("contact_distance must be > 0");
    double total = 0.0;
    for (int i = 0; i < psis.rows(); ++i) {
        const double l = nearest_index(psis, i).distance;
        total += 0.5 * l * l - 0.2 * std::pow(l, 5) / (l0 * l0 * l0);
    }
    return total;
}

double force_coefficient(double l, int feature_dim, const DiversityConfig& cfg) {
    const Force f = force_of(cfg);
    if (l == 0.0 && f.pr < 0.0) return 0.0;  // 0 * inf: the difference vector is zero anyway
    double c = (1.0 - f.a) * scaled_power(l, f.l0, f.pr) - f.a * scaled_power(l, f.l0, f.pa);
    c *= f.k;
    if (f.per_dim) c /= feature_dim;
    return c;
}

double policy_potential(double l, int feature_dim, const DiversityConfig& cfg) {
    const Force f = force_of(cfg);
    // F'(l) = l * c(l), so grad_psi F = c(l) (psi_i - psi_j)
    const double rep = (1.0 - f.a) * std::pow(l, f.pr + 2.0) / ((f.pr + 2.0) * std::pow(f.l0, f.pr));
    const double att = f.a * std::pow(l, f.pa + 2.0) / ((f.pa + 2.0) * std::pow(f.l0, f.pa));
    double v = f.k * (rep - att);
    if (f.per_dim) v /= feature_dim;
    return v;
}

double diversity_objective(const FeatureSet& psis, const DiversityConfig& cfg) {
    require_pairs(psis);
    const int d = static_cast<int>(psis.cols());
    double total = 0.0;
    for (int i = 0; i < psis.rows(); ++i) total += policy_potential(nearest_index(psis, i).distance, d, cfg);
    return total;
}

Eigen::VectorXd reward_direction(const FeatureSet& psis, int i, const DiversityConfig& cfg) {
    const Nearest nn = nearest_index(psis, i);
    Eigen::VectorXd diff = (psis.row(i) - psis.row(nn.index)).transpose();
    if (nn.distance == 0.0) return Eigen::VectorXd::Zero(psis.cols());
    return force_coefficient(nn.distance, static_cast<int>(psis.cols()), cfg) * diff;
}

Eigen::VectorXd diversity_reward_flat(const Eigen::MatrixXd& features, const FeatureSet& psis, int i,
                                      const DiversityConfig& cfg) {
    if (features.cols() != psis.cols()) throw std::invalid_argument("feature dimension mismatch");
    return features * reward_direction(psis, i, cfg);
}

Eigen::MatrixXd diversity_reward(const TabularMdp& mdp, const FeatureSet& psis, int i,
                                 const DiversityConfig& cfg) {
    return unflatten(diversity_reward_flat(mdp.features, psis, i, cfg), mdp.num_states, mdp.num_actions);
}

DiversityScore diversity_score(const FeatureSet& psis) {
    require_pairs(psis);
    DiversityScore out;
    out.per_policy.resize(psis.rows());
    for (int i = 0; i < psis.rows(); ++i) out.per_policy[i] = nearest_index(psis, i).distance;
    out.sum = out.per_policy.sum();
    out.mean = out.sum / static_cast<double>(psis.rows());
    return out;
}

}  // namespace domino
