#pragma once

#include "domino/mdp.hpp"

#include <Eigen/Dense>

#include <string>

namespace domino {

enum class DiversityKind { Repulsive, VanDerWaals, Generalized };

/// PaperExact uses the closed-form rewards. AppendixCode uses the coefficient
/// (1-a)(l/l0)^pr - a(l/l0)^pa and divides the reward by the feature
/// dimension. For VanDerWaals the two differ by a factor of two, kept visible.
enum class RewardScaling { PaperExact, AppendixCode };

std::string to_string(DiversityKind k);
std::string to_string(RewardScaling s);
DiversityKind parse_diversity_kind(const std::string& name);
RewardScaling parse_reward_scaling(const std::string& name);

struct DiversityConfig {
    DiversityKind kind = DiversityKind::Repulsive;
    double contact_distance = 1.0;  // l0
    double attractive_power = 3.0;
    double repulsive_power = 0.0;
    double attractive_coeff = 0.5;
    RewardScaling scaling = RewardScaling::PaperExact;

    void validate() const;
};

/// One row per policy.
using FeatureSet = Eigen::MatrixXd;

struct Nearest {
    int index = -1;
    double distance = 0.0;
};

/// Nearest other row to row i; ties go to the lowest index.
Nearest nearest_index(const FeatureSet& psis, int i);

double repulsive_objective(const FeatureSet& psis);
double vdw_objective(const FeatureSet& psis, double contact_distance);

/// Set objective whose per-policy gradient is the reward produced by
/// diversity_reward under the same config: sum_i F(l_i).
double diversity_objective(const FeatureSet& psis, const DiversityConfig& cfg);

/// The per-policy potential F(l) used by diversity_objective.
double policy_potential(double distance, int feature_dim, const DiversityConfig& cfg);

/// Force coefficient c(l) multiplying (psi_i - psi_j*) in the reward,
/// including any scaling by feature dimension.
double force_coefficient(double distance, int feature_dim, const DiversityConfig& cfg);

/// Vector w with r_d(s,a) = phi(s,a) . w for policy i.
Eigen::VectorXd reward_direction(const FeatureSet& psis, int i, const DiversityConfig& cfg);

/// Diversity reward table (S x A) for policy i.
Eigen::MatrixXd diversity_reward(const TabularMdp& mdp, const FeatureSet& psis, int i,
                                 const DiversityConfig& cfg);

/// Same, against a bare (S*A) x d feature matrix.
Eigen::VectorXd diversity_reward_flat(const Eigen::MatrixXd& features, const FeatureSet& psis, int i,
                                      const DiversityConfig& cfg);

struct DiversityScore {
    double mean = 0.0;
    double sum = 0.0;
    Eigen::VectorXd per_policy;  // nearest-neighbour distance l_i
};

DiversityScore diversity_score(const FeatureSet& psis);

}  // namespace domino
