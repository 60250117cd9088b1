#pragma once

#include "domino/mdp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace domino {

struct MovingAverageConfig {
    double value_decay = 0.9;
    double feature_decay = 0.99;

    void validate() const;
};

enum class PolicyInit {
    UniformRandom,  // each row drawn from a flat Dirichlet
    Uniform,
};

struct PolicySet {
    std::vector<Policy> policies;
    Eigen::VectorXd mu;          // raw multipliers, pre-sigmoid
    bool first_pinned = true;    // policy 0 is extrinsic-only; mu[0] is ignored
    Eigen::VectorXd avg_value;   // moving-average extrinsic value per policy
    Eigen::MatrixXd avg_psi;     // n x d moving-average expected features
    double vstar_estimate = 0.0;

    int size() const { return static_cast<int>(policies.size()); }
    int feature_dim() const { return static_cast<int>(avg_psi.cols()); }

    /// Weight on the extrinsic reward in the Lagrangian mix: 1 for the pinned
    /// first policy, sigmoid(mu_i) otherwise.
    double weight(int i) const;
};

double sigmoid(double x);
double sigmoid_derivative(double x);
double logit(double p);

PolicySet init_set(int n, int d, int num_states, int num_actions, PolicyInit init, std::uint64_t seed);

/// x <- decay * x + (1 - decay) * mean over the episode, for the value
/// (rewards) and the expected features (rows of `features`, T x d).
void update_moving_averages(PolicySet& set, int i, const std::vector<double>& rewards,
                            const Eigen::MatrixXd& features, const MovingAverageConfig& cfg);

/// sigma(mu_i) r_e + (1 - sigma(mu_i)) r_d; policy 0 gets r_e unchanged.
Eigen::MatrixXd combined_reward(const Eigen::MatrixXd& r_e, const Eigen::MatrixXd& r_d, const PolicySet& set,
                                int i);

/// Gradient of the multiplier loss sigma(mu_i) (v_i - alpha v*) w.r.t. mu_i.
double lagrange_gradient(const PolicySet& set, int i, double alpha);

/// One plain gradient-descent step on every unpinned multiplier.
void lagrange_step(PolicySet& set, double alpha, double lr);

/// True iff v_i < alpha * v*.
bool constraint_indicator(const PolicySet& set, int i, double alpha);

/// Adam on the same multiplier loss.
class LagrangeAdam {
public:
    explicit LagrangeAdam(int n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(PolicySet& set, double alpha);

private:
    double lr_, beta1_, beta2_, eps_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

}  // namespace domino
