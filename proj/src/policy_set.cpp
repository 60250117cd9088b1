#include "domino/policy_set.hpp"

#include "domino/random.hpp"

#include <cmath>
#include <stdexcept>

namespace domino {

void MovingAverageConfig::validate() const {
    if (!(value_decay >= 0.0 && value_decay < 1.0)) throw std::invalid_argument("value_decay must lie in [0, 1)");
    if (!(feature_decay >= 0.0 && feature_decay < 1.0))
        throw std::invalid_argument("feature_decay must lie in [0, 1)");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sigmoid_derivative(double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double PolicySet::weight(int i) const {
    if (i == 0 && first_pinned) return 1.0;
    return sigmoid(mu[i]);
}

PolicySet init_set(int n, int d, int S, int A, PolicyInit init, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("set size must be >= 1");
    if (d < 1) throw std::invalid_argument("feature dimension must be >= 1");
    PolicySet set;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        Policy p = Policy::uniform(S, A);
        if (init == PolicyInit::UniformRandom)
            for (int s = 0; s < S; ++s) p.probs.row(s) = rng.flat_dirichlet(A).transpose();
        set.policies.push_back(std::move(p));
    }
    set.mu = Eigen::VectorXd::Constant(n, logit(0.5));
    set.avg_value = Eigen::VectorXd::Zero(n);
    set.avg_psi = Eigen::MatrixXd::Constant(n, d, 1.0 / d);
    return set;
}

void update_moving_averages(PolicySet& set, int i, const std::vector<double>& rewards,
                            const Eigen::MatrixXd& features, const MovingAverageConfig& cfg) {
    if (rewards.empty() || features.rows() == 0) throw std::invalid_argument("episode is empty");
    if (features.cols() != set.avg_psi.cols()) throw std::invalid_argument("feature dimension mismatch");
    double mean_r = 0.0;
    for (double r : rewards) mean_r += r;
    mean_r /= static_cast<double>(rewards.size());
    const Eigen::RowVectorXd mean_phi = features.colwise().mean();
    set.avg_value[i] = cfg.value_decay * set.avg_value[i] + (1.0 - cfg.value_decay) * mean_r;
    set.avg_psi.row(i) = cfg.feature_decay * set.avg_psi.row(i) + (1.0 - cfg.feature_decay) * mean_phi;
}

Eigen::MatrixXd combined_reward(const Eigen::MatrixXd& r_e, const Eigen::MatrixXd& r_d, const PolicySet& set,
                                int i) {
    if (i == 0 && set.first_pinned) return r_e;
    const double w = sigmoid(set.mu[i]);
    return w * r_e + (1.0 - w) * r_d;
}

double lagrange_gradient(const PolicySet& set, int i, double alpha) {
    return sigmoid_derivative(set.mu[i]) * (set.avg_value[i] - alpha * set.vstar_estimate);
}

void lagrange_step(PolicySet& set, double alpha, double lr) {
    for (int i = 0; i < set.size(); ++i) {
        if (i == 0 && set.first_pinned) continue;
        set.mu[i] -= lr * lagrange_gradient(set, i, alpha);
    }
}

bool constraint_indicator(const PolicySet& set, int i, double alpha) {
    return set.avg_value[i] < alpha * set.vstar_estimate;
}

LagrangeAdam::LagrangeAdam(int n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void LagrangeAdam::step(PolicySet& set, double alpha) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (int i = 0; i < set.size(); ++i) {
        if (i == 0 && set.first_pinned) continue;
        const double g = lagrange_gradient(set, i, alpha);
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        set.mu[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

}  // namespace domino
