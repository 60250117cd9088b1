#include "domino/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace domino {

namespace {

constexpr double kProbTol = 1e-9;

std::string pair_name(int s, int a) {
    std::ostringstream os;
    os << "(s=" << s << ", a=" << a << ")";
    return os.str();
}

// Lowest-index action among those within a tiny relative band of the best.
int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& q) {
    const double best = q.maxCoeff();
    const double band = 1e-10 * std::max(1.0, std::abs(best));
    for (int a = 0; a < q.size(); ++a) {
        if (q[a] >= best - band) return a;
    }
    return 0;
}

Policy greedy_policy(const Eigen::MatrixXd& q) {
    std::vector<int> actions(q.rows());
    for (int s = 0; s < q.rows(); ++s) actions[s] = greedy_action(q.row(s).transpose());
    return Policy::deterministic(actions, static_cast<int>(q.cols()));
}

// Q(s,a) = r(s,a) + beta * sum_s' P(s'|s,a) v(s')
Eigen::MatrixXd q_values(const TabularMdp& mdp, const Eigen::MatrixXd& reward,
                         const Eigen::VectorXd& v, double beta) {
    Eigen::VectorXd next = mdp.transition * v;
    Eigen::MatrixXd q(mdp.num_states, mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            q(s, a) = reward(s, a) + beta * next[mdp.index(s, a)];
    return q;
}

Eigen::VectorXd state_mass(const Eigen::VectorXd& rho, const Policy& policy, int S, int A) {
    Eigen::VectorXd d(S * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) d[s * A + a] = rho[s] * policy.probs(s, a);
    return d;
}

// Clean up round-off so the occupancy is a proper distribution.
void tidy_distribution(Eigen::VectorXd& d) {
    for (int k = 0; k < d.size(); ++k)
        if (d[k] < 0.0 && d[k] > -1e-12) d[k] = 0.0;
    const double total = d.sum();
    if (total > 0.0) d /= total;
}

struct StationaryAttempt {
    bool ok = false;
    Eigen::VectorXd rho;
    double residual = 0.0;
};

StationaryAttempt try_stationary(const Eigen::MatrixXd& p) {
    const int S = static_cast<int>(p.rows());
    Eigen::MatrixXd m = p.transpose() - Eigen::MatrixXd::Identity(S, S);
    m.row(S - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
    b[S - 1] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    lu.setThreshold(1e-11);
    StationaryAttempt out;
    if (lu.rank() < S) return out;
    out.rho = lu.solve(b);
    out.residual = (p.transpose() * out.rho - out.rho).lpNorm<Eigen::Infinity>();
    const double sum_err = std::abs(out.rho.sum() - 1.0);
    out.ok = out.residual <= kProbTol && sum_err <= kProbTol && out.rho.minCoeff() >= -1e-9;
    return out;
}

}  // namespace

std::string to_string(Criterion c) {
    return c == Criterion::Average ? "average" : "discounted";
}

Criterion parse_criterion(const std::string& name) {
    if (name == "average") return Criterion::Average;
    if (name == "discounted") return Criterion::Discounted;
    throw std::invalid_argument("unknown criterion '" + name + "' (expected average|discounted)");
}

Policy Policy::uniform(int num_states, int num_actions) {
    Policy p;
    p.probs = Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions);
    return p;
}

Policy Policy::deterministic(const std::vector<int>& actions, int num_actions) {
    Policy p;
    p.probs = Eigen::MatrixXd::Zero(static_cast<int>(actions.size()), num_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) p.probs(static_cast<int>(s), actions[s]) = 1.0;
    return p;
}

const TabularMdp& validate_mdp(const TabularMdp& mdp) {
    const int S = mdp.num_states, A = mdp.num_actions;
    if (S < 1) throw InvalidMdp("num_states must be >= 1");
    if (A < 1) throw InvalidMdp("num_actions must be >= 1");
    if (mdp.transition.rows() != S * A || mdp.transition.cols() != S)
        throw InvalidMdp("transition must be (S*A) x S");
    if (mdp.reward.rows() != S || mdp.reward.cols() != A) throw InvalidMdp("reward must be S x A");
    if (mdp.features.rows() != S * A) throw InvalidMdp("features must have S*A rows");
    if (mdp.features.cols() < 1) throw InvalidMdp("feature dimension must be >= 1");
    if (!(mdp.discount > 0.0 && mdp.discount < 1.0)) throw InvalidMdp("discount must lie in (0, 1)");
    if (mdp.initial_dist.size() != S) throw InvalidMdp("initial_dist must have S entries");

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const int row = mdp.index(s, a);
            double sum = 0.0;
            for (int t = 0; t < S; ++t) {
                const double p = mdp.transition(row, t);
                if (!std::isfinite(p) || p < 0.0) {
                    std::ostringstream os;
                    os << "transition " << pair_name(s, a) << " -> s'=" << t << " has invalid probability " << p;
                    throw InvalidMdp(os.str());
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > kProbTol) {
                std::ostringstream os;
                os << "transition row " << pair_name(s, a) << " sums to " << sum;
                throw InvalidMdp(os.str());
            }
            if (!std::isfinite(mdp.reward(s, a)))
                throw InvalidMdp("reward " + pair_name(s, a) + " is not finite");
            for (int k = 0; k < mdp.features.cols(); ++k)
                if (!std::isfinite(mdp.features(row, k)))
                    throw InvalidMdp("feature " + pair_name(s, a) + "[" + std::to_string(k) + "] is not finite");
        }
    }
    double total = 0.0;
    for (int s = 0; s < S; ++s) {
        const double p = mdp.initial_dist[s];
        if (!std::isfinite(p) || p < 0.0)
            throw InvalidMdp("initial_dist[" + std::to_string(s) + "] is invalid");
        total += p;
    }
    if (std::abs(total - 1.0) > kProbTol) {
        std::ostringstream os;
        os << "initial_dist sums to " << total;
        throw InvalidMdp(os.str());
    }
    return mdp;
}

void validate_policy(const TabularMdp& mdp, const Policy& policy) {
    if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
        throw std::invalid_argument("policy shape does not match the MDP");
    for (int s = 0; s < mdp.num_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < mdp.num_actions; ++a) {
            const double p = policy.probs(s, a);
            if (!std::isfinite(p) || p < 0.0)
                throw std::invalid_argument("policy entry " + pair_name(s, a) + " is invalid");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbTol)
            throw std::invalid_argument("policy row " + std::to_string(s) + " does not sum to 1");
    }
}

void validate_reward(const TabularMdp& mdp, const Eigen::MatrixXd& reward) {
    if (reward.rows() != mdp.num_states || reward.cols() != mdp.num_actions)
        throw std::invalid_argument("reward shape does not match the MDP");
    if (!reward.allFinite()) throw std::invalid_argument("reward has non-finite entries");
}

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const Policy& policy) {
    const int S = mdp.num_states, A = mdp.num_actions;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double w = policy.probs(s, a);
            if (w != 0.0) p.row(s) += w * mdp.transition.row(mdp.index(s, a));
        }
    return p;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    for (int s = 0; s < m.rows(); ++s)
        for (int a = 0; a < m.cols(); ++a) v[s * m.cols() + a] = m(s, a);
    return v;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, int S, int A) {
    Eigen::MatrixXd m(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) m(s, a) = flat[s * A + a];
    return m;
}

StationarySolve solve_stationary(const TabularMdp& mdp, const Policy& policy) {
    validate_policy(mdp, policy);
    const int S = mdp.num_states, A = mdp.num_actions;
    StationarySolve out;
    out.occupancy.flavor = Criterion::Average;

    StationaryAttempt att = try_stationary(policy_transition(mdp, policy));
    Policy used = policy;
    if (!att.ok) {
        constexpr double eps = 1e-6;
        used.probs = (1.0 - eps) * policy.probs + eps * Policy::uniform(S, A).probs;
        att = try_stationary(policy_transition(mdp, used));
        out.smoothed = true;
        if (!att.ok) {
            std::ostringstream os;
            os << "induced chain is not unichain (stationary system rank-deficient after smoothing, residual "
               << att.residual << ")";
            throw NotUnichain(os.str());
        }
    }
    out.residual = att.residual;
    out.occupancy.values = state_mass(att.rho, used, S, A);
    tidy_distribution(out.occupancy.values);
    return out;
}

Occupancy stationary_distribution(const TabularMdp& mdp, const Policy& policy) {
    return solve_stationary(mdp, policy).occupancy;
}

Occupancy discounted_occupancy(const TabularMdp& mdp, const Policy& policy) {
    validate_policy(mdp, policy);
    const int S = mdp.num_states, A = mdp.num_actions;
    const double g = mdp.discount;
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(S, S) - g * policy_transition(mdp, policy).transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    Eigen::VectorXd rho = lu.solve((1.0 - g) * mdp.initial_dist);
    if (!rho.allFinite()) throw SolverError("discounted flow system is singular");
    Occupancy out;
    out.flavor = Criterion::Discounted;
    out.values = state_mass(rho, policy, S, A);
    tidy_distribution(out.values);
    return out;
}

Occupancy occupancy(const TabularMdp& mdp, const Policy& policy, Criterion criterion) {
    return criterion == Criterion::Average ? stationary_distribution(mdp, policy)
                                           : discounted_occupancy(mdp, policy);
}

double policy_value(const Eigen::MatrixXd& reward, const Occupancy& occ) {
    return flatten(reward).dot(occ.values);
}

double policy_value(const TabularMdp& mdp, const Occupancy& occ) {
    return policy_value(mdp.reward, occ);
}

ExpectedFeatures expected_features(const TabularMdp& mdp, const Occupancy& occ) {
    return mdp.features.transpose() * occ.values;
}

SuccessorFeatures successor_features(const TabularMdp& mdp, const Policy& policy) {
    validate_policy(mdp, policy);
    const int S = mdp.num_states, A = mdp.num_actions, n = S * A;
    const double g = mdp.discount;
    // M[(s,a),(s',a')] = P(s'|s,a) pi(a'|s')
    Eigen::MatrixXd m(n, n);
    for (int sp = 0; sp < S; ++sp)
        for (int ap = 0; ap < A; ++ap) m.col(sp * A + ap) = mdp.transition.col(sp) * policy.probs(sp, ap);
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) - g * m;
    SuccessorFeatures sf;
    sf.values = Eigen::PartialPivLU<Eigen::MatrixXd>(lhs).solve((1.0 - g) * mdp.features);
    if (!sf.values.allFinite()) throw SolverError("successor feature system is singular");
    return sf;
}

ExpectedFeatures aggregate_successor_features(const TabularMdp& mdp, const Policy& policy,
                                              const SuccessorFeatures& sf) {
    Eigen::VectorXd w(mdp.num_pairs());
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            w[mdp.index(s, a)] = mdp.initial_dist[s] * policy.probs(s, a);
    return sf.values.transpose() * w;
}

Policy policy_from_occupancy(const TabularMdp& mdp, const Occupancy& occ, const Policy* fallback) {
    const int S = mdp.num_states, A = mdp.num_actions;
    Policy p = fallback ? *fallback : Policy::uniform(S, A);
    for (int s = 0; s < S; ++s) {
        double mass = 0.0;
        for (int a = 0; a < A; ++a) mass += std::max(0.0, occ.values[mdp.index(s, a)]);
        if (mass <= 1e-300) continue;
        for (int a = 0; a < A; ++a) p.probs(s, a) = std::max(0.0, occ.values[mdp.index(s, a)]) / mass;
    }
    return p;
}

namespace {

PlannerResult discounted_value_iteration(const TabularMdp& mdp, const Eigen::MatrixXd& reward,
                                         const PlannerOptions& opt) {
    const double g = mdp.discount;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.num_states);
    PlannerResult out;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Eigen::VectorXd next = q_values(mdp, reward, v, g).rowwise().maxCoeff();
        const double delta = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        out.iterations = it;
        if (delta <= opt.tolerance) {
            out.policy = greedy_policy(q_values(mdp, reward, v, g));
            out.values = (1.0 - g) * v;
            return out;
        }
    }
    throw SolverError("value iteration did not converge within max_iterations");
}

Eigen::VectorXd evaluate_discounted(const TabularMdp& mdp, const Eigen::MatrixXd& reward, const Policy& pi) {
    const int S = mdp.num_states;
    Eigen::VectorXd r_pi = (reward.cwiseProduct(pi.probs)).rowwise().sum();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(S, S) - mdp.discount * policy_transition(mdp, pi);
    return Eigen::PartialPivLU<Eigen::MatrixXd>(m).solve(r_pi);
}

PlannerResult discounted_policy_iteration(const TabularMdp& mdp, const Eigen::MatrixXd& reward,
                                          const PlannerOptions& opt) {
    const int S = mdp.num_states;
    const double g = mdp.discount;
    std::vector<int> actions(S, 0);
    Policy pi = Policy::deterministic(actions, mdp.num_actions);
    PlannerResult out;
    Eigen::VectorXd v;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        v = evaluate_discounted(mdp, reward, pi);
        Eigen::MatrixXd q = q_values(mdp, reward, v, g);
        bool changed = false;
        for (int s = 0; s < S; ++s) {
            const int a = greedy_action(q.row(s).transpose());
            // switch only on a real improvement so the loop cannot cycle on ties
            const double gain = q(s, a) - q(s, actions[s]);
            if (a != actions[s] && gain > 1e-12 * std::max(1.0, std::abs(q(s, a)))) {
                actions[s] = a;
                changed = true;
            }
        }
        out.iterations = it;
        pi = Policy::deterministic(actions, mdp.num_actions);
        if (!changed) {
            // canonical lowest-index choice among the optimal actions
            out.policy = greedy_policy(q);
            out.values = (1.0 - g) * v;
            return out;
        }
    }
    throw SolverError("policy iteration did not converge within max_iterations");
}

PlannerResult relative_value_iteration(const TabularMdp& mdp, const Eigen::MatrixXd& reward,
                                       const PlannerOptions& opt) {
    const int S = mdp.num_states;
    const double tau = opt.aperiodicity;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(S);
    double span = 0.0;
    PlannerResult out;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        // aperiodicity transform: P' = tau I + (1 - tau) P, same gain, same optimal policies
        Eigen::MatrixXd q = q_values(mdp, reward, h, 1.0 - tau);
        Eigen::VectorXd t = q.rowwise().maxCoeff() + tau * h;
        Eigen::VectorXd diff = t - h;
        span = diff.maxCoeff() - diff.minCoeff();
        h = t.array() - t[0];
        out.iterations = it;
        if (span <= opt.tolerance) {
            out.gain = 0.5 * (diff.maxCoeff() + diff.minCoeff());
            out.policy = greedy_policy(q_values(mdp, reward, h, 1.0 - tau));
            out.values = h * (1.0 - tau);
            return out;
        }
    }
    std::ostringstream os;
    os << "relative value iteration did not converge: span seminorm " << span << " after "
       << opt.max_iterations << " iterations";
    throw SolverError(os.str());
}

}  // namespace

PlannerResult solve_planner(const TabularMdp& mdp, const Eigen::MatrixXd& reward, Criterion criterion,
                            const PlannerOptions& options) {
    validate_reward(mdp, reward);
    if (criterion == Criterion::Average) return relative_value_iteration(mdp, reward, options);
    if (options.method == PlannerMethod::PolicyIteration) return discounted_policy_iteration(mdp, reward, options);
    return discounted_value_iteration(mdp, reward, options);
}

Policy best_response(const TabularMdp& mdp, const Eigen::MatrixXd& reward, Criterion criterion,
                     const PlannerOptions& options) {
    return solve_planner(mdp, reward, criterion, options).policy;
}

}  // namespace domino
