#include "domino/envs.hpp"

#include "domino/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace domino {

namespace {

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

std::string cell_name(const Cell& c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; }

bool inside(const GridSpec& g, const Cell& c) { return c.row >= 0 && c.row < g.height && c.col >= 0 && c.col < g.width; }

double goal_distance(const GridSpec& g, const Cell& c) {
    if (g.goal_cells.empty()) return 0.0;
    int best = g.width + g.height;
    for (const auto& [goal, r] : g.goal_cells)
        best = std::min(best, std::abs(goal.row - c.row) + std::abs(goal.col - c.col));
    const int scale = std::max(1, g.width + g.height - 2);
    return static_cast<double>(best) / scale;
}

Eigen::MatrixXd grid_features(const GridSpec& g, const GridLayout& lay, int A) {
    const int S = static_cast<int>(lay.cells.size());
    int d = 0;
    switch (g.feature_kind) {
        case FeatureKind::OneHotState: d = S; break;
        case FeatureKind::XYCoordinates: d = 2; break;
        case FeatureKind::XYPlusGoalDistance: d = 3; break;
    }
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(S * A, d);
    for (int s = 0; s < S; ++s) {
        const Cell c = lay.cells[s];
        Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(d);
        if (g.feature_kind == FeatureKind::OneHotState) {
            f[s] = 1.0;
        } else {
            f[0] = g.width > 1 ? static_cast<double>(c.col) / (g.width - 1) : 0.0;
            f[1] = g.height > 1 ? static_cast<double>(c.row) / (g.height - 1) : 0.0;
            if (g.feature_kind == FeatureKind::XYPlusGoalDistance) f[2] = goal_distance(g, c);
        }
        for (int a = 0; a < A; ++a) phi.row(s * A + a) = f;
    }
    return phi;
}

}  // namespace

std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::OneHotState: return "OneHotState";
        case FeatureKind::XYCoordinates: return "XYCoordinates";
        case FeatureKind::XYPlusGoalDistance: return "XYPlusGoalDistance";
    }
    return "?";
}

FeatureKind parse_feature_kind(const std::string& name) {
    if (name == "OneHotState") return FeatureKind::OneHotState;
    if (name == "XYCoordinates") return FeatureKind::XYCoordinates;
    if (name == "XYPlusGoalDistance") return FeatureKind::XYPlusGoalDistance;
    throw std::invalid_argument("unknown feature kind '" + name + "'");
}

void GridSpec::validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("grid width and height must be >= 1");
    if (!(slip_prob >= 0.0 && slip_prob <= 1.0)) throw std::invalid_argument("slip_prob must lie in [0, 1]");
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
    for (const Cell& w : walls)
        if (!inside(*this, w)) throw std::invalid_argument("wall " + cell_name(w) + " is outside the grid");
    if (!inside(*this, start)) throw std::invalid_argument("start " + cell_name(start) + " is outside the grid");
    if (walls.count(start)) throw std::invalid_argument("start " + cell_name(start) + " is a wall");
    for (const auto& [g, r] : goal_cells) {
        if (!inside(*this, g)) throw std::invalid_argument("goal " + cell_name(g) + " is outside the grid");
        if (walls.count(g)) throw std::invalid_argument("goal " + cell_name(g) + " is a wall");
        if (!std::isfinite(r)) throw std::invalid_argument("goal " + cell_name(g) + " has a non-finite reward");
    }
}

GridLayout grid_layout(const GridSpec& spec) {
    GridLayout lay;
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c) {
            const Cell cell{r, c};
            if (spec.walls.count(cell)) continue;
            lay.state_of[cell] = static_cast<int>(lay.cells.size());
            lay.cells.push_back(cell);
        }
    return lay;
}

TabularMdp build_gridworld(const GridSpec& spec, const std::set<Cell>& blocked) {
    spec.validate();
    const GridLayout lay = grid_layout(spec);
    const int S = static_cast<int>(lay.cells.size()), A = 4;
    TabularMdp mdp;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.discount = spec.discount;

    // deterministic successor of each (s, a), then mix in the slip
    std::vector<int> next(S * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const Cell c = lay.cells[s];
            const Cell to{c.row + kDr[a], c.col + kDc[a]};
            const bool open = inside(spec, to) && !spec.walls.count(to) && !blocked.count(to);
            next[s * A + a] = open ? lay.state_of.at(to) : s;
        }
    mdp.transition = Eigen::MatrixXd::Zero(S * A, S);
    const double p = spec.slip_prob;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            mdp.transition(s * A + a, next[s * A + a]) += 1.0 - p;
            if (p > 0.0)
                for (int b = 0; b < A; ++b) mdp.transition(s * A + a, next[s * A + b]) += p / A;
        }

    mdp.reward = Eigen::MatrixXd::Zero(S, A);
    for (const auto& [g, r] : spec.goal_cells) mdp.reward.row(lay.state_of.at(g)).setConstant(r);
    mdp.features = grid_features(spec, lay, A);
    mdp.initial_dist = Eigen::VectorXd::Zero(S);
    mdp.initial_dist[lay.state_of.at(spec.start)] = 1.0;
    validate_mdp(mdp);
    return mdp;
}

GridSpec four_rooms(int size) {
    if (size < 5) throw std::invalid_argument("four_rooms needs size >= 5");
    GridSpec g;
    g.width = g.height = size;
    const int mid = size / 2;
    const int door_a = mid / 2, door_b = mid + (size - mid) / 2;
    for (int k = 0; k < size; ++k) {
        if (k != door_a && k != door_b) {
            g.walls.insert({mid, k});
            g.walls.insert({k, mid});
        }
    }
    g.walls.insert({mid, mid});
    g.start = {0, 0};
    return g;
}

std::string to_string(ChainFeature k) { return k == ChainFeature::Position ? "Position" : "OneHot"; }

ChainFeature parse_chain_feature(const std::string& name) {
    if (name == "Position") return ChainFeature::Position;
    if (name == "OneHot") return ChainFeature::OneHot;
    throw std::invalid_argument("unknown chain feature '" + name + "'");
}

void ChainSpec::validate() const {
    if (length < 2) throw std::invalid_argument("chain length must be >= 2");
    if (!(slip_prob >= 0.0 && slip_prob <= 1.0)) throw std::invalid_argument("slip_prob must lie in [0, 1]");
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
    if (start < -1 || start >= length) throw std::invalid_argument("chain start out of range");
}

TabularMdp build_chain(const ChainSpec& spec) {
    spec.validate();
    const int S = spec.length, A = 3;
    TabularMdp mdp;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.discount = spec.discount;
    mdp.transition = Eigen::MatrixXd::Zero(S * A, S);
    auto move = [&](int s, int a) { return std::clamp(s + a - 1, 0, S - 1); };
    const double p = spec.slip_prob;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            mdp.transition(s * A + a, move(s, a)) += 1.0 - p;
            if (p > 0.0)
                for (int b = 0; b < A; ++b) mdp.transition(s * A + a, move(s, b)) += p / A;
        }
    mdp.reward = Eigen::MatrixXd::Zero(S, A);
    mdp.reward.row(0).array() += spec.left_reward;
    mdp.reward.row(S - 1).array() += spec.right_reward;
    const int d = spec.feature == ChainFeature::Position ? 1 : S;
    mdp.features = Eigen::MatrixXd::Zero(S * A, d);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            if (spec.feature == ChainFeature::Position)
                mdp.features(s * A + a, 0) = s;
            else
                mdp.features(s * A + a, s) = 1.0;
        }
    mdp.initial_dist = Eigen::VectorXd::Zero(S);
    mdp.initial_dist[spec.start < 0 ? S / 2 : spec.start] = 1.0;
    validate_mdp(mdp);
    return mdp;
}

TabularMdp build_chain(int length, ChainFeature feature) {
    ChainSpec spec;
    spec.length = length;
    spec.feature = feature;
    return build_chain(spec);
}

Environment make_environment(const GridSpec& spec) { return {build_gridworld(spec), spec, std::nullopt}; }
Environment make_environment(const ChainSpec& spec) { return {build_chain(spec), std::nullopt, spec}; }
Environment make_environment(const TabularMdp& mdp) { return {validate_mdp(mdp), std::nullopt, std::nullopt}; }

std::string to_string(PerturbationKind k) {
    switch (k) {
        case PerturbationKind::ActionFailure: return "ActionFailure";
        case PerturbationKind::SlipIncrease: return "SlipIncrease";
        case PerturbationKind::BlockCells: return "BlockCells";
        case PerturbationKind::RewardShift: return "RewardShift";
        case PerturbationKind::ActionRemap: return "ActionRemap";
    }
    return "?";
}

PerturbationKind parse_perturbation_kind(const std::string& name) {
    if (name == "ActionFailure") return PerturbationKind::ActionFailure;
    if (name == "SlipIncrease") return PerturbationKind::SlipIncrease;
    if (name == "BlockCells") return PerturbationKind::BlockCells;
    if (name == "RewardShift") return PerturbationKind::RewardShift;
    if (name == "ActionRemap") return PerturbationKind::ActionRemap;
    throw std::invalid_argument("unknown perturbation kind '" + name + "'");
}

void Schedule::validate() const {
    if (kind == Kind::Always) return;
    if (period < 1) throw std::invalid_argument("schedule period must be >= 1");
    if (duration < 1 || duration > period) throw std::invalid_argument("schedule duration must lie in [1, period]");
    if (start < 0 || start >= period) throw std::invalid_argument("schedule start must lie in [0, period)");
}

void Perturbation::validate(int num_actions) const {
    if (!(magnitude >= 0.0 && magnitude <= 1.0)) throw std::invalid_argument("magnitude must lie in [0, 1]");
    schedule.validate();
    if (schedule.kind == Schedule::Kind::Periodic && kind != PerturbationKind::ActionFailure)
        throw std::invalid_argument("periodic schedules apply to ActionFailure only");
    for (int a : actions)
        if (a < 0 || a >= num_actions) throw std::invalid_argument("perturbed action out of range");
    if (noop_action && (*noop_action < 0 || *noop_action >= num_actions))
        throw std::invalid_argument("noop_action out of range");
}

std::vector<bool> reachable_states(const TabularMdp& mdp) {
    const int S = mdp.num_states, A = mdp.num_actions;
    std::vector<bool> seen(S, false);
    std::deque<int> queue;
    for (int s = 0; s < S; ++s)
        if (mdp.initial_dist[s] > 0.0) {
            seen[s] = true;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        const int s = queue.front();
        queue.pop_front();
        for (int a = 0; a < A; ++a)
            for (int t = 0; t < S; ++t)
                if (!seen[t] && mdp.transition(s * A + a, t) > 0.0) {
                    seen[t] = true;
                    queue.push_back(t);
                }
    }
    return seen;
}

namespace {

std::vector<int> identity_states(int S) {
    std::vector<int> v(S);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (int k = static_cast<int>(v.size()) - 1; k > 0; --k) std::swap(v[k], v[rng.below(k + 1)]);
}

void require_goal_reachable(const TabularMdp& mdp) {
    const double best = mdp.reward.maxCoeff();
    if (!(best > 0.0)) return;
    const std::vector<bool> seen = reachable_states(mdp);
    for (int s = 0; s < mdp.num_states; ++s)
        if (seen[s] && mdp.reward.row(s).maxCoeff() > 0.0) return;
    throw PerturbationInfeasible("perturbation leaves no rewarding state reachable from the start");
}

bool failing_action(const Perturbation& p, int a) {
    return p.actions.empty() || std::find(p.actions.begin(), p.actions.end(), a) != p.actions.end();
}

Eigen::RowVectorXd failed_row(const TabularMdp& mdp, const Perturbation& p, int s, int a) {
    const Eigen::RowVectorXd base = mdp.transition.row(mdp.index(s, a));
    Eigen::RowVectorXd noop = Eigen::RowVectorXd::Zero(mdp.num_states);
    if (p.noop_action)
        noop = mdp.transition.row(mdp.index(s, *p.noop_action));
    else
        noop[s] = 1.0;
    return (1.0 - p.magnitude) * base + p.magnitude * noop;
}

PerturbedMdp action_failure(const TabularMdp& mdp, const Perturbation& p) {
    const int S = mdp.num_states, A = mdp.num_actions;
    PerturbedMdp out;
    if (p.schedule.kind == Schedule::Kind::Always) {
        out.mdp = mdp;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                if (failing_action(p, a)) out.mdp.transition.row(mdp.index(s, a)) = failed_row(mdp, p, s, a);
        out.base_state = identity_states(S);
        return out;
    }
    // phase-expanded: state phase * S + s, phase advances every step
    const Schedule& sch = p.schedule;
    const int P = sch.period, NS = P * S;
    TabularMdp& m = out.mdp;
    m.num_states = NS;
    m.num_actions = A;
    m.discount = mdp.discount;
    m.transition = Eigen::MatrixXd::Zero(NS * A, NS);
    m.reward.resize(NS, A);
    m.features.resize(NS * A, mdp.feature_dim());
    m.initial_dist = Eigen::VectorXd::Zero(NS);
    out.base_state.resize(NS);
    for (int ph = 0; ph < P; ++ph) {
        const int offset = ((ph - sch.start) % P + P) % P;
        const bool active = offset < sch.duration;
        const int next_ph = (ph + 1) % P;
        for (int s = 0; s < S; ++s) {
            const int xs = ph * S + s;
            out.base_state[xs] = s;
            m.reward.row(xs) = mdp.reward.row(s);
            for (int a = 0; a < A; ++a) {
                const Eigen::RowVectorXd row = active && failing_action(p, a)
                                                   ? failed_row(mdp, p, s, a)
                                                   : Eigen::RowVectorXd(mdp.transition.row(mdp.index(s, a)));
                m.transition.block(xs * A + a, next_ph * S, 1, S) = row;
                m.features.row(xs * A + a) = mdp.features.row(mdp.index(s, a));
            }
        }
    }
    m.initial_dist.head(S) = mdp.initial_dist;
    return out;
}

PerturbedMdp slip_increase(const Environment& env, const Perturbation& p) {
    const TabularMdp& mdp = env.mdp;
    const int S = mdp.num_states, A = mdp.num_actions;
    double base = 0.0;
    if (env.grid) base = env.grid->slip_prob;
    if (env.chain) base = env.chain->slip_prob;
    const double target = std::min(1.0, base + p.magnitude);
    PerturbedMdp out{mdp, identity_states(S)};
    // P = (1-p) Move + p U with U the action-averaged row; solve for Move and re-mix
    for (int s = 0; s < S; ++s) {
        Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(S);
        for (int a = 0; a < A; ++a) u += mdp.transition.row(mdp.index(s, a));
        u /= A;
        for (int a = 0; a < A; ++a) {
            const Eigen::RowVectorXd row = mdp.transition.row(mdp.index(s, a));
            Eigen::RowVectorXd mixed = u;
            if (base < 1.0) mixed = (1.0 - target) * (row - base * u) / (1.0 - base) + target * u;
            out.mdp.transition.row(mdp.index(s, a)) = mixed.cwiseMax(0.0);
        }
    }
    return out;
}

const GridSpec& require_grid(const Environment& env, PerturbationKind k) {
    if (!env.grid) throw std::invalid_argument(to_string(k) + " needs a gridworld environment");
    return *env.grid;
}

PerturbedMdp block_cells(const Environment& env, const Perturbation& p, Rng& rng) {
    const GridSpec& g = require_grid(env, p.kind);
    std::vector<Cell> eligible;
    for (const Cell& c : grid_layout(g).cells)
        if (!(c == g.start) && !g.goal_cells.count(c)) eligible.push_back(c);
    shuffle(eligible, rng);
    const int count = static_cast<int>(std::lround(p.magnitude * eligible.size()));
    const std::set<Cell> blocked(eligible.begin(), eligible.begin() + count);
    PerturbedMdp out{build_gridworld(g, blocked), identity_states(env.mdp.num_states)};
    require_goal_reachable(out.mdp);
    return out;
}

PerturbedMdp reward_shift(const Environment& env, const Perturbation& p, Rng& rng) {
    const GridSpec& g = require_grid(env, p.kind);
    const GridLayout lay = grid_layout(g);
    const int radius = std::max(1, static_cast<int>(std::lround(p.magnitude * (g.width + g.height - 2) / 2.0)));
    GridSpec shifted = g;
    shifted.goal_cells.clear();
    for (const auto& [goal, r] : g.goal_cells) {
        std::vector<Cell> options;
        for (const Cell& c : lay.cells) {
            const int dist = std::abs(c.row - goal.row) + std::abs(c.col - goal.col);
            if (dist >= 1 && dist <= radius && !(c == g.start) && !shifted.goal_cells.count(c) &&
                !g.goal_cells.count(c))
                options.push_back(c);
        }
        const Cell to = options.empty() ? goal : options[rng.below(static_cast<int>(options.size()))];
        shifted.goal_cells[to] = r;
    }
    PerturbedMdp out{build_gridworld(shifted), identity_states(env.mdp.num_states)};
    // features of the original grid are kept: the agent's descriptors do not move with the goal
    out.mdp.features = env.mdp.features;
    require_goal_reachable(out.mdp);
    return out;
}

PerturbedMdp action_remap(const TabularMdp& mdp, const Perturbation& p, Rng& rng) {
    const int S = mdp.num_states, A = mdp.num_actions;
    PerturbedMdp out{mdp, identity_states(S)};
    std::vector<int> states = identity_states(S);
    shuffle(states, rng);
    const int count = static_cast<int>(std::lround(p.magnitude * S));
    for (int k = 0; k < count; ++k) {
        const int s = states[k];
        std::vector<int> perm = identity_states(A);
        shuffle(perm, rng);
        if (A > 1 && std::is_sorted(perm.begin(), perm.end())) std::rotate(perm.begin(), perm.begin() + 1, perm.end());
        for (int a = 0; a < A; ++a) {
            out.mdp.transition.row(mdp.index(s, a)) = mdp.transition.row(mdp.index(s, perm[a]));
            out.mdp.reward(s, a) = mdp.reward(s, perm[a]);
        }
    }
    return out;
}

}  // namespace

PerturbedMdp perturb(const Environment& env, const Perturbation& p, std::uint64_t seed) {
    p.validate(env.mdp.num_actions);
    if (p.magnitude == 0.0) return {env.mdp, identity_states(env.mdp.num_states)};
    Rng rng(seed);
    PerturbedMdp out;
    switch (p.kind) {
        case PerturbationKind::ActionFailure: out = action_failure(env.mdp, p); break;
        case PerturbationKind::SlipIncrease: out = slip_increase(env, p); break;
        case PerturbationKind::BlockCells: out = block_cells(env, p, rng); break;
        case PerturbationKind::RewardShift: out = reward_shift(env, p, rng); break;
        case PerturbationKind::ActionRemap: out = action_remap(env.mdp, p, rng); break;
    }
    validate_mdp(out.mdp);
    return out;
}

Policy lift_policy(const Policy& policy, const PerturbedMdp& perturbed) {
    Policy lifted;
    const int NS = static_cast<int>(perturbed.base_state.size());
    lifted.probs.resize(NS, policy.num_actions());
    for (int s = 0; s < NS; ++s) lifted.probs.row(s) = policy.probs.row(perturbed.base_state[s]);
    return lifted;
}

}  // namespace domino
