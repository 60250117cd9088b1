#pragma once

#include "domino/mdp.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace domino {

struct Cell {
    int row = 0;
    int col = 0;
    auto operator<=>(const Cell&) const = default;
};

enum class FeatureKind { OneHotState, XYCoordinates, XYPlusGoalDistance };

std::string to_string(FeatureKind k);
FeatureKind parse_feature_kind(const std::string& name);

/// Grid actions, in tie-break order.
enum GridAction : int { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

struct GridSpec {
    int width = 1;
    int height = 1;
    std::set<Cell> walls;
    std::map<Cell, double> goal_cells;  // reward collected on every step spent in the cell
    Cell start;
    double slip_prob = 0.0;  // chance the action is replaced by a uniformly random one
    FeatureKind feature_kind = FeatureKind::XYCoordinates;
    double discount = 0.99;

    void validate() const;
};

/// Open cells in row-major order; state s lives at cells[s].
struct GridLayout {
    std::vector<Cell> cells;
    std::map<Cell, int> state_of;
};

GridLayout grid_layout(const GridSpec& spec);

/// Cells in `blocked` stay states (so indices match the unblocked grid) but
/// behave like walls: moves into them bounce back.
TabularMdp build_gridworld(const GridSpec& spec, const std::set<Cell>& blocked = {});

/// size x size grid split into four rooms by a wall row and column through
/// the middle, each wall with two doors. Start top-left, no goals.
GridSpec four_rooms(int size);

enum class ChainFeature { Position, OneHot };

std::string to_string(ChainFeature k);
ChainFeature parse_chain_feature(const std::string& name);

/// Line of cells with actions left(0), stay(1), right(2).
struct ChainSpec {
    int length = 2;
    ChainFeature feature = ChainFeature::Position;
    double slip_prob = 0.0;
    double left_reward = 0.0;   // per step spent in cell 0
    double right_reward = 0.0;  // per step spent in the last cell
    double discount = 0.99;
    int start = -1;             // -1: middle cell, length / 2

    void validate() const;
};

TabularMdp build_chain(const ChainSpec& spec);
TabularMdp build_chain(int length, ChainFeature feature);

/// An MDP plus the spec it was built from, if any; perturbations that
/// change geometry need the spec.
struct Environment {
    TabularMdp mdp;
    std::optional<GridSpec> grid;
    std::optional<ChainSpec> chain;
};

Environment make_environment(const GridSpec& spec);
Environment make_environment(const ChainSpec& spec);
Environment make_environment(const TabularMdp& mdp);

enum class PerturbationKind { ActionFailure, SlipIncrease, BlockCells, RewardShift, ActionRemap };

std::string to_string(PerturbationKind k);
PerturbationKind parse_perturbation_kind(const std::string& name);

struct Schedule {
    enum class Kind { Always, Periodic } kind = Kind::Always;
    // failure is active while (t mod period) lies in [start, start + duration)
    int period = 50;
    int duration = 10;
    int start = 10;

    void validate() const;
};

struct Perturbation {
    PerturbationKind kind = PerturbationKind::ActionFailure;
    double magnitude = 0.0;
    Schedule schedule;
    std::vector<int> actions;      // ActionFailure: affected actions; empty means all
    std::optional<int> noop_action;  // ActionFailure: replacement; empty means stay in place

    void validate(int num_actions) const;
};

class PerturbationInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PerturbedMdp {
    TabularMdp mdp;
    std::vector<int> base_state;  // state of the original MDP behind each state
};

/// Seeded perturbation. Magnitude 0 returns the input unchanged. A Periodic
/// ActionFailure expands the state space by the schedule phase (state
/// phase * S + s) so the result stays a stationary MDP.
PerturbedMdp perturb(const Environment& env, const Perturbation& p, std::uint64_t seed);

/// Copies each base-state row of `policy` onto the perturbed states.
Policy lift_policy(const Policy& policy, const PerturbedMdp& perturbed);

/// States reachable from the support of the initial distribution.
std::vector<bool> reachable_states(const TabularMdp& mdp);

}  // namespace domino
