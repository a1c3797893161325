#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace odice::grid {

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

// Serialization order is pinned: 0=up, 1=right, 2=down, 3=left.
// Tie-breaks everywhere follow this same order.
enum class Action : int { up = 0, right = 1, down = 2, left = 3 };

inline constexpr std::array<Action, 4> kActionOrder = {Action::up, Action::right,
                                                       Action::down, Action::left};

struct GoalCell {
    Cell cell;
    double reward = 0.0;
};

struct GridSpec {
    int width = 30;
    int height = 30;
    Cell start = {0, 0};
    std::vector<GoalCell> goal_cells;  // empty means "use default goal bands"
    double step_reward = -1.0;
    double slip_prob = 0.05;
    int max_episode_len = 120;
};

// 30x30 task: goal band at the top (x in [10,19], y=29, reward top_reward)
// and at the right border (x=29, y in [10,19], reward right_reward).
GridSpec default_spec(double top_reward = 10.0, double right_reward = 5.0);

void validate(const GridSpec& spec);

bool in_grid(const GridSpec& spec, Cell c);
bool is_goal(const GridSpec& spec, Cell c);
double goal_reward(const GridSpec& spec, Cell c);  // 0 when c is not a goal

// Target cell of an action with border clipping (off-grid moves stay put).
Cell move(const GridSpec& spec, Cell s, Action a);

struct StepResult {
    Cell s_next;
    double r = 0.0;
    bool done = false;
};

// Deterministic transition. s must be inside the grid and not a goal cell.
StepResult step(const GridSpec& spec, Cell s, Action a);

struct Transition {
    Cell s;
    Action a = Action::up;
    double r = 0.0;
    Cell s_next;
    bool done = false;
};

struct Dataset {
    GridSpec spec;
    std::vector<Transition> transitions;
    // traj_offsets[i] is the first transition of trajectory i; a final entry
    // equal to transitions.size() closes the partition.
    std::vector<std::size_t> traj_offsets;
    std::uint64_t seed = 0;
};

// Greedy move toward the nearest goal cell (Manhattan), shifted to a uniform
// random action with probability slip_prob. Action ties follow kActionOrder.
Action behavior_action(const GridSpec& spec, Cell s, std::mt19937_64& gen);

// Rolls n_traj episodes of the behavior policy from spec.start, each ending
// at a goal or after max_episode_len transitions. Deterministic per seed.
Dataset generate_dataset(const GridSpec& spec, int n_traj, std::uint64_t seed);

// mask[y * width + x] is true iff the cell occurs as s or s_next.
std::vector<std::uint8_t> support_mask(const Dataset& dataset);

// Network input encoding: (x/(width-1), y/(height-1)) in [0,1]^2.
std::array<double, 2> encode(const GridSpec& spec, Cell s);

// JSONL: header object carrying spec and seed, then one transition per line
// with fields s, a, r, s_next, done.
std::string to_jsonl(const Dataset& dataset);
Dataset from_jsonl(const std::string& text);
void save_jsonl(const std::string& path, const Dataset& dataset);
Dataset load_jsonl(const std::string& path);

}  // namespace odice::grid
