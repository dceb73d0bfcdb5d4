#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oodrl/rng.hpp"

namespace oodrl {

enum class Variant { train, mirror };
enum class Action { up = 0, down = 1, left = 2, right = 3 };
enum class Outcome { running, goal, timeout };

inline constexpr int kNumActions = 4;

std::string variant_name(Variant v);

// Deterministic pathfinding grid. Cells are indexed y*width + x. The default
// layout is 12x4 with a wall in column 6 (rows 0, 2, 3) leaving a single gap
// at (6,1); the start region is the free left half, the goal region the free
// right half, and the mirror variant swaps the two.
struct GridSpec {
    int width = 12;
    int height = 4;
    std::vector<std::uint8_t> walls;  // height*width indicator
    std::vector<int> start_cells;
    std::vector<int> goal_cells;
    double step_reward = -1.0;
    double goal_reward = 100.0;
    int max_steps = 100;

    int cell(int x, int y) const { return y * width + x; }
    int n_cells() const { return width * height; }
    bool is_wall(int c) const { return walls[c] != 0; }
};

struct GridOverrides {
    std::optional<int> max_steps;
    std::optional<int> wall_column;
    std::optional<int> wall_gap_row;
};

// Builds the requested variant and validates connectivity (every start cell
// must reach every goal cell). Throws on a disconnected layout.
GridSpec make_env(Variant variant, const GridOverrides& overrides = {});

struct EnvState {
    int agent = 0;
    int goal = 0;
    int steps_taken = 0;
    bool done = false;
    Outcome outcome = Outcome::running;
};

// Independent uniform draws of agent over start_cells and goal over goal_cells.
EnvState reset(const GridSpec& spec, Rng& rng);

struct StepResult {
    double reward = 0.0;
    bool done = false;
};

// Bumping a wall or the boundary keeps the agent in place and still costs a
// step. Throws if the episode is already finished.
StepResult step(EnvState& state, const GridSpec& spec, Action action);

// Three binary planes (agent, target, wall), plane-major then row-major.
std::vector<double> encode(const EnvState& state, const GridSpec& spec);

// BFS distance under the blocking rule; nullopt when unreachable.
std::optional<int> shortest_path_len(int from, int to, const GridSpec& spec);

}  // namespace oodrl
