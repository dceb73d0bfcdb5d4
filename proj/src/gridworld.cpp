#include "oodrl/gridworld.hpp"

#include <deque>
#include <stdexcept>

namespace oodrl {

std::string variant_name(Variant v) { return v == Variant::train ? "train" : "mirror"; }

GridSpec make_env(Variant variant, const GridOverrides& overrides) {
    GridSpec spec;
    if (overrides.max_steps) spec.max_steps = *overrides.max_steps;
    if (spec.max_steps <= 0) throw std::invalid_argument("make_env: max_steps must be positive");

    const int wall_col = overrides.wall_column.value_or(6);
    const int gap_row = overrides.wall_gap_row.value_or(1);
    if (wall_col <= 0 || wall_col >= spec.width - 1)
        throw std::invalid_argument("make_env: wall column must be interior");
    if (gap_row < 0 || gap_row >= spec.height)
        throw std::invalid_argument("make_env: wall gap row out of range");

    spec.walls.assign(spec.n_cells(), 0);
    for (int y = 0; y < spec.height; ++y)
        if (y != gap_row) spec.walls[spec.cell(wall_col, y)] = 1;

    std::vector<int> left, right;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const int c = spec.cell(x, y);
            if (spec.is_wall(c)) continue;
            if (x < wall_col) left.push_back(c);
            if (x > wall_col) right.push_back(c);
        }
    if (variant == Variant::train) {
        spec.start_cells = left;
        spec.goal_cells = right;
    } else {
        spec.start_cells = right;
        spec.goal_cells = left;
    }

    for (int s : spec.start_cells)
        for (int g : spec.goal_cells)
            if (!shortest_path_len(s, g, spec))
                throw std::invalid_argument("make_env: start cell cannot reach goal cell");
    return spec;
}

EnvState reset(const GridSpec& spec, Rng& rng) {
    EnvState state;
    state.agent = spec.start_cells[rng.uniform_int(static_cast<std::uint32_t>(spec.start_cells.size()))];
    state.goal = spec.goal_cells[rng.uniform_int(static_cast<std::uint32_t>(spec.goal_cells.size()))];
    return state;
}

StepResult step(EnvState& state, const GridSpec& spec, Action action) {
    if (state.done) throw std::logic_error("step: episode already finished");
    int x = state.agent % spec.width;
    int y = state.agent / spec.width;
    switch (action) {
        case Action::up: y -= 1; break;
        case Action::down: y += 1; break;
        case Action::left: x -= 1; break;
        case Action::right: x += 1; break;
    }
    const bool in_bounds = x >= 0 && x < spec.width && y >= 0 && y < spec.height;
    if (in_bounds && !spec.is_wall(spec.cell(x, y))) state.agent = spec.cell(x, y);
    state.steps_taken += 1;

    StepResult result;
    if (state.agent == state.goal) {
        result.reward = spec.goal_reward;
        state.outcome = Outcome::goal;
        state.done = true;
    } else {
        result.reward = spec.step_reward;
        if (state.steps_taken >= spec.max_steps) {
            state.outcome = Outcome::timeout;
            state.done = true;
        }
    }
    result.done = state.done;
    return result;
}

std::vector<double> encode(const EnvState& state, const GridSpec& spec) {
    const int n = spec.n_cells();
    std::vector<double> obs(3 * n, 0.0);
    obs[state.agent] = 1.0;
    obs[n + state.goal] = 1.0;
    for (int c = 0; c < n; ++c) obs[2 * n + c] = spec.walls[c] ? 1.0 : 0.0;
    return obs;
}

std::optional<int> shortest_path_len(int from, int to, const GridSpec& spec) {
    if (from < 0 || from >= spec.n_cells() || to < 0 || to >= spec.n_cells())
        throw std::invalid_argument("shortest_path_len: cell out of range");
    if (spec.is_wall(from) || spec.is_wall(to))
        throw std::invalid_argument("shortest_path_len: cell is a wall");
    if (from == to) return 0;
    std::vector<int> dist(spec.n_cells(), -1);
    dist[from] = 0;
    std::deque<int> queue{from};
    while (!queue.empty()) {
        const int c = queue.front();
        queue.pop_front();
        const int x = c % spec.width;
        const int y = c / spec.width;
        const int nbrs[4][2] = {{x, y - 1}, {x, y + 1}, {x - 1, y}, {x + 1, y}};
        for (const auto& nb : nbrs) {
            if (nb[0] < 0 || nb[0] >= spec.width || nb[1] < 0 || nb[1] >= spec.height) continue;
            const int nc = spec.cell(nb[0], nb[1]);
            if (spec.is_wall(nc) || dist[nc] >= 0) continue;
            dist[nc] = dist[c] + 1;
            if (nc == to) return dist[nc];
            queue.push_back(nc);
        }
    }
    return std::nullopt;
}

}  // namespace oodrl
