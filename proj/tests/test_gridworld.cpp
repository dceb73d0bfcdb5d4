#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "oodrl/gridworld.hpp"

using namespace oodrl;

namespace {

// independent exhaustive search oracle (iterative deepening over paths)
int brute_force_distance(int from, int to, const GridSpec& spec) {
    std::set<int> frontier{from};
    std::set<int> seen{from};
    int depth = 0;
    while (!frontier.count(to)) {
        std::set<int> next;
        for (int c : frontier) {
            const int x = c % spec.width, y = c / spec.width;
            const int cand[4][2] = {{x, y - 1}, {x, y + 1}, {x - 1, y}, {x + 1, y}};
            for (auto& nb : cand) {
                if (nb[0] < 0 || nb[0] >= spec.width || nb[1] < 0 || nb[1] >= spec.height) continue;
                const int nc = spec.cell(nb[0], nb[1]);
                if (!spec.is_wall(nc) && !seen.count(nc)) {
                    next.insert(nc);
                    seen.insert(nc);
                }
            }
        }
        REQUIRE(!next.empty());
        frontier = next;
        ++depth;
    }
    return depth;
}

}  // namespace

TEST_CASE("train variant geometry") {
    const GridSpec spec = make_env(Variant::train);
    for (int c : spec.start_cells) CHECK(c % spec.width <= 5);
    for (int c : spec.goal_cells) CHECK(c % spec.width >= 7);
    int wall_count = 0;
    for (auto w : spec.walls) wall_count += w;
    CHECK(wall_count == 3);
    CHECK(!spec.is_wall(spec.cell(6, 1)));  // the gap
}

TEST_CASE("mirror variant swaps the regions") {
    const GridSpec train = make_env(Variant::train);
    const GridSpec mirror = make_env(Variant::mirror);
    CHECK(mirror.start_cells == train.goal_cells);
    CHECK(mirror.goal_cells == train.start_cells);
    CHECK(mirror.walls == train.walls);
}

TEST_CASE("disconnected layouts are rejected") {
    GridOverrides overrides;
    overrides.wall_column = 6;
    overrides.wall_gap_row = 1;
    CHECK_NOTHROW(make_env(Variant::train, overrides));
    overrides.wall_gap_row = 99;
    CHECK_THROWS(make_env(Variant::train, overrides));
}

TEST_CASE("reset draws uniformly and deterministically") {
    const GridSpec spec = make_env(Variant::train);
    Rng rng(42);
    std::map<int, int> start_counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const EnvState s = reset(spec, rng);
        start_counts[s.agent] += 1;
        CHECK(s.agent != s.goal);  // regions are disjoint
    }
    const double expected = static_cast<double>(n) / spec.start_cells.size();
    const double sigma = std::sqrt(expected * (1.0 - 1.0 / spec.start_cells.size()));
    for (int c : spec.start_cells) {
        CHECK(start_counts.count(c) == 1);
        CHECK(std::fabs(start_counts[c] - expected) < 3.0 * sigma + 1.0);
    }

    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) {
        const EnvState sa = reset(spec, a), sb = reset(spec, b);
        CHECK(sa.agent == sb.agent);
        CHECK(sa.goal == sb.goal);
    }
}

TEST_CASE("step rewards and termination") {
    const GridSpec spec = make_env(Variant::train);
    EnvState state;
    state.agent = spec.cell(0, 0);
    state.goal = spec.cell(1, 0);

    SUBCASE("reaching the goal pays +100 and ends the episode") {
        const StepResult r = step(state, spec, Action::right);
        CHECK(r.reward == 100.0);
        CHECK(r.done);
        CHECK(state.outcome == Outcome::goal);
        CHECK_THROWS(step(state, spec, Action::right));
    }
    SUBCASE("non-goal moves cost -1") {
        const StepResult r = step(state, spec, Action::down);
        CHECK(r.reward == -1.0);
        CHECK(!r.done);
    }
    SUBCASE("bumping a wall keeps the agent in place") {
        state.agent = spec.cell(5, 0);
        state.goal = spec.cell(7, 0);
        const StepResult r = step(state, spec, Action::right);  // wall at (6,0)
        CHECK(state.agent == spec.cell(5, 0));
        CHECK(r.reward == -1.0);
        CHECK(!r.done);
    }
    SUBCASE("bumping the boundary keeps the agent in place") {
        const StepResult r = step(state, spec, Action::up);
        CHECK(state.agent == spec.cell(0, 0));
        CHECK(r.reward == -1.0);
    }
    SUBCASE("timeout terminates without the goal reward") {
        state.goal = spec.cell(11, 3);
        for (int i = 0; i < spec.max_steps; ++i) {
            CHECK(!state.done);
            step(state, spec, Action::up);  // bounces forever
        }
        CHECK(state.done);
        CHECK(state.outcome == Outcome::timeout);
        CHECK(state.steps_taken == spec.max_steps);
    }
}

TEST_CASE("transition determinism") {
    const GridSpec spec = make_env(Variant::train);
    EnvState a, b;
    a.agent = b.agent = spec.cell(2, 2);
    a.goal = b.goal = spec.cell(9, 1);
    for (Action act : {Action::right, Action::down, Action::left, Action::up}) {
        const StepResult ra = step(a, spec, act);
        const StepResult rb = step(b, spec, act);
        CHECK(a.agent == b.agent);
        CHECK(ra.reward == rb.reward);
    }
}

TEST_CASE("observation encoding") {
    const GridSpec spec = make_env(Variant::train);
    EnvState state;
    state.agent = spec.cell(3, 2);
    state.goal = spec.cell(8, 1);
    const auto obs = encode(state, spec);
    CHECK(obs.size() == 144);  // 3 * 4 * 12

    const int n = spec.n_cells();
    double agent_sum = 0, goal_sum = 0, wall_sum = 0;
    for (int c = 0; c < n; ++c) {
        agent_sum += obs[c];
        goal_sum += obs[n + c];
        wall_sum += obs[2 * n + c];
        CHECK(obs[2 * n + c] == (spec.is_wall(c) ? 1.0 : 0.0));
    }
    CHECK(agent_sum == 1.0);
    CHECK(goal_sum == 1.0);
    CHECK(wall_sum == 3.0);

    EnvState moved = state;
    step(moved, spec, Action::left);
    const auto obs2 = encode(moved, spec);
    int diff = 0;
    for (size_t i = 0; i < obs.size(); ++i)
        if (obs[i] != obs2[i]) ++diff;
    CHECK(diff == 2);
    for (size_t i = n; i < obs.size(); ++i) CHECK(obs[i] == obs2[i]);
}

TEST_CASE("shortest paths") {
    const GridSpec spec = make_env(Variant::train);
    CHECK(shortest_path_len(spec.cell(3, 1), spec.cell(3, 1), spec) == 0);
    CHECK(shortest_path_len(spec.cell(3, 1), spec.cell(4, 1), spec) == 1);
    CHECK_THROWS(shortest_path_len(spec.cell(6, 0), spec.cell(0, 0), spec));

    SUBCASE("cross-wall distances match the exhaustive oracle") {
        Rng rng(13);
        for (int i = 0; i < 30; ++i) {
            const int from = spec.start_cells[rng.uniform_int(spec.start_cells.size())];
            const int to = spec.goal_cells[rng.uniform_int(spec.goal_cells.size())];
            const auto d = shortest_path_len(from, to, spec);
            REQUIRE(d.has_value());
            CHECK(*d == brute_force_distance(from, to, spec));
        }
    }
    SUBCASE("unreachable is reported distinctly") {
        GridSpec boxed = spec;
        // wall off the entire column 1, isolating column 0
        for (int y = 0; y < boxed.height; ++y) boxed.walls[boxed.cell(1, y)] = 1;
        CHECK(!shortest_path_len(boxed.cell(0, 0), boxed.cell(3, 0), boxed).has_value());
    }
}

TEST_CASE("optimal return equals 100 - (shortest_path_len - 1)") {
    const GridSpec spec = make_env(Variant::train);
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        EnvState state = reset(spec, rng);
        const int optimal = *shortest_path_len(state.agent, state.goal, spec);
        double ret = 0.0;
        // BFS-following policy: always step to a neighbor that reduces distance
        while (!state.done) {
            const int d = *shortest_path_len(state.agent, state.goal, spec);
            Action best = Action::up;
            bool found = false;
            for (int a = 0; a < kNumActions && !found; ++a) {
                EnvState probe = state;
                step(probe, spec, static_cast<Action>(a));
                if (probe.agent != state.agent &&
                    *shortest_path_len(probe.agent, state.goal, spec) == d - 1) {
                    best = static_cast<Action>(a);
                    found = true;
                }
            }
            REQUIRE(found);
            ret += step(state, spec, best).reward;
        }
        CHECK(state.outcome == Outcome::goal);
        CHECK(state.steps_taken == optimal);
        CHECK(ret == 100.0 - (optimal - 1));
    }
}
