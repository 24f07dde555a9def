#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <tuple>
#include <vector>

#include "swarmlab/errors.hpp"
#include "swarmlab/rng.hpp"

namespace swarmlab {

using Vec2 = Eigen::Vector2d;
using MatX2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Positions and velocities of N planar agents at a simulation time.
struct FlockState {
    MatX2 positions;
    MatX2 velocities;
    double time = 0.0;

    int n() const { return static_cast<int>(positions.rows()); }
};

inline bool all_finite(const MatX2& m) { return m.allFinite(); }

// Directed communication graph; in_neighbors[i] lists the agents i hears.
// The base graph built from a radius is symmetric; scenario roles (leaders,
// obstacle agents) suppress incoming edges afterwards.
struct CommGraph {
    std::vector<std::vector<int>> in_neighbors;

    int n() const { return static_cast<int>(in_neighbors.size()); }
};

struct SimConfig {
    double dt = 1e-2;
    int steps = 200;
    double comm_radius = 1.0;
    double min_dist = 0.1;
    double accel_clamp = 10.0;

    void validate() const {
        if (!(dt > 0.0)) throw input_error("SimConfig: dt must be > 0");
        if (steps < 1) throw input_error("SimConfig: steps must be >= 1");
        if (!(comm_radius > 0.0)) throw input_error("SimConfig: comm_radius must be > 0");
        if (!(min_dist >= 0.0) || !(min_dist < comm_radius))
            throw input_error("SimConfig: need 0 <= min_dist < comm_radius");
        if (!(accel_clamp > 0.0)) throw input_error("SimConfig: accel_clamp must be > 0");
    }
};

// Semi-implicit Euler: velocity first, then position.
inline FlockState step(const FlockState& state, const MatX2& accels, double dt) {
    if (accels.rows() != state.positions.rows())
        throw input_error("step: acceleration row count does not match agent count");
    if (!accels.allFinite()) throw numeric_error("step: non-finite acceleration");
    FlockState next;
    next.velocities = state.velocities + accels * dt;
    next.positions = state.positions + next.velocities * dt;
    next.time = state.time + dt;
    return next;
}

// N_i = { j != i : ||x_i - x_j|| <= R }. Boundary distance R is connected.
inline CommGraph comm_graph(const MatX2& positions, double radius) {
    if (!(radius > 0.0)) throw input_error("comm_graph: radius must be > 0");
    const int n = static_cast<int>(positions.rows());
    CommGraph g;
    g.in_neighbors.resize(n);
    const double r2 = radius * radius;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d2 = (positions.row(i) - positions.row(j)).squaredNorm();
            if (d2 <= r2) {
                g.in_neighbors[i].push_back(j);
                g.in_neighbors[j].push_back(i);
            }
        }
    }
    for (auto& nb : g.in_neighbors) std::sort(nb.begin(), nb.end());
    return g;
}

inline CommGraph comm_graph(const FlockState& state, double radius) {
    return comm_graph(state.positions, radius);
}

// Removes all incoming edges of the given agents. They keep sending.
inline void suppress_incoming(CommGraph& g, const std::vector<int>& agents) {
    for (int a : agents) g.in_neighbors.at(a).clear();
}

// Connectivity of the undirected restriction of the graph to `subset`
// (an edge counts if it exists in either direction).
inline bool is_connected(const CommGraph& g, const std::vector<int>& subset) {
    if (subset.empty()) throw input_error("is_connected: empty subset");
    const int n = g.n();
    std::vector<int> mark(n, -1);
    for (std::size_t k = 0; k < subset.size(); ++k) mark[subset[k]] = 0;

    std::vector<std::vector<int>> und(n);
    for (int i = 0; i < n; ++i) {
        if (mark[i] < 0) continue;
        for (int j : g.in_neighbors[i]) {
            if (mark[j] < 0) continue;
            und[i].push_back(j);
            und[j].push_back(i);
        }
    }
    std::vector<int> stack{subset[0]};
    mark[subset[0]] = 1;
    std::size_t seen = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : und[v]) {
            if (mark[w] == 0) {
                mark[w] = 1;
                ++seen;
                stack.push_back(w);
            }
        }
    }
    return seen == subset.size();
}

inline bool is_connected(const CommGraph& g) {
    std::vector<int> all(g.n());
    for (int i = 0; i < g.n(); ++i) all[i] = i;
    return is_connected(g, all);
}

struct RandomDiskParams {
    int n = 100;
    double min_dist = 0.1;
    double comm_radius = 1.0;
    int deg_min = 2;
    double vmax = 3.0;
};

// Positions in a disk of radius sqrt(n) subject to: neighbor pairs inside
// [min_dist, comm_radius], every agent with at least deg_min neighbors,
// connected communication graph. Agents are placed one at a time, each
// uniform over the part of the disk that keeps the pairwise floor and lies
// in range of enough already-placed agents, which makes the degree and
// connectivity constraints hold by construction (at the paper's density a
// plain uniform draw satisfies them with vanishing probability). The final
// whole-sample check plus retry loop guards the corner cases.
// V(0) = V_rand + v_bias 1^T with entries of both uniform in [-vmax, vmax].
inline FlockState random_disk_init(const RandomDiskParams& p, Rng& rng) {
    if (p.n < 2) throw input_error("random_disk_init: need n >= 2");
    if (!(p.min_dist > 0.0) || !(p.min_dist < p.comm_radius))
        throw input_error("random_disk_init: need 0 < min_dist < comm_radius");
    if (p.deg_min < 0) throw input_error("random_disk_init: deg_min must be >= 0");
    if (p.vmax < 0.0) throw input_error("random_disk_init: vmax must be >= 0");

    const double disk_radius = std::sqrt(static_cast<double>(p.n));
    const long max_sample_attempts = 10000;
    const int max_placement_tries = 10000;
    const double min_d2 = p.min_dist * p.min_dist;
    const double r2 = p.comm_radius * p.comm_radius;

    for (long attempt = 1; attempt <= max_sample_attempts; ++attempt) {
        MatX2 pos(p.n, 2);
        bool placed_all = true;
        for (int i = 0; i < p.n && placed_all; ++i) {
            const int need_links = std::max(1, std::min(i, p.deg_min));
            bool ok = false;
            for (int t = 0; t < max_placement_tries; ++t) {
                const double r = disk_radius * std::sqrt(rng.uniform());
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                const Vec2 x(r * std::cos(phi), r * std::sin(phi));
                bool clear = true;
                int links = 0;
                for (int j = 0; j < i; ++j) {
                    const double d2 = (x.transpose() - pos.row(j)).squaredNorm();
                    if (d2 < min_d2) {
                        clear = false;
                        break;
                    }
                    if (d2 <= r2) ++links;
                }
                if (clear && (i == 0 || links >= need_links)) {
                    pos.row(i) = x;
                    ok = true;
                    break;
                }
            }
            if (!ok) placed_all = false;
        }
        if (!placed_all) continue;

        const CommGraph g = comm_graph(pos, p.comm_radius);
        bool degrees_ok = true;
        for (const auto& nb : g.in_neighbors) {
            if (static_cast<int>(nb.size()) < p.deg_min) {
                degrees_ok = false;
                break;
            }
        }
        if (!degrees_ok || !is_connected(g)) continue;

        FlockState state;
        state.positions = pos;
        state.velocities.resize(p.n, 2);
        const Vec2 bias(rng.uniform(-p.vmax, p.vmax), rng.uniform(-p.vmax, p.vmax));
        for (int i = 0; i < p.n; ++i) {
            state.velocities(i, 0) = rng.uniform(-p.vmax, p.vmax) + bias.x();
            state.velocities(i, 1) = rng.uniform(-p.vmax, p.vmax) + bias.y();
        }
        state.time = 0.0;
        return state;
    }
    throw generation_error("random_disk_init: constraints not satisfiable", max_sample_attempts);
}

// var(V) = (1/N) sum ||v_i - mean(V)||^2
inline double velocity_variance(const FlockState& state) {
    const int n = state.n();
    const Eigen::RowVector2d mean = state.velocities.colwise().mean();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (state.velocities.row(i) - mean).squaredNorm();
    return acc / n;
}

inline double mean_accel_norm(const MatX2& accels) {
    const int n = static_cast<int>(accels.rows());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += accels.row(i).norm();
    return acc / n;
}

// Mean leader velocity distance: (1/N) sum ||v_i - v_ldr||
inline double mlvd(const FlockState& state, const Vec2& leader_vel) {
    const int n = state.n();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (state.velocities.row(i).transpose() - leader_vel).norm();
    return acc / n;
}

inline double min_pairwise_distance(const FlockState& state) {
    const int n = state.n();
    if (n < 2) throw input_error("min_pairwise_distance: need at least two agents");
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            best = std::min(best, (state.positions.row(i) - state.positions.row(j)).norm());
    return best;
}

// Pair attaining the maximum pairwise distance; ties go to the lowest
// (i, j) in lexicographic order. Indices are zero-based.
inline std::tuple<int, int, double> flock_diameter_pair(const FlockState& state) {
    const int n = state.n();
    if (n < 2) throw input_error("flock_diameter_pair: need at least two agents");
    int bi = 0, bj = 1;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = (state.positions.row(i) - state.positions.row(j)).norm();
            if (d > best) {
                best = d;
                bi = i;
                bj = j;
            }
        }
    }
    return {bi, bj, best};
}

struct MetricsTrace {
    struct Row {
        int step;
        double time;
        double vel_var;
        double mean_accel_norm;
        bool connected;
        double min_dist;
        std::optional<double> mlvd;
    };
    std::vector<Row> rows;
    int collision_events = 0;
};

}  // namespace swarmlab
