#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "swarmlab/errors.hpp"
#include "swarmlab/flock.hpp"

namespace swarmlab {

// Capped flocking potential U(r) = 1/r^2 + ln(r^2) for r <= comm_radius,
// constant beyond. Minimizer at r = 1.
struct PotentialSpec {
    double comm_radius = 1.0;
};

// Gradient of U(||r||) with respect to r. Zero beyond the cap.
inline Vec2 potential_grad(const Vec2& r_vec, const PotentialSpec& spec) {
    const double r = r_vec.norm();
    if (r == 0.0) throw singularity_error("potential_grad: zero displacement");
    if (r > spec.comm_radius) return Vec2::Zero();
    const double du = -2.0 / (r * r * r) + 2.0 / r;
    return (du / r) * r_vec;
}

// Rescale to norm `bound` when ||a|| exceeds it; direction preserved.
inline Vec2 clamp_norm(const Vec2& a, double bound) {
    const double n = a.norm();
    if (n > bound) return a * (bound / n);
    return a;
}

// One received message: relative position r = x_i - x_j and relative
// velocity v = v_i - v_j of the sender j as seen by the receiver i.
// Scenario code may substitute a synthetic v.
struct Message {
    Vec2 r;
    Vec2 v;
};

// a_i = -sum v - sum grad U(||r||), clamped to the 2-norm bound.
inline Vec2 tanner_accel(const std::vector<Message>& msgs, const PotentialSpec& spec,
                         double clamp) {
    Vec2 a = Vec2::Zero();
    for (const Message& m : msgs) {
        a -= m.v;
        a -= potential_grad(m.r, spec);
    }
    return clamp_norm(a, clamp);
}

namespace detail {

template <typename NeighborsOf>
MatX2 tanner_accels(const FlockState& state, const PotentialSpec& spec, double clamp,
                    NeighborsOf&& neighbors_of) {
    const int n = state.n();
    MatX2 accels(n, 2);
    std::vector<Message> msgs;
    for (int i = 0; i < n; ++i) {
        msgs.clear();
        for (int j : neighbors_of(i)) {
            Message m;
            m.r = (state.positions.row(i) - state.positions.row(j)).transpose();
            m.v = (state.velocities.row(i) - state.velocities.row(j)).transpose();
            msgs.push_back(m);
        }
        accels.row(i) = tanner_accel(msgs, spec, clamp).transpose();
    }
    return accels;
}

}  // namespace detail

// Centralized expert: sums over every other agent.
inline MatX2 expert_accel(const FlockState& state, const PotentialSpec& spec, double clamp) {
    const int n = state.n();
    std::vector<int> others(n - 1);
    return detail::tanner_accels(state, spec, clamp, [&](int i) -> const std::vector<int>& {
        others.clear();
        for (int j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        return others;
    });
}

// Decentralized variant on a fixed communication graph.
inline MatX2 decentralized_fixed_accel(const FlockState& state, const CommGraph& fixed_graph,
                                       const PotentialSpec& spec, double clamp) {
    if (fixed_graph.n() != state.n())
        throw input_error("decentralized_fixed_accel: graph size does not match state");
    return detail::tanner_accels(state, spec, clamp, [&](int i) -> const std::vector<int>& {
        return fixed_graph.in_neighbors[i];
    });
}

// Decentralized variant on the radius graph of the current state.
inline MatX2 decentralized_dynamic_accel(const FlockState& state, double radius,
                                         const PotentialSpec& spec, double clamp) {
    const CommGraph g = comm_graph(state, radius);
    return decentralized_fixed_accel(state, g, spec, clamp);
}

// psi(r, v) = [v^T, ||r||^-4 r^T, ||r||^-2 r^T]^T, the terms entering the
// expert's acceleration linearly.
inline Eigen::Matrix<double, 6, 1> features_psi(const Vec2& r, const Vec2& v_rel) {
    const double r2 = r.squaredNorm();
    if (r2 == 0.0) throw singularity_error("features_psi: zero displacement");
    Eigen::Matrix<double, 6, 1> out;
    out.segment<2>(0) = v_rel;
    out.segment<2>(2) = r / (r2 * r2);
    out.segment<2>(4) = r / r2;
    return out;
}

// Per-agent feature summary Z_i: 6 rows, one column per hop/delay depth.
struct AgentHistory {
    Eigen::Matrix<double, 6, Eigen::Dynamic> z;

    static AgentHistory zero(int depth) {
        AgentHistory h;
        h.z = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, depth);
        return h;
    }
    int depth() const { return static_cast<int>(z.cols()); }
};

enum class AggregationMode { Sum, Mean };

// One tick of the time-delayed aggregation recurrence, from messages:
//   z^1(t) = sum (or mean) of psi over received messages,
//   z^k(t) = mean over in-neighbors j of z_j^{k-1}(t-1), k >= 2,
// with empty neighborhoods producing zero columns.
inline std::vector<AgentHistory> aggregate_history(
    const std::vector<AgentHistory>& prev, const CommGraph& graph,
    const std::vector<std::vector<Message>>& messages, AggregationMode mode) {
    const int n = graph.n();
    if (static_cast<int>(prev.size()) != n || static_cast<int>(messages.size()) != n)
        throw input_error("aggregate_history: size mismatch between graph, histories, messages");
    const int depth = prev.empty() ? 0 : prev[0].depth();
    for (const auto& h : prev)
        if (h.depth() != depth) throw input_error("aggregate_history: mixed history depths");

    std::vector<AgentHistory> out(n, AgentHistory::zero(depth));
    for (int i = 0; i < n; ++i) {
        Eigen::Matrix<double, 6, 1> one_hop = Eigen::Matrix<double, 6, 1>::Zero();
        for (const Message& m : messages[i]) one_hop += features_psi(m.r, m.v);
        if (mode == AggregationMode::Mean && !messages[i].empty())
            one_hop /= static_cast<double>(messages[i].size());
        out[i].z.col(0) = one_hop;

        const auto& nb = graph.in_neighbors[i];
        if (!nb.empty()) {
            for (int k = 1; k < depth; ++k) {
                Eigen::Matrix<double, 6, 1> acc = Eigen::Matrix<double, 6, 1>::Zero();
                for (int j : nb) acc += prev[j].z.col(k - 1);
                out[i].z.col(k) = acc / static_cast<double>(nb.size());
            }
        }
    }
    return out;
}

inline std::vector<std::vector<Message>> default_messages(const FlockState& state,
                                                          const CommGraph& graph) {
    const int n = state.n();
    std::vector<std::vector<Message>> msgs(n);
    for (int i = 0; i < n; ++i) {
        msgs[i].reserve(graph.in_neighbors[i].size());
        for (int j : graph.in_neighbors[i]) {
            Message m;
            m.r = (state.positions.row(i) - state.positions.row(j)).transpose();
            m.v = (state.velocities.row(i) - state.velocities.row(j)).transpose();
            msgs[i].push_back(m);
        }
    }
    return msgs;
}

inline std::vector<AgentHistory> aggregate_history(const std::vector<AgentHistory>& prev,
                                                   const FlockState& state,
                                                   const CommGraph& graph,
                                                   AggregationMode mode) {
    return aggregate_history(prev, graph, default_messages(state, graph), mode);
}

}  // namespace swarmlab
