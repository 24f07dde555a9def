#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "swarmlab/controllers.hpp"
#include "swarmlab/errors.hpp"
#include "swarmlab/flock.hpp"
#include "swarmlab/net.hpp"

namespace swarmlab {

struct LeaderSpec {
    std::vector<int> leaders;  // indices into the flock
    Vec2 velocity = Vec2::Zero();
};

// Disk obstacle sensed through virtual agents on the vertices of an
// inscribed regular polygon with side length `side_len`.
struct Obstacle {
    Vec2 center = Vec2::Zero();
    int sides = 12;
    double side_len = 0.1;

    double circumradius() const { return side_len / (2.0 * std::sin(M_PI / sides)); }

    MatX2 vertices(double phase = 0.0) const {
        MatX2 v(sides, 2);
        const double rho = circumradius();
        for (int k = 0; k < sides; ++k) {
            const double a = phase + 2.0 * M_PI * k / sides;
            v(k, 0) = center.x() + rho * std::cos(a);
            v(k, 1) = center.y() + rho * std::sin(a);
        }
        return v;
    }
};

struct AvoidanceParams {
    double alpha2 = 0.5;
    double alpha_theta = M_PI / 2.0;
    std::function<double(double, double)> alpha1 = [](double r, double v) {
        return std::exp(-r) + std::exp(-v);
    };
};

inline Eigen::Matrix2d rotation(double theta) {
    Eigen::Matrix2d r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

// gamma(r, v, theta) = (r^T/||r||) Rot(theta) (v/||v||), in [-1, 1].
inline double gamma(const Vec2& r, const Vec2& v, double theta) {
    const double rn = r.norm();
    const double vn = v.norm();
    if (rn == 0.0 || vn == 0.0) throw singularity_error("gamma: zero vector argument");
    return (r / rn).dot(rotation(theta) * (v / vn));
}

// v_j(t) averaged over the agent's in-neighborhood including itself.
inline Vec2 mean_neighborhood_velocity(const FlockState& state, int i, const CommGraph& graph) {
    Vec2 acc = state.velocities.row(i).transpose();
    int count = 1;
    for (int j : graph.in_neighbors.at(i)) {
        acc += state.velocities.row(j).transpose();
        ++count;
    }
    return acc / count;
}

// The synthetic relative velocity -v_ij = v_ji of the obstacle agent as seen
// from the follower. r_ji points from the follower to the obstacle agent.
// When the follower drifts toward the obstacle agent only mildly
// (-alpha2 <= gamma <= 0) the vector pulls it into an orbit; otherwise it
// deflects tangentially, the side picked by the pi/2 discriminant with
// sgn(0) taken as +1. A zero mean velocity yields the zero vector.
inline Vec2 avoidance_relative_velocity(const Vec2& r_ji, const Vec2& v_bar,
                                        const AvoidanceParams& p) {
    if (v_bar.squaredNorm() == 0.0) return Vec2::Zero();
    const double g0 = gamma(r_ji, v_bar, 0.0);
    const double a1 = p.alpha1(r_ji.norm(), v_bar.norm());
    const Vec2 r_hat = r_ji / r_ji.norm();
    if (-p.alpha2 <= g0 && g0 <= 0.0) return a1 * r_hat;
    // gamma(r, v, pi/2) written out exactly so that sgn sees a true zero when
    // r and v are parallel: Rot(pi/2) v = (-v_y, v_x).
    const Vec2 v_hat = v_bar / v_bar.norm();
    const double g_perp = -r_hat.x() * v_hat.y() + r_hat.y() * v_hat.x();
    const double sign = g_perp >= 0.0 ? 1.0 : -1.0;
    return a1 * (-sign) * (rotation(p.alpha_theta) * r_hat);
}

enum class Outcome { Disconnected, Collision, Passed, Cap };

inline const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Disconnected: return "DISCONNECTED";
        case Outcome::Collision: return "COLLISION";
        case Outcome::Passed: return "PASSED";
        case Outcome::Cap: return "CAP";
    }
    return "?";
}

struct TerminationOutcome {
    Outcome outcome = Outcome::Cap;
    int step = 0;
    std::string detail;
};

// A controller usable in every scenario. The analytic kinds work from the
// per-step message lists; the network kind additionally carries the
// time-delayed histories between steps.
struct Controller {
    enum class Kind { Expert, TannerFixed, TannerDynamic, Net };

    Kind kind = Kind::Expert;
    PotentialSpec potential;
    double clamp = 10.0;
    CommGraph fixed_graph;  // TannerFixed only
    NetParams net;          // Net only
    std::vector<AgentHistory> histories;

    static Controller expert(const PotentialSpec& pot, double clamp) {
        Controller c;
        c.kind = Kind::Expert;
        c.potential = pot;
        c.clamp = clamp;
        return c;
    }
    static Controller tanner_fixed(CommGraph graph, const PotentialSpec& pot, double clamp) {
        Controller c;
        c.kind = Kind::TannerFixed;
        c.potential = pot;
        c.clamp = clamp;
        c.fixed_graph = std::move(graph);
        return c;
    }
    static Controller tanner_dynamic(const PotentialSpec& pot, double clamp) {
        Controller c;
        c.kind = Kind::TannerDynamic;
        c.potential = pot;
        c.clamp = clamp;
        return c;
    }
    static Controller from_net(NetParams params, const PotentialSpec& pot, double clamp) {
        Controller c;
        c.kind = Kind::Net;
        c.potential = pot;
        c.clamp = clamp;
        c.net = std::move(params);
        return c;
    }

    bool is_net() const { return kind == Kind::Net; }

    void reset(int total_agents) {
        if (is_net())
            histories.assign(total_agents, AgentHistory::zero(net.history_depth));
        else
            histories.clear();
    }
};

namespace detail {

// One world snapshot for scenario stepping: flock agents first, then any
// static obstacle agents.
struct World {
    const FlockState* flock;
    const MatX2* obstacle_pos;  // may be null
    int n_flock;
    int n_total;

    Vec2 position(int a) const {
        if (a < n_flock) return flock->positions.row(a).transpose();
        return obstacle_pos->row(a - n_flock).transpose();
    }
    Vec2 velocity(int a) const {
        if (a < n_flock) return flock->velocities.row(a).transpose();
        return Vec2::Zero();
    }
    bool is_obstacle(int a) const { return a >= n_flock; }
};

inline MatX2 stacked_positions(const World& w) {
    MatX2 pos(w.n_total, 2);
    pos.topRows(w.n_flock) = w.flock->positions;
    if (w.obstacle_pos) pos.bottomRows(w.n_total - w.n_flock) = *w.obstacle_pos;
    return pos;
}

// Message lists per receiver. Net and dynamic-analytic controllers receive
// along the communication graph; the centralized expert hears every flock
// agent plus any obstacle agents in radio range. With the avoidance
// technique on, the velocity slot of the message from each follower's
// closest obstacle agent carries the negated synthetic relative velocity.
inline std::vector<std::vector<Message>> scenario_messages(
    const World& w, const CommGraph& graph, const Controller& ctrl,
    const std::vector<bool>& is_leader, bool technique_on, const AvoidanceParams& avoid,
    double comm_radius) {
    std::vector<std::vector<Message>> msgs(w.n_total);
    const bool centralized = ctrl.kind == Controller::Kind::Expert;

    for (int i = 0; i < w.n_flock; ++i) {
        std::vector<int> senders;
        if (centralized) {
            if (is_leader[i]) continue;  // leaders receive nothing
            for (int j = 0; j < w.n_flock; ++j)
                if (j != i) senders.push_back(j);
            for (int j = w.n_flock; j < w.n_total; ++j)
                if ((w.position(i) - w.position(j)).norm() <= comm_radius) senders.push_back(j);
        } else if (ctrl.kind == Controller::Kind::TannerFixed) {
            senders = ctrl.fixed_graph.in_neighbors.at(i);
        } else {
            senders = graph.in_neighbors[i];
        }

        int closest_obstacle = -1;
        double closest_d = std::numeric_limits<double>::infinity();
        const Vec2 xi = w.position(i);
        for (int j : senders) {
            Message m;
            m.r = xi - w.position(j);
            m.v = w.velocity(i) - w.velocity(j);
            msgs[i].push_back(m);
            if (w.is_obstacle(j)) {
                const double d = m.r.norm();
                if (d < closest_d) {
                    closest_d = d;
                    closest_obstacle = static_cast<int>(msgs[i].size()) - 1;
                }
            }
        }
        if (technique_on && closest_obstacle >= 0 && !is_leader[i]) {
            // v-bar averages the follower and its flock in-neighbors only.
            Vec2 vbar = w.velocity(i);
            int count = 1;
            for (int j : graph.in_neighbors[i]) {
                if (w.is_obstacle(j)) continue;
                vbar += w.velocity(j);
                ++count;
            }
            vbar /= count;
            const Vec2 r_ji = -msgs[i][closest_obstacle].r;
            msgs[i][closest_obstacle].v = -avoidance_relative_velocity(r_ji, vbar, avoid);
        }
    }
    return msgs;
}

// Accelerations of the flock agents; leaders stay at zero.
inline MatX2 controller_accels(Controller& ctrl, const World& w, const CommGraph& graph,
                               const std::vector<std::vector<Message>>& msgs,
                               const std::vector<bool>& is_leader) {
    MatX2 accels = MatX2::Zero(w.n_flock, 2);
    if (ctrl.is_net()) {
        ctrl.histories =
            aggregate_history(ctrl.histories, graph, msgs, aggregation_for(ctrl.net.arch));
        for (int i = 0; i < w.n_flock; ++i)
            if (!is_leader[i]) accels.row(i) = forward(ctrl.net, ctrl.histories[i]).transpose();
    } else {
        for (int i = 0; i < w.n_flock; ++i)
            if (!is_leader[i])
                accels.row(i) = tanner_accel(msgs[i], ctrl.potential, ctrl.clamp).transpose();
    }
    return accels;
}

}  // namespace detail

struct ScenarioRun {
    MetricsTrace trace;
    FlockState final_state;
};

// Leader-following run; with no leaders this is a plain flocking rollout.
// Leaders never accelerate and never receive, so their summaries stay zero
// and their velocities are bitwise constant. Trace rows record the state
// seen at each step together with the acceleration applied there.
inline ScenarioRun leader_follow_sim(FlockState state, const LeaderSpec& spec, Controller& ctrl,
                                     int steps, const SimConfig& cfg) {
    cfg.validate();
    const int n = state.n();
    std::vector<bool> is_leader(n, false);
    for (int l : spec.leaders) {
        if (l < 0 || l >= n) throw input_error("leader_follow_sim: leader index out of range");
        if (!spec.velocity.allFinite()) throw input_error("leader_follow_sim: leader velocity");
        is_leader[l] = true;
        state.velocities.row(l) = spec.velocity.transpose();
    }
    ctrl.reset(n);
    const AvoidanceParams no_avoid;

    ScenarioRun run;
    for (int t = 0; t < steps; ++t) {
        const CommGraph base = comm_graph(state, cfg.comm_radius);
        CommGraph g = base;
        suppress_incoming(g, spec.leaders);
        detail::World w{&state, nullptr, n, n};
        const auto msgs =
            detail::scenario_messages(w, g, ctrl, is_leader, false, no_avoid, cfg.comm_radius);
        const MatX2 accels = detail::controller_accels(ctrl, w, g, msgs, is_leader);

        MetricsTrace::Row row;
        row.step = t;
        row.time = state.time;
        row.vel_var = velocity_variance(state);
        row.mean_accel_norm = mean_accel_norm(accels);
        row.connected = is_connected(base);
        row.min_dist = n >= 2 ? min_pairwise_distance(state) : 0.0;
        if (!spec.leaders.empty()) row.mlvd = mlvd(state, spec.velocity);
        if (n >= 2 && row.min_dist < cfg.min_dist) ++run.trace.collision_events;
        run.trace.rows.push_back(row);

        state = step(state, accels, cfg.dt);
    }
    run.final_state = std::move(state);
    return run;
}

struct ObstacleScenario {
    Obstacle obstacle;
    LeaderSpec leaders;
    FlockState state;  // velocities already pointed at the obstacle
};

// Places a polygon obstacle on the perpendicular bisector of the flock's
// diameter pair, beyond sensing range of every agent, aims the whole flock
// at its center, and picks two leaders whose straight paths keep at least
// `clearance` away from the obstacle boundary.
inline ObstacleScenario build_obstacle(const FlockState& input, int sides, double side_len,
                                       double comm_radius, double clearance, Rng& rng) {
    if (sides < 3) throw input_error("build_obstacle: polygon needs at least 3 sides");
    if (input.n() < 2) throw input_error("build_obstacle: need at least two agents");

    const auto [i_star, j_star, diameter] = flock_diameter_pair(input);
    (void)diameter;
    const Vec2 a = input.positions.row(i_star).transpose();
    const Vec2 b = input.positions.row(j_star).transpose();
    const Vec2 mid = 0.5 * (a + b);
    Vec2 axis = b - a;
    if (axis.norm() == 0.0) throw input_error("build_obstacle: coincident diameter pair");
    const Vec2 normal = Vec2(-axis.y(), axis.x()) / axis.norm();

    Obstacle obs;
    obs.sides = sides;
    obs.side_len = side_len;
    const double rho = obs.circumradius();

    double reach = 0.0;
    for (int i = 0; i < input.n(); ++i)
        reach = std::max(reach, (input.positions.row(i).transpose() - mid).norm());

    const int max_retries = 1000;
    for (int attempt = 0; attempt < max_retries; ++attempt) {
        const double side = rng.coin(0.5) ? 1.0 : -1.0;
        const double dist = reach + rho + comm_radius + rng.uniform(0.05, 0.25);
        const Vec2 center = mid + side * dist * normal;

        double min_center_dist = std::numeric_limits<double>::infinity();
        for (int i = 0; i < input.n(); ++i)
            min_center_dist =
                std::min(min_center_dist, (input.positions.row(i).transpose() - center).norm());
        if (!(min_center_dist > rho + comm_radius)) continue;

        const Vec2 heading = (center - mid).normalized();

        std::vector<int> eligible;
        for (int i = 0; i < input.n(); ++i) {
            const Vec2 w = center - input.positions.row(i).transpose();
            const double along = w.dot(heading);
            const double closest =
                along <= 0.0 ? w.norm() : std::sqrt(std::max(0.0, w.squaredNorm() - along * along));
            if (closest >= rho + clearance) eligible.push_back(i);
        }
        if (eligible.size() < 2) continue;

        ObstacleScenario out;
        obs.center = center;
        out.obstacle = obs;
        const std::size_t p = rng.uniform_int(eligible.size());
        std::size_t q = rng.uniform_int(eligible.size() - 1);
        if (q >= p) ++q;
        out.leaders.leaders = {eligible[p], eligible[q]};
        out.leaders.velocity = heading;
        out.state = input;
        for (int i = 0; i < input.n(); ++i) out.state.velocities.row(i) = heading.transpose();
        return out;
    }
    throw generation_error("build_obstacle: no placement with two eligible leaders", max_retries);
}

struct ObstacleSimConfig {
    SimConfig sim;
    double collision_dist = 0.1;  // R_min
    int t_passed = 10;
    long step_cap = 100000;
    bool technique_on = true;
    AvoidanceParams avoidance;
    double polygon_phase = 0.0;
};

struct ObstacleRun {
    TerminationOutcome outcome;
    MetricsTrace trace;
};

// Runs the obstacle scenario until one termination condition fires:
//  1. disconnected communication graph (flock-only while the obstacle disk is
//     out of range, flock plus obstacle agents otherwise),
//  2. collision (flock pair or flock-obstacle-agent pair closer than R_min,
//     or an agent inside the disk),
//  3. passed (the flock-to-obstacle-agent distance exceeded the radio range
//     for t_passed consecutive steps after once being within it),
// with a hard step cap reported as its own outcome. Obstacle agents send
// position-only messages and receive nothing; leaders receive nothing.
inline ObstacleRun obstacle_sim(const ObstacleScenario& scenario, Controller& ctrl,
                                const ObstacleSimConfig& cfg) {
    cfg.sim.validate();
    FlockState state = scenario.state;
    const int n = state.n();
    const MatX2 obstacle_pos = scenario.obstacle.vertices(cfg.polygon_phase);
    const int s = scenario.obstacle.sides;
    const int total = n + s;
    const double rho = scenario.obstacle.circumradius();
    const double radius = cfg.sim.comm_radius;

    std::vector<bool> is_leader(n, false);
    for (int l : scenario.leaders.leaders) is_leader[l] = true;
    for (int l : scenario.leaders.leaders)
        state.velocities.row(l) = scenario.leaders.velocity.transpose();

    std::vector<int> flock_subset(n);
    for (int i = 0; i < n; ++i) flock_subset[i] = i;
    std::vector<int> full_subset(total);
    for (int i = 0; i < total; ++i) full_subset[i] = i;
    std::vector<int> suppressed = scenario.leaders.leaders;
    for (int k = 0; k < s; ++k) suppressed.push_back(n + k);

    ctrl.reset(total);
    ObstacleRun run;
    bool was_within = false;
    int steps_beyond = 0;

    for (long t = 0;; ++t) {
        if (t >= cfg.step_cap) {
            run.outcome = {Outcome::Cap, static_cast<int>(t), "step cap reached"};
            return run;
        }
        MatX2 all_pos(total, 2);
        all_pos.topRows(n) = state.positions;
        all_pos.bottomRows(s) = obstacle_pos;
        // connectivity is judged on the radio graph; the suppressed copy only
        // shapes who hears whom
        const CommGraph base = comm_graph(all_pos, radius);
        CommGraph g = base;
        suppress_incoming(g, suppressed);

        double min_disk = std::numeric_limits<double>::infinity();
        double min_agent_obs = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            const double to_center = (state.positions.row(i).transpose() - scenario.obstacle.center).norm();
            min_disk = std::min(min_disk, to_center - rho);
            for (int k = 0; k < s; ++k)
                min_agent_obs = std::min(
                    min_agent_obs, (state.positions.row(i) - obstacle_pos.row(k)).norm());
        }

        const bool connected = min_disk > radius ? is_connected(base, flock_subset)
                                                 : is_connected(base, full_subset);
        if (!connected) {
            run.outcome = {Outcome::Disconnected, static_cast<int>(t), "communication graph split"};
            return run;
        }

        const double min_flock = n >= 2 ? min_pairwise_distance(state) :
            std::numeric_limits<double>::infinity();
        if (min_flock < cfg.collision_dist || min_agent_obs < cfg.collision_dist ||
            min_disk <= 0.0) {
            run.outcome = {Outcome::Collision, static_cast<int>(t), "separation violated"};
            return run;
        }

        if (min_agent_obs <= radius) {
            was_within = true;
            steps_beyond = 0;
        } else if (was_within) {
            ++steps_beyond;
            if (steps_beyond >= cfg.t_passed) {
                run.outcome = {Outcome::Passed, static_cast<int>(t), "obstacle cleared"};
                return run;
            }
        }

        detail::World w{&state, &obstacle_pos, n, total};
        const auto msgs = detail::scenario_messages(w, g, ctrl, is_leader, cfg.technique_on,
                                                    cfg.avoidance, radius);
        const MatX2 accels = detail::controller_accels(ctrl, w, g, msgs, is_leader);

        MetricsTrace::Row row;
        row.step = static_cast<int>(t);
        row.time = state.time;
        row.vel_var = velocity_variance(state);
        row.mean_accel_norm = mean_accel_norm(accels);
        row.connected = connected;
        row.min_dist = min_flock;
        row.mlvd = mlvd(state, scenario.leaders.velocity);
        run.trace.rows.push_back(row);

        state = step(state, accels, cfg.sim.dt);
    }
}

}  // namespace swarmlab
