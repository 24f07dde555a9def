#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "swarmlab/errors.hpp"
#include "swarmlab/io.hpp"

namespace swarmlab {

// All knobs of a run, loadable from one JSON config file. Every key is
// optional; absent keys take the defaults below, and the effective config is
// echoed into the output directory for provenance.
struct RunConfig {
    // shared simulation parameters
    std::string scenario = "flocking";  // flocking | leader | obstacle
    std::string controller = "expert";  // expert | tanner-fixed | tanner-dynamic | net tags
    int n_agents = 100;
    double dt = 1e-3;
    int steps = 2000;
    int seeds = 50;  // evaluation seeds / generated initial conditions
    double comm_radius = 1.0;
    double min_dist = 0.1;
    int deg_min = 2;
    double vmax = 3.0;
    double accel_clamp = 10.0;  // beta
    int history_depth = 3;      // K
    std::string checkpoint;    // trained-network file for net controllers
    std::string dataset_dir;   // initial-condition bank to reuse, optional
    bool write_traces = true;

    struct Train {
        int epochs = 400;
        int steps = 200;
        double dt = 1e-2;
        int buffer = 10000;
        int batches_per_epoch = 200;
        int batch_size = 20;
        double lr = 5e-5;
        double adam_beta1 = 0.9;
        double adam_beta2 = 0.999;
        double adam_eps = 1e-8;
        double p0 = 0.993;
        double p_decay = 0.993;
        double p_floor = 0.5;
        int validate_every = 40;
        int init_bank = 20;
        int val_bank = 10;
        std::string resume;  // training-state file to continue from
    } train;

    struct Ffbc {
        int sims = 10;
        int steps = 200;
        double dt = 1e-2;
        int epochs = 50;
        double c_l = 2.0;
        double delta = 1e-3;
        double lr = 5e-5;
        double train_fraction = 0.5;
    } ffbc;

    struct ObstacleCfg {
        std::vector<int> sides = {12};  // polygon side counts; side length = min_dist
        int t_passed = 10;
        long step_cap = 100000;
        double alpha2 = 0.5;
        double alpha_theta = 1.5707963267948966;
        double clearance = 0.1;  // R_min for leader eligibility and collisions
    } obstacle;

    struct Leader {
        int count = 2;
    } leader;

    struct Bound {
        std::string checkpoint;
        std::string train_dataset;
        std::string test_dataset;
    } bound;

    void validate() const {
        if (scenario != "flocking" && scenario != "leader" && scenario != "obstacle")
            throw config_error("config: unknown scenario '" + scenario + "'");
        if (n_agents < 2) throw config_error("config: n_agents must be >= 2");
        if (!(dt > 0.0) || !(train.dt > 0.0) || !(ffbc.dt > 0.0))
            throw config_error("config: time steps must be > 0");
        if (steps < 1 || train.steps < 1 || ffbc.steps < 1)
            throw config_error("config: step counts must be >= 1");
        if (seeds < 1) throw config_error("config: seeds must be >= 1");
        if (!(comm_radius > 0.0)) throw config_error("config: comm_radius must be > 0");
        if (!(min_dist >= 0.0) || !(min_dist < comm_radius))
            throw config_error("config: need 0 <= min_dist < comm_radius");
        if (deg_min < 0) throw config_error("config: deg_min must be >= 0");
        if (vmax < 0.0) throw config_error("config: vmax must be >= 0");
        if (!(accel_clamp > 0.0)) throw config_error("config: accel_clamp must be > 0");
        if (history_depth < 1) throw config_error("config: history_depth must be >= 1");
        if (train.epochs < 1 || train.batches_per_epoch < 1 || train.batch_size < 1 ||
            train.buffer < 1 || train.init_bank < 1 || train.val_bank < 0 ||
            train.validate_every < 1)
            throw config_error("config: train block values out of range");
        if (!(train.p0 > 0.0 && train.p0 <= 1.0) || !(train.p_decay > 0.0 && train.p_decay <= 1.0) ||
            !(train.p_floor >= 0.0 && train.p_floor <= 1.0))
            throw config_error("config: DAgger schedule values out of range");
        if (ffbc.sims < 1 || ffbc.epochs < 1) throw config_error("config: ffbc block out of range");
        if (!(ffbc.c_l > 0.0)) throw config_error("config: ffbc.c_l must be > 0");
        if (!(ffbc.delta > 0.0 && ffbc.delta < 1.0))
            throw config_error("config: ffbc.delta must be in (0,1)");
        if (!(ffbc.train_fraction > 0.0 && ffbc.train_fraction < 1.0))
            throw config_error("config: ffbc.train_fraction must be in (0,1)");
        if (obstacle.sides.empty()) throw config_error("config: obstacle.sides must be non-empty");
        for (int s : obstacle.sides)
            if (s < 3) throw config_error("config: polygon needs at least 3 sides");
        if (obstacle.t_passed < 1) throw config_error("config: obstacle.t_passed must be >= 1");
        if (obstacle.step_cap < 1) throw config_error("config: obstacle.step_cap must be >= 1");
        if (!(obstacle.alpha2 >= 0.0 && obstacle.alpha2 <= 1.0))
            throw config_error("config: obstacle.alpha2 must be in [0,1]");
        if (!(obstacle.alpha_theta >= 0.0 && obstacle.alpha_theta <= M_PI / 2 + 1e-12))
            throw config_error("config: obstacle.alpha_theta must be in [0, pi/2]");
        if (leader.count < 0 || leader.count > n_agents)
            throw config_error("config: leader.count out of range");
    }
};

namespace detail {

template <typename T>
void get_to_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    using detail::get_to_if;
    get_to_if(j, "scenario", c.scenario);
    get_to_if(j, "controller", c.controller);
    get_to_if(j, "n_agents", c.n_agents);
    get_to_if(j, "dt", c.dt);
    get_to_if(j, "steps", c.steps);
    get_to_if(j, "seeds", c.seeds);
    get_to_if(j, "comm_radius", c.comm_radius);
    get_to_if(j, "min_dist", c.min_dist);
    get_to_if(j, "deg_min", c.deg_min);
    get_to_if(j, "vmax", c.vmax);
    get_to_if(j, "accel_clamp", c.accel_clamp);
    get_to_if(j, "history_depth", c.history_depth);
    get_to_if(j, "checkpoint", c.checkpoint);
    get_to_if(j, "dataset_dir", c.dataset_dir);
    get_to_if(j, "write_traces", c.write_traces);
    if (j.contains("train")) {
        const auto& t = j.at("train");
        get_to_if(t, "epochs", c.train.epochs);
        get_to_if(t, "steps", c.train.steps);
        get_to_if(t, "dt", c.train.dt);
        get_to_if(t, "buffer", c.train.buffer);
        get_to_if(t, "batches_per_epoch", c.train.batches_per_epoch);
        get_to_if(t, "batch_size", c.train.batch_size);
        get_to_if(t, "lr", c.train.lr);
        get_to_if(t, "adam_beta1", c.train.adam_beta1);
        get_to_if(t, "adam_beta2", c.train.adam_beta2);
        get_to_if(t, "adam_eps", c.train.adam_eps);
        get_to_if(t, "p0", c.train.p0);
        get_to_if(t, "p_decay", c.train.p_decay);
        get_to_if(t, "p_floor", c.train.p_floor);
        get_to_if(t, "validate_every", c.train.validate_every);
        get_to_if(t, "init_bank", c.train.init_bank);
        get_to_if(t, "val_bank", c.train.val_bank);
        get_to_if(t, "resume", c.train.resume);
    }
    if (j.contains("ffbc")) {
        const auto& f = j.at("ffbc");
        get_to_if(f, "sims", c.ffbc.sims);
        get_to_if(f, "steps", c.ffbc.steps);
        get_to_if(f, "dt", c.ffbc.dt);
        get_to_if(f, "epochs", c.ffbc.epochs);
        get_to_if(f, "c_l", c.ffbc.c_l);
        get_to_if(f, "delta", c.ffbc.delta);
        get_to_if(f, "lr", c.ffbc.lr);
        get_to_if(f, "train_fraction", c.ffbc.train_fraction);
    }
    if (j.contains("obstacle")) {
        const auto& o = j.at("obstacle");
        get_to_if(o, "sides", c.obstacle.sides);
        get_to_if(o, "t_passed", c.obstacle.t_passed);
        get_to_if(o, "step_cap", c.obstacle.step_cap);
        get_to_if(o, "alpha2", c.obstacle.alpha2);
        get_to_if(o, "alpha_theta", c.obstacle.alpha_theta);
        get_to_if(o, "clearance", c.obstacle.clearance);
    }
    if (j.contains("leader")) detail::get_to_if(j.at("leader"), "count", c.leader.count);
    if (j.contains("bound")) {
        const auto& b = j.at("bound");
        get_to_if(b, "checkpoint", c.bound.checkpoint);
        get_to_if(b, "train_dataset", c.bound.train_dataset);
        get_to_if(b, "test_dataset", c.bound.test_dataset);
    }
    return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["scenario"] = c.scenario;
    j["controller"] = c.controller;
    j["n_agents"] = c.n_agents;
    j["dt"] = c.dt;
    j["steps"] = c.steps;
    j["seeds"] = c.seeds;
    j["comm_radius"] = c.comm_radius;
    j["min_dist"] = c.min_dist;
    j["deg_min"] = c.deg_min;
    j["vmax"] = c.vmax;
    j["accel_clamp"] = c.accel_clamp;
    j["history_depth"] = c.history_depth;
    j["checkpoint"] = c.checkpoint;
    j["dataset_dir"] = c.dataset_dir;
    j["write_traces"] = c.write_traces;
    j["train"] = {{"epochs", c.train.epochs},
                  {"steps", c.train.steps},
                  {"dt", c.train.dt},
                  {"buffer", c.train.buffer},
                  {"batches_per_epoch", c.train.batches_per_epoch},
                  {"batch_size", c.train.batch_size},
                  {"lr", c.train.lr},
                  {"adam_beta1", c.train.adam_beta1},
                  {"adam_beta2", c.train.adam_beta2},
                  {"adam_eps", c.train.adam_eps},
                  {"p0", c.train.p0},
                  {"p_decay", c.train.p_decay},
                  {"p_floor", c.train.p_floor},
                  {"validate_every", c.train.validate_every},
                  {"init_bank", c.train.init_bank},
                  {"val_bank", c.train.val_bank},
                  {"resume", c.train.resume}};
    j["ffbc"] = {{"sims", c.ffbc.sims},         {"steps", c.ffbc.steps},
                 {"dt", c.ffbc.dt},             {"epochs", c.ffbc.epochs},
                 {"c_l", c.ffbc.c_l},           {"delta", c.ffbc.delta},
                 {"lr", c.ffbc.lr},             {"train_fraction", c.ffbc.train_fraction}};
    j["obstacle"] = {{"sides", c.obstacle.sides},
                     {"t_passed", c.obstacle.t_passed},
                     {"step_cap", c.obstacle.step_cap},
                     {"alpha2", c.obstacle.alpha2},
                     {"alpha_theta", c.obstacle.alpha_theta},
                     {"clearance", c.obstacle.clearance}};
    j["leader"] = {{"count", c.leader.count}};
    j["bound"] = {{"checkpoint", c.bound.checkpoint},
                  {"train_dataset", c.bound.train_dataset},
                  {"test_dataset", c.bound.test_dataset}};
    return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config parse error in " + path.string() + ": " + e.what());
    }
    RunConfig c;
    try {
        c = config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config type error in " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

inline std::string effective_config_text(const RunConfig& c) {
    return config_to_json(c).dump(2) + "\n";
}

}  // namespace swarmlab
