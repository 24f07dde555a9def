#pragma once

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "swarmlab/analysis.hpp"
#include "swarmlab/config.hpp"
#include "swarmlab/errors.hpp"
#include "swarmlab/flock.hpp"
#include "swarmlab/io.hpp"
#include "swarmlab/learning.hpp"
#include "swarmlab/net.hpp"
#include "swarmlab/parallel.hpp"
#include "swarmlab/scenarios.hpp"
#include "swarmlab/svg.hpp"

namespace swarmlab::cli {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out = "out";
    int jobs = 1;
};

inline RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    cfg.validate();
    return cfg;
}

inline void echo_config(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_file(out_dir / "effective-config.json", effective_config_text(cfg));
}

inline RandomDiskParams disk_params(const RunConfig& cfg) {
    RandomDiskParams p;
    p.n = cfg.n_agents;
    p.min_dist = cfg.min_dist;
    p.comm_radius = cfg.comm_radius;
    p.deg_min = cfg.deg_min;
    p.vmax = cfg.vmax;
    return p;
}

// Initial conditions: either freshly drawn substreams of the run seed or the
// ic_*.csv bank under dataset_dir.
inline std::vector<FlockState> initial_conditions(const RunConfig& cfg, std::uint64_t seed,
                                                  int count, std::uint64_t stream_base) {
    std::vector<FlockState> bank(count);
    if (!cfg.dataset_dir.empty()) {
        for (int i = 0; i < count; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "ic_%04d.csv", i);
            bank[i] = read_flock_csv(fs::path(cfg.dataset_dir) / name);
        }
        return bank;
    }
    const RandomDiskParams p = disk_params(cfg);
    for (int i = 0; i < count; ++i) {
        Rng rng = derive_stream(seed, stream_base + static_cast<std::uint64_t>(i));
        bank[i] = random_disk_init(p, rng);
    }
    return bank;
}

inline bool is_net_tag(const std::string& tag) {
    return tag == "tdagnn" || tag == "tdagnn-tf" || tag == "tdagnn-tf-mu" || tag == "etdagnn";
}

// Controller prototype from the config; per-run copies carry the state.
inline Controller controller_prototype(const RunConfig& cfg) {
    const PotentialSpec pot{cfg.comm_radius};
    if (cfg.controller == "expert") return Controller::expert(pot, cfg.accel_clamp);
    if (cfg.controller == "tanner-dynamic") return Controller::tanner_dynamic(pot, cfg.accel_clamp);
    if (cfg.controller == "tanner-fixed")
        return Controller::tanner_fixed(CommGraph{}, pot, cfg.accel_clamp);
    if (is_net_tag(cfg.controller)) {
        if (cfg.checkpoint.empty())
            throw config_error("controller '" + cfg.controller + "' needs a checkpoint");
        NetParams net = read_checkpoint(cfg.checkpoint);
        if (std::string(arch_tag(net.arch)) != cfg.controller)
            throw config_error("checkpoint architecture does not match controller tag");
        return Controller::from_net(std::move(net), pot, cfg.accel_clamp);
    }
    throw config_error("unknown controller '" + cfg.controller + "'");
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// ---- gen-dataset ----

inline int cmd_gen_dataset(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const fs::path out(args.out);
    echo_config(cfg, out);
    const RandomDiskParams p = disk_params(cfg);

    std::vector<FlockState> bank(cfg.seeds);
    parallel_for(args.jobs, cfg.seeds, [&](int i) {
        Rng rng = derive_stream(args.seed, static_cast<std::uint64_t>(i));
        bank[i] = random_disk_init(p, rng);
    });
    for (int i = 0; i < cfg.seeds; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "ic_%04d.csv", i);
        write_flock_csv(out / name, bank[i], args.seed);
    }
    nlohmann::json manifest;
    manifest["command"] = "gen-dataset";
    manifest["seed"] = args.seed;
    manifest["n_conditions"] = cfg.seeds;
    manifest["n_agents"] = cfg.n_agents;
    manifest["min_dist"] = cfg.min_dist;
    manifest["comm_radius"] = cfg.comm_radius;
    manifest["deg_min"] = cfg.deg_min;
    manifest["vmax"] = cfg.vmax;
    manifest["accel_clamp"] = cfg.accel_clamp;
    manifest["config_hash"] = fnv1a(effective_config_text(cfg));
    write_file(out / "manifest.json", manifest.dump(2) + "\n");
    std::printf("gen-dataset: wrote %d initial conditions to %s\n", cfg.seeds,
                out.string().c_str());
    return 0;
}

// ---- train (DAgger) ----

namespace detail {

inline std::string matrix_block(const Eigen::MatrixXd& m) {
    std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            out += fmt17(m(r, c));
            out += (c + 1 == m.cols()) ? '\n' : ' ';
        }
    }
    return out;
}

inline Eigen::MatrixXd read_matrix_block(std::istream& is) {
    int rows, cols;
    if (!(is >> rows >> cols)) throw config_error("training state: bad matrix block");
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (!(is >> m(r, c))) throw config_error("training state: truncated matrix");
    return m;
}

inline std::string section(const std::string& name, const std::string& body) {
    return name + " " + std::to_string(body.size()) + "\n" + body;
}

inline std::string read_section(std::istream& is, const std::string& expect) {
    std::string name;
    std::size_t size;
    if (!(is >> name >> size) || name != expect)
        throw config_error("training state: expected section '" + expect + "'");
    is.ignore(1);  // newline after the header
    std::string body(size, '\0');
    is.read(body.data(), static_cast<std::streamsize>(size));
    if (is.gcount() != static_cast<std::streamsize>(size))
        throw config_error("training state: truncated section '" + expect + "'");
    return body;
}

}  // namespace detail

// Complete resumable training state. Everything the epoch loop carries is
// captured: weights, Adam moments, replay buffer, epoch counter, rng state.
inline std::string trainer_state_to_string(const DaggerTrainerState& st, const Rng& rng) {
    std::string out = "swarmstate-v1\n";
    out += "epoch " + std::to_string(st.next_epoch) + "\n";
    out += "adam_t " + std::to_string(st.adam_t) + "\n";
    std::ostringstream rng_text;
    rng.save(rng_text);
    out += detail::section("rng", rng_text.str() + "\n");
    out += detail::section("params", checkpoint_to_string(st.params));
    std::string adam;
    for (std::size_t l = 0; l < st.params.layers.size(); ++l) {
        adam += detail::matrix_block(st.adam.m_w[l]);
        adam += detail::matrix_block(st.adam.v_w[l]);
        adam += detail::matrix_block(st.adam.m_b[l]);
        adam += detail::matrix_block(st.adam.v_b[l]);
    }
    out += detail::section("adam", adam);
    std::vector<TrainingTuple> tuples;
    for (std::size_t i = 0; i < st.buffer.size(); ++i) tuples.push_back(st.buffer[i]);
    out += detail::section("buffer",
                           dataset_to_string(tuples, st.params.history_depth, "state"));
    return out;
}

inline DaggerTrainerState trainer_state_from_string(const std::string& text, Rng& rng,
                                                    std::size_t buffer_capacity) {
    std::istringstream is(text);
    std::string magic;
    if (!(is >> magic) || magic != "swarmstate-v1")
        throw config_error("training state: bad header");
    std::string word;
    int epoch;
    long adam_t;
    if (!(is >> word >> epoch) || word != "epoch")
        throw config_error("training state: missing epoch");
    if (!(is >> word >> adam_t) || word != "adam_t")
        throw config_error("training state: missing adam_t");

    std::istringstream rng_text(detail::read_section(is, "rng"));
    rng.load(rng_text);
    NetParams params = checkpoint_from_string(detail::read_section(is, "params"));
    DaggerTrainerState st(std::move(params), buffer_capacity);
    st.next_epoch = epoch;
    st.adam_t = adam_t;
    std::istringstream adam(detail::read_section(is, "adam"));
    for (std::size_t l = 0; l < st.params.layers.size(); ++l) {
        st.adam.m_w[l] = detail::read_matrix_block(adam);
        st.adam.v_w[l] = detail::read_matrix_block(adam);
        const Eigen::MatrixXd mb = detail::read_matrix_block(adam);
        const Eigen::MatrixXd vb = detail::read_matrix_block(adam);
        st.adam.m_b[l] = mb.cols() > 0 ? Eigen::VectorXd(mb.col(0)) : Eigen::VectorXd();
        st.adam.v_b[l] = vb.cols() > 0 ? Eigen::VectorXd(vb.col(0)) : Eigen::VectorXd();
    }
    const std::string buffer_text = detail::read_section(is, "buffer");
    {
        std::istringstream ds(buffer_text);
        std::string m2, tfield, kfield, mfield;
        if (!(ds >> m2 >> tfield >> kfield >> mfield) || m2 != "swarmdata-v1")
            throw config_error("training state: bad buffer header");
        const long count = std::stol(tfield.substr(tfield.find('=') + 1));
        const int depth = std::stoi(kfield.substr(kfield.find('=') + 1));
        for (long k = 0; k < count; ++k) {
            std::string w2, nfield;
            std::uint64_t draw_id;
            if (!(ds >> w2 >> draw_id >> nfield) || w2 != "tuple")
                throw config_error("training state: bad buffer tuple");
            const int n = std::stoi(nfield.substr(nfield.find('=') + 1));
            TrainingTuple t;
            t.draw_id = draw_id;
            t.positions.resize(n, 2);
            t.velocities.resize(n, 2);
            t.expert_accels.resize(n, 2);
            t.histories.assign(n, AgentHistory::zero(depth));
            for (int i = 0; i < n; ++i) {
                ds >> t.positions(i, 0) >> t.positions(i, 1) >> t.velocities(i, 0) >>
                    t.velocities(i, 1) >> t.expert_accels(i, 0) >> t.expert_accels(i, 1);
                auto& z = t.histories[i].z;
                for (int r = 0; r < z.rows(); ++r)
                    for (int c = 0; c < z.cols(); ++c) ds >> z(r, c);
            }
            if (!ds) throw config_error("training state: truncated buffer");
            st.buffer.push(std::move(t));
        }
    }
    return st;
}

inline std::string train_log_csv(const DaggerLog& log) {
    std::string out = "epoch,p,buffer_size,mean_batch_loss,sim_steps,aborted,val_vel_var\n";
    for (const auto& e : log.epochs) {
        out += std::to_string(e.epoch) + ',' + fmt17(e.p) + ',' + std::to_string(e.buffer_size) +
               ',' + fmt17(e.mean_batch_loss) + ',' + std::to_string(e.sim_steps) + ',' +
               (e.aborted ? '1' : '0') + ',' +
               (e.val_vel_var ? fmt17(*e.val_vel_var) : std::string()) + '\n';
    }
    return out;
}

inline int cmd_train(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    if (!is_net_tag(cfg.controller))
        throw config_error("train: controller must be one of the network tags");
    const fs::path out(args.out);
    echo_config(cfg, out);

    DaggerConfig dc;
    dc.epochs = cfg.train.epochs;
    dc.steps = cfg.train.steps;
    dc.dt = cfg.train.dt;
    dc.comm_radius = cfg.comm_radius;
    dc.accel_clamp = cfg.accel_clamp;
    dc.buffer_capacity = static_cast<std::size_t>(cfg.train.buffer);
    dc.batches_per_epoch = cfg.train.batches_per_epoch;
    dc.batch_size = cfg.train.batch_size;
    dc.lr = cfg.train.lr;
    dc.adam_beta1 = cfg.train.adam_beta1;
    dc.adam_beta2 = cfg.train.adam_beta2;
    dc.adam_eps = cfg.train.adam_eps;
    dc.validate_every = cfg.train.validate_every;
    dc.schedule = DaggerSchedule{cfg.train.p0, cfg.train.p_decay, cfg.train.p_floor};

    const auto init_bank = initial_conditions(cfg, args.seed, cfg.train.init_bank, 0x10000);
    const auto val_bank =
        cfg.train.val_bank > 0
            ? initial_conditions(cfg, args.seed, cfg.train.val_bank, 0x20000)
            : std::vector<FlockState>{};

    Rng rng = derive_stream(args.seed, 2);
    DaggerLog log;
    if (!cfg.train.resume.empty()) {
        DaggerTrainerState st =
            trainer_state_from_string(read_file(cfg.train.resume), rng, dc.buffer_capacity);
        if (std::string(arch_tag(st.params.arch)) != cfg.controller)
            throw config_error("train: resume state architecture does not match controller");
        log = dagger_train(st, dc, init_bank, val_bank, rng);
        write_checkpoint(out / "checkpoint.txt", st.params);
        write_file(out / "train_state.txt", trainer_state_to_string(st, rng));
    } else {
        NetParams net = make_net(arch_from_tag(cfg.controller), cfg.history_depth);
        Rng init_rng = derive_stream(args.seed, 1);
        xavier_init(net, 1.0, init_rng);
        DaggerTrainerState st(std::move(net), dc.buffer_capacity);
        log = dagger_train(st, dc, init_bank, val_bank, rng);
        write_checkpoint(out / "checkpoint.txt", st.params);
        write_file(out / "train_state.txt", trainer_state_to_string(st, rng));
    }
    write_file(out / "train_log.csv", train_log_csv(log));

    nlohmann::json manifest;
    manifest["command"] = "train";
    manifest["seed"] = args.seed;
    manifest["controller"] = cfg.controller;
    manifest["epochs"] = cfg.train.epochs;
    manifest["accel_clamp"] = cfg.accel_clamp;
    manifest["aborted_sims"] = log.aborted_sims;
    manifest["config_hash"] = fnv1a(effective_config_text(cfg));
    write_file(out / "manifest.json", manifest.dump(2) + "\n");
    std::printf("train: %zu epochs logged, checkpoint at %s\n", log.epochs.size(),
                (out / "checkpoint.txt").string().c_str());
    return 0;
}

// ---- evaluation commands ----

namespace detail {

struct EvalResult {
    std::vector<ScenarioRun> runs;
};

inline std::string summary_csv(const std::vector<ScenarioRun>& runs, bool with_mlvd) {
    std::string out = "step,time,vel_var_med,vel_var_q1,vel_var_q3,accel_med,accel_q1,accel_q3,"
                      "connected_frac,min_dist_med";
    if (with_mlvd) out += ",mlvd_med,mlvd_q1,mlvd_q3";
    out += '\n';
    if (runs.empty()) return out;
    const std::size_t steps = runs[0].trace.rows.size();
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> vv, an, md, mv;
        double connected = 0.0;
        for (const auto& r : runs) {
            vv.push_back(r.trace.rows[t].vel_var);
            an.push_back(r.trace.rows[t].mean_accel_norm);
            md.push_back(r.trace.rows[t].min_dist);
            if (with_mlvd && r.trace.rows[t].mlvd) mv.push_back(*r.trace.rows[t].mlvd);
            connected += r.trace.rows[t].connected ? 1.0 : 0.0;
        }
        out += std::to_string(runs[0].trace.rows[t].step) + ',' +
               fmt17(runs[0].trace.rows[t].time) + ',' + fmt17(quantile(vv, 0.5)) + ',' +
               fmt17(quantile(vv, 0.25)) + ',' + fmt17(quantile(vv, 0.75)) + ',' +
               fmt17(quantile(an, 0.5)) + ',' + fmt17(quantile(an, 0.25)) + ',' +
               fmt17(quantile(an, 0.75)) + ',' + fmt17(connected / runs.size()) + ',' +
               fmt17(quantile(md, 0.5));
        if (with_mlvd)
            out += ',' + fmt17(quantile(mv, 0.5)) + ',' + fmt17(quantile(mv, 0.25)) + ',' +
                   fmt17(quantile(mv, 0.75));
        out += '\n';
    }
    return out;
}

inline void summary_plots(const fs::path& out, const std::vector<ScenarioRun>& runs,
                          const std::string& label, bool with_mlvd) {
    if (runs.empty()) return;
    const std::size_t steps = runs[0].trace.rows.size();
    PlotSeries vel, acc, mlv;
    vel.label = acc.label = mlv.label = label;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> vv, an, mv;
        for (const auto& r : runs) {
            vv.push_back(r.trace.rows[t].vel_var);
            an.push_back(r.trace.rows[t].mean_accel_norm);
            if (with_mlvd && r.trace.rows[t].mlvd) mv.push_back(*r.trace.rows[t].mlvd);
        }
        const double time = runs[0].trace.rows[t].time;
        vel.x.push_back(time);
        vel.median.push_back(quantile(vv, 0.5));
        vel.q1.push_back(quantile(vv, 0.25));
        vel.q3.push_back(quantile(vv, 0.75));
        acc.x.push_back(time);
        acc.median.push_back(quantile(an, 0.5));
        acc.q1.push_back(quantile(an, 0.25));
        acc.q3.push_back(quantile(an, 0.75));
        if (with_mlvd) {
            mlv.x.push_back(time);
            mlv.median.push_back(quantile(mv, 0.5));
            mlv.q1.push_back(quantile(mv, 0.25));
            mlv.q3.push_back(quantile(mv, 0.75));
        }
    }
    write_svg_chart(out / "vel_var.svg", "Velocity variance (median, IQR)", "time",
                    "velocity variance", {vel});
    write_svg_chart(out / "mean_accel_norm.svg", "Mean acceleration norm (median, IQR)", "time",
                    "mean acceleration norm", {acc});
    if (with_mlvd)
        write_svg_chart(out / "mlvd.svg", "Mean leader velocity distance (median, IQR)", "time",
                        "MLVD", {mlv});
}

}  // namespace detail

inline int cmd_eval_flocking(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    cfg.scenario = "flocking";
    const fs::path out(args.out);
    echo_config(cfg, out);

    const auto bank = initial_conditions(cfg, args.seed, cfg.seeds, 0);
    const Controller proto = controller_prototype(cfg);
    SimConfig sim;
    sim.dt = cfg.dt;
    sim.steps = cfg.steps;
    sim.comm_radius = cfg.comm_radius;
    sim.min_dist = cfg.min_dist;
    sim.accel_clamp = cfg.accel_clamp;

    std::vector<ScenarioRun> runs(cfg.seeds);
    parallel_for(args.jobs, cfg.seeds, [&](int i) {
        Controller ctrl = proto;
        if (ctrl.kind == Controller::Kind::TannerFixed)
            ctrl.fixed_graph = comm_graph(bank[i], cfg.comm_radius);
        runs[i] = leader_follow_sim(bank[i], LeaderSpec{}, ctrl, cfg.steps, sim);
    });

    if (cfg.write_traces) {
        for (int i = 0; i < cfg.seeds; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "trace_%04d.csv", i);
            write_metrics_csv(out / name, runs[i].trace);
        }
    }
    write_file(out / "summary.csv", detail::summary_csv(runs, false));
    detail::summary_plots(out, runs, cfg.controller, false);
    std::printf("eval-flocking: %d seeds, summary at %s\n", cfg.seeds,
                (out / "summary.csv").string().c_str());
    return 0;
}

inline int cmd_eval_leader(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    cfg.scenario = "leader";
    const fs::path out(args.out);
    echo_config(cfg, out);

    const auto bank = initial_conditions(cfg, args.seed, cfg.seeds, 0);
    const Controller proto = controller_prototype(cfg);
    SimConfig sim;
    sim.dt = cfg.dt;
    sim.steps = cfg.steps;
    sim.comm_radius = cfg.comm_radius;
    sim.min_dist = cfg.min_dist;
    sim.accel_clamp = cfg.accel_clamp;

    std::vector<ScenarioRun> runs(cfg.seeds);
    parallel_for(args.jobs, cfg.seeds, [&](int i) {
        Rng rng = derive_stream(args.seed, 0x30000 + static_cast<std::uint64_t>(i));
        LeaderSpec spec;
        Vec2 mean_v = Vec2::Zero();
        std::vector<int> pool(bank[i].n());
        for (int k = 0; k < bank[i].n(); ++k) pool[k] = k;
        for (int k = 0; k < cfg.leader.count; ++k) {
            const std::size_t pick = rng.uniform_int(pool.size());
            spec.leaders.push_back(pool[pick]);
            pool.erase(pool.begin() + pick);
        }
        for (int l : spec.leaders) mean_v += bank[i].velocities.row(l).transpose();
        if (!spec.leaders.empty()) mean_v /= static_cast<double>(spec.leaders.size());
        spec.velocity = mean_v;

        Controller ctrl = proto;
        if (ctrl.kind == Controller::Kind::TannerFixed)
            ctrl.fixed_graph = comm_graph(bank[i], cfg.comm_radius);
        runs[i] = leader_follow_sim(bank[i], spec, ctrl, cfg.steps, sim);
    });

    if (cfg.write_traces) {
        for (int i = 0; i < cfg.seeds; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "trace_%04d.csv", i);
            write_metrics_csv(out / name, runs[i].trace);
        }
    }
    write_file(out / "summary.csv", detail::summary_csv(runs, true));
    detail::summary_plots(out, runs, cfg.controller, true);
    std::printf("eval-leader: %d seeds, summary at %s\n", cfg.seeds,
                (out / "summary.csv").string().c_str());
    return 0;
}

struct ObstacleResultRow {
    int seed;
    Outcome outcome;
    int steps;
    int sides;
    bool technique;
};

inline int cmd_eval_obstacle(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    cfg.scenario = "obstacle";
    const fs::path out(args.out);
    echo_config(cfg, out);

    const auto bank = initial_conditions(cfg, args.seed, cfg.seeds, 0);
    const Controller proto = controller_prototype(cfg);

    struct Job {
        int seed;
        int sides;
        bool technique;
    };
    std::vector<Job> jobs;
    for (int s : cfg.obstacle.sides)
        for (int i = 0; i < cfg.seeds; ++i)
            for (bool tech : {false, true}) jobs.push_back({i, s, tech});

    std::vector<ObstacleResultRow> rows(jobs.size());
    std::vector<MetricsTrace> traces(jobs.size());
    parallel_for(args.jobs, static_cast<int>(jobs.size()), [&](int k) {
        const Job& job = jobs[k];
        Rng rng = derive_stream(args.seed,
                                0x40000 + static_cast<std::uint64_t>(job.seed) * 256 + job.sides);
        const ObstacleScenario sc =
            build_obstacle(bank[job.seed], job.sides, cfg.min_dist, cfg.comm_radius,
                           cfg.obstacle.clearance, rng);
        ObstacleSimConfig oc;
        oc.sim.dt = cfg.dt;
        oc.sim.steps = 1;
        oc.sim.comm_radius = cfg.comm_radius;
        oc.sim.min_dist = cfg.min_dist;
        oc.sim.accel_clamp = cfg.accel_clamp;
        oc.collision_dist = cfg.obstacle.clearance;
        oc.t_passed = cfg.obstacle.t_passed;
        oc.step_cap = cfg.obstacle.step_cap;
        oc.technique_on = job.technique;
        oc.avoidance.alpha2 = cfg.obstacle.alpha2;
        oc.avoidance.alpha_theta = cfg.obstacle.alpha_theta;
        oc.polygon_phase = rng.uniform(0.0, 2.0 * M_PI);

        Controller ctrl = proto;
        if (ctrl.kind == Controller::Kind::TannerFixed)
            ctrl.fixed_graph = comm_graph(sc.state, cfg.comm_radius);
        const ObstacleRun run = obstacle_sim(sc, ctrl, oc);
        rows[k] = {job.seed, run.outcome.outcome, run.outcome.step, job.sides, job.technique};
        traces[k] = run.trace;
    });

    std::string csv = "seed,outcome,steps,perimeter,technique\n";
    for (std::size_t k = 0; k < rows.size(); ++k) {
        csv += std::to_string(rows[k].seed) + ',' + outcome_name(rows[k].outcome) + ',' +
               std::to_string(rows[k].steps) + ',' + fmt17(rows[k].sides * cfg.min_dist) + ',' +
               (rows[k].technique ? '1' : '0') + '\n';
    }
    write_file(out / "results.csv", csv);

    if (cfg.write_traces) {
        for (std::size_t k = 0; k < traces.size(); ++k) {
            char name[48];
            std::snprintf(name, sizeof(name), "trace_s%02d_p%03d_t%d.csv", rows[k].seed,
                          rows[k].sides, rows[k].technique ? 1 : 0);
            write_metrics_csv(out / name, traces[k]);
        }
    }

    std::string fractions = "perimeter,technique,n,failure_fraction,disconnected_fraction,"
                            "collision_fraction,cap_fraction\n";
    for (int s : cfg.obstacle.sides) {
        for (bool tech : {false, true}) {
            int n = 0, failed = 0, disc = 0, coll = 0, cap = 0;
            for (const auto& r : rows) {
                if (r.sides != s || r.technique != tech) continue;
                ++n;
                if (r.outcome != Outcome::Passed) ++failed;
                if (r.outcome == Outcome::Disconnected) ++disc;
                if (r.outcome == Outcome::Collision) ++coll;
                if (r.outcome == Outcome::Cap) ++cap;
            }
            fractions += fmt17(s * cfg.min_dist) + ',' + (tech ? '1' : '0') + ',' +
                         std::to_string(n) + ',' + fmt17(double(failed) / n) + ',' +
                         fmt17(double(disc) / n) + ',' + fmt17(double(coll) / n) + ',' +
                         fmt17(double(cap) / n) + '\n';
        }
    }
    write_file(out / "failure_fractions.csv", fractions);
    std::printf("eval-obstacle: %zu runs, table at %s\n", rows.size(),
                (out / "failure_fractions.csv").string().c_str());
    return 0;
}

// ---- ffbc + bound ----

inline std::string bound_report_csv(const std::vector<std::array<double, 10>>& rows) {
    std::string out = "epoch,term1,term2,term3,total,empirical_gap,B,alpha,W,sum_log_frob\n";
    for (const auto& r : rows) {
        out += std::to_string(static_cast<int>(r[0]));
        for (int i = 1; i < 10; ++i) out += ',' + fmt17(r[i]);
        out += '\n';
    }
    return out;
}

inline int cmd_ffbc(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const fs::path out(args.out);
    echo_config(cfg, out);

    // one dataset per aggregation mode; the tuples embed the histories
    std::map<std::string, std::vector<TrainingTuple>> train_sets, test_sets;
    for (const auto& [mode_name, mode] :
         std::vector<std::pair<std::string, AggregationMode>>{
             {"sum", AggregationMode::Sum}, {"mean", AggregationMode::Mean}}) {
        FfbcConfig fc;
        fc.sims = cfg.ffbc.sims;
        fc.steps = cfg.ffbc.steps;
        fc.dt = cfg.ffbc.dt;
        fc.comm_radius = cfg.comm_radius;
        fc.accel_clamp = cfg.accel_clamp;
        fc.history_depth = cfg.history_depth;
        fc.disk = disk_params(cfg);
        fc.mode = mode;
        const std::uint64_t gen_seed =
            splitmix64(args.seed ^ (mode == AggregationMode::Sum ? 0x5u : 0x6u));
        FfbcDataset ds = ffbc_generate(fc, gen_seed);

        // deterministic seeded split, recorded via the shuffled order
        Rng shuffle_rng = derive_stream(args.seed, mode == AggregationMode::Sum ? 21 : 22);
        std::vector<std::size_t> order(ds.tuples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
        const std::size_t n_train =
            static_cast<std::size_t>(cfg.ffbc.train_fraction * ds.tuples.size());
        std::vector<TrainingTuple> train, test;
        for (std::size_t i = 0; i < order.size(); ++i)
            (i < n_train ? train : test).push_back(ds.tuples[order[i]]);

        write_dataset(out / ("ffbc_" + mode_name + "_train.swarmdata"), train, cfg.history_depth,
                      mode_name);
        write_dataset(out / ("ffbc_" + mode_name + "_test.swarmdata"), test, cfg.history_depth,
                      mode_name);
        nlohmann::json manifest;
        manifest["command"] = "ffbc";
        manifest["mode"] = mode_name;
        manifest["seed"] = args.seed;
        manifest["generation_seed"] = gen_seed;
        manifest["tuples"] = ds.tuples.size();
        manifest["train"] = train.size();
        manifest["test"] = test.size();
        manifest["skipped"] = ds.skipped;
        manifest["accel_clamp"] = cfg.accel_clamp;
        manifest["config_hash"] = fnv1a(effective_config_text(cfg));
        write_file(out / ("ffbc_" + mode_name + "_manifest.json"), manifest.dump(2) + "\n");

        train_sets[mode_name] = std::move(train);
        test_sets[mode_name] = std::move(test);
    }

    std::string corr = "arch,rho\n";
    for (Arch arch : {Arch::TDAGNN, Arch::TDAGNN_TF, Arch::TDAGNN_TF_MU, Arch::ETDAGNN}) {
        const std::string mode_name =
            aggregation_for(arch) == AggregationMode::Sum ? "sum" : "mean";
        const auto& train = train_sets[mode_name];
        const auto& test = test_sets[mode_name];
        std::vector<TrainingTuple> full = train;
        full.insert(full.end(), test.begin(), test.end());
        const double b_data = data_bound(full, arch);

        NetParams net = make_net(arch, cfg.history_depth);
        Rng init_rng = derive_stream(args.seed, 100 + static_cast<int>(arch));
        xavier_init(net, 1.0, init_rng);
        double scorer_bias = 0.0;

        std::vector<std::array<double, 10>> rows;
        std::vector<double> bound_series, gap_series;
        const auto log = ffbc_train(
            net, scorer_bias, train, test, cfg.ffbc.c_l, cfg.ffbc.epochs, cfg.ffbc.lr,
            [&](int epoch, const NetParams& p, double, double train_loss, double test_loss) {
                BoundInputs in = bound_inputs_for(p, static_cast<long>(train.size()), b_data,
                                                  cfg.ffbc.c_l, cfg.ffbc.delta);
                const BoundReport rep = generalization_bound(in);
                const double gap = test_loss - train_loss;
                rows.push_back({double(epoch), rep.term1, rep.term2, rep.term3, rep.total, gap,
                                b_data, in.activation_lipschitz, double(in.max_dim),
                                rep.sum_log_frobenius});
                bound_series.push_back(rep.total);
                gap_series.push_back(gap);
            });
        (void)log;
        write_file(out / (std::string("bound_report_") + arch_tag(arch) + ".csv"),
                   bound_report_csv(rows));
        write_checkpoint(out / (std::string("checkpoint_") + arch_tag(arch) + ".txt"), net);
        double rho = 0.0;
        try {
            rho = pearson_correlation(bound_series, gap_series);
        } catch (const numeric_error&) {
            rho = std::numeric_limits<double>::quiet_NaN();
        }
        corr += std::string(arch_tag(arch)) + ',' + fmt17(rho) + '\n';
    }
    write_file(out / "correlation_summary.csv", corr);
    std::printf("ffbc: reports written to %s\n", out.string().c_str());
    return 0;
}

inline int cmd_bound(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const fs::path out(args.out);
    echo_config(cfg, out);
    if (cfg.bound.checkpoint.empty() || cfg.bound.train_dataset.empty() ||
        cfg.bound.test_dataset.empty())
        throw config_error("bound: config must set bound.checkpoint and the two datasets");

    const NetParams net = read_checkpoint(cfg.bound.checkpoint);
    const auto train = read_dataset(cfg.bound.train_dataset);
    const auto test = read_dataset(cfg.bound.test_dataset);
    std::vector<TrainingTuple> full = train;
    full.insert(full.end(), test.begin(), test.end());
    const double b_data = data_bound(full, net.arch);
    const BoundInputs in = bound_inputs_for(net, static_cast<long>(train.size()), b_data,
                                            cfg.ffbc.c_l, cfg.ffbc.delta);
    const BoundReport rep = generalization_bound(in);
    const double gap = empirical_gap(net, 0.0, train, test, cfg.ffbc.c_l);
    std::vector<std::array<double, 10>> rows{{0.0, rep.term1, rep.term2, rep.term3, rep.total,
                                              gap, b_data, in.activation_lipschitz,
                                              double(in.max_dim), rep.sum_log_frobenius}};
    write_file(out / "bound_report.csv", bound_report_csv(rows));
    std::printf("bound: total %.6g, empirical gap %.6g (report at %s)\n", rep.total, gap,
                (out / "bound_report.csv").string().c_str());
    return 0;
}

inline int run(int argc, char** argv) {
    CLI::App app{"swarmlab: decentralized flocking control laboratory"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "JSON config file");
        sub->add_option("--seed", args.seed, "master random seed")->capture_default_str();
        sub->add_option("--out", args.out, "output directory")->capture_default_str();
        sub->add_option("--jobs", args.jobs, "parallel workers for independent runs")
            ->capture_default_str();
    };

    auto* gen = app.add_subcommand("gen-dataset", "generate RandomDisk initial-condition banks");
    auto* train = app.add_subcommand("train", "train a controller with DAgger");
    auto* evf = app.add_subcommand("eval-flocking", "evaluate flocking over seeded runs");
    auto* evl = app.add_subcommand("eval-leader", "evaluate leader following");
    auto* evo = app.add_subcommand("eval-obstacle", "evaluate obstacle avoidance");
    auto* ffbc = app.add_subcommand("ffbc", "fast-forward behaviour cloning and bound reports");
    auto* bound = app.add_subcommand("bound", "generalization bound for a checkpoint + dataset");
    for (auto* sub : {gen, train, evf, evl, evo, ffbc, bound}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_dataset(args);
        if (train->parsed()) return cmd_train(args);
        if (evf->parsed()) return cmd_eval_flocking(args);
        if (evl->parsed()) return cmd_eval_leader(args);
        if (evo->parsed()) return cmd_eval_obstacle(args);
        if (ffbc->parsed()) return cmd_ffbc(args);
        if (bound->parsed()) return cmd_bound(args);
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const input_error& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    }
    return 2;
}

}  // namespace swarmlab::cli
