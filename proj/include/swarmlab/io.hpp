#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swarmlab/errors.hpp"
#include "swarmlab/flock.hpp"
#include "swarmlab/learning.hpp"
#include "swarmlab/net.hpp"

namespace swarmlab {

// Shortest exact decimal representation (17 significant digits round-trips
// every double bit-exactly through strtod).
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw config_error("cannot write " + path.string());
    os << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw config_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// ---- FlockState: CSV body plus a sidecar metadata record ----

inline std::string flock_to_csv(const FlockState& state) {
    std::string out = "agent,x,y,vx,vy\n";
    for (int i = 0; i < state.n(); ++i) {
        out += std::to_string(i) + ',' + fmt17(state.positions(i, 0)) + ',' +
               fmt17(state.positions(i, 1)) + ',' + fmt17(state.velocities(i, 0)) + ',' +
               fmt17(state.velocities(i, 1)) + '\n';
    }
    return out;
}

inline void write_flock_csv(const std::filesystem::path& path, const FlockState& state,
                            std::uint64_t seed) {
    write_file(path, flock_to_csv(state));
    nlohmann::json meta;
    meta["n"] = state.n();
    meta["time"] = state.time;
    meta["seed"] = seed;
    write_file(std::filesystem::path(path).replace_extension(".meta.json"), meta.dump(2) + "\n");
}

inline FlockState read_flock_csv(const std::filesystem::path& path) {
    std::istringstream is(read_file(path));
    std::string line;
    if (!std::getline(is, line) || line != "agent,x,y,vx,vy")
        throw config_error("bad flock CSV header in " + path.string());
    std::vector<std::array<double, 4>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::array<double, 4> r;
        int agent;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &agent, &r[0], &r[1], &r[2], &r[3]) != 5)
            throw config_error("bad flock CSV row in " + path.string());
        rows.push_back(r);
    }
    FlockState st;
    st.positions.resize(rows.size(), 2);
    st.velocities.resize(rows.size(), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        st.positions(i, 0) = rows[i][0];
        st.positions(i, 1) = rows[i][1];
        st.velocities(i, 0) = rows[i][2];
        st.velocities(i, 1) = rows[i][3];
    }
    const auto meta_path = std::filesystem::path(path).replace_extension(".meta.json");
    if (std::filesystem::exists(meta_path)) {
        const auto meta = nlohmann::json::parse(read_file(meta_path));
        st.time = meta.value("time", 0.0);
    }
    return st;
}

// ---- MetricsTrace CSV ----

inline std::string metrics_to_csv(const MetricsTrace& trace) {
    std::string out = "step,time,vel_var,mean_accel_norm,connected,min_dist,mlvd\n";
    for (const auto& r : trace.rows) {
        out += std::to_string(r.step) + ',' + fmt17(r.time) + ',' + fmt17(r.vel_var) + ',' +
               fmt17(r.mean_accel_norm) + ',' + (r.connected ? '1' : '0') + ',' +
               fmt17(r.min_dist) + ',' + (r.mlvd ? fmt17(*r.mlvd) : std::string()) + '\n';
    }
    return out;
}

inline void write_metrics_csv(const std::filesystem::path& path, const MetricsTrace& trace) {
    write_file(path, metrics_to_csv(trace));
}

// ---- Network checkpoints ----
// Versioned text format:
//   swarmnet-v1 <tag> K=<K>
//   layer <l> <rows>x<cols>
//   ... row-major values, one row per line ...
//   bias <l>
//   ... values ...

inline std::string checkpoint_to_string(const NetParams& p) {
    std::string out = std::string("swarmnet-v1 ") + arch_tag(p.arch) +
                      " K=" + std::to_string(p.history_depth) + "\n";
    for (int l = 0; l < p.layer_count(); ++l) {
        const auto& w = p.layers[l].w;
        out += "layer " + std::to_string(l + 1) + ' ' + std::to_string(w.rows()) + 'x' +
               std::to_string(w.cols()) + '\n';
        for (int r = 0; r < w.rows(); ++r) {
            for (int c = 0; c < w.cols(); ++c) {
                out += fmt17(w(r, c));
                out += (c + 1 == w.cols()) ? '\n' : ' ';
            }
        }
        if (p.layers[l].bias.size() > 0) {
            out += "bias " + std::to_string(l + 1) + '\n';
            for (int c = 0; c < p.layers[l].bias.size(); ++c) {
                out += fmt17(p.layers[l].bias(c));
                out += (c + 1 == p.layers[l].bias.size()) ? '\n' : ' ';
            }
        }
    }
    return out;
}

inline void write_checkpoint(const std::filesystem::path& path, const NetParams& p) {
    write_file(path, checkpoint_to_string(p));
}

inline NetParams checkpoint_from_string(const std::string& text) {
    std::istringstream is(text);
    std::string magic, tag, kfield;
    if (!(is >> magic >> tag >> kfield) || magic != "swarmnet-v1" || kfield.rfind("K=", 0) != 0)
        throw config_error("bad checkpoint header");
    const int depth = std::stoi(kfield.substr(2));
    NetParams p = make_net(arch_from_tag(tag), depth);
    std::string word;
    while (is >> word) {
        if (word == "layer") {
            int l, rows, cols;
            char x;
            if (!(is >> l >> rows >> x >> cols) || x != 'x')
                throw config_error("bad checkpoint layer record");
            auto& w = p.layers.at(l - 1).w;
            if (rows != w.rows() || cols != w.cols())
                throw config_error("checkpoint layer shape mismatch");
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    if (!(is >> w(r, c))) throw config_error("truncated checkpoint layer");
        } else if (word == "bias") {
            int l;
            if (!(is >> l)) throw config_error("bad checkpoint bias record");
            auto& b = p.layers.at(l - 1).bias;
            for (int c = 0; c < b.size(); ++c)
                if (!(is >> b(c))) throw config_error("truncated checkpoint bias");
        } else {
            throw config_error("unexpected checkpoint token: " + word);
        }
    }
    return p;
}

inline NetParams read_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_string(read_file(path));
}

// ---- Training-tuple datasets ----
// Text container, one record per tuple; the manifest (counts, seeds, split,
// config hash) travels separately as JSON.

inline std::string dataset_to_string(const std::vector<TrainingTuple>& tuples, int history_depth,
                                     const std::string& mode) {
    std::string out = "swarmdata-v1 tuples=" + std::to_string(tuples.size()) +
                      " K=" + std::to_string(history_depth) + " mode=" + mode + "\n";
    for (const TrainingTuple& t : tuples) {
        out += "tuple " + std::to_string(t.draw_id) + " n=" + std::to_string(t.n()) + '\n';
        for (int i = 0; i < t.n(); ++i) {
            out += fmt17(t.positions(i, 0)) + ' ' + fmt17(t.positions(i, 1)) + ' ' +
                   fmt17(t.velocities(i, 0)) + ' ' + fmt17(t.velocities(i, 1)) + ' ' +
                   fmt17(t.expert_accels(i, 0)) + ' ' + fmt17(t.expert_accels(i, 1));
            const auto& z = t.histories[i].z;
            for (int r = 0; r < z.rows(); ++r)
                for (int c = 0; c < z.cols(); ++c) out += ' ' + fmt17(z(r, c));
            out += '\n';
        }
    }
    return out;
}

inline void write_dataset(const std::filesystem::path& path,
                          const std::vector<TrainingTuple>& tuples, int history_depth,
                          const std::string& mode) {
    write_file(path, dataset_to_string(tuples, history_depth, mode));
}

inline std::vector<TrainingTuple> read_dataset(const std::filesystem::path& path,
                                               int* history_depth_out = nullptr,
                                               std::string* mode_out = nullptr) {
    std::istringstream is(read_file(path));
    std::string magic, tfield, kfield, mfield;
    if (!(is >> magic >> tfield >> kfield >> mfield) || magic != "swarmdata-v1")
        throw config_error("bad dataset header in " + path.string());
    const long count = std::stol(tfield.substr(tfield.find('=') + 1));
    const int depth = std::stoi(kfield.substr(kfield.find('=') + 1));
    const std::string mode = mfield.substr(mfield.find('=') + 1);
    if (history_depth_out) *history_depth_out = depth;
    if (mode_out) *mode_out = mode;

    std::vector<TrainingTuple> tuples;
    tuples.reserve(count);
    std::string word;
    for (long k = 0; k < count; ++k) {
        std::string nfield;
        std::uint64_t draw_id;
        if (!(is >> word >> draw_id >> nfield) || word != "tuple")
            throw config_error("bad tuple record in " + path.string());
        const int n = std::stoi(nfield.substr(nfield.find('=') + 1));
        TrainingTuple t;
        t.draw_id = draw_id;
        t.positions.resize(n, 2);
        t.velocities.resize(n, 2);
        t.expert_accels.resize(n, 2);
        t.histories.assign(n, AgentHistory::zero(depth));
        for (int i = 0; i < n; ++i) {
            is >> t.positions(i, 0) >> t.positions(i, 1) >> t.velocities(i, 0) >>
                t.velocities(i, 1) >> t.expert_accels(i, 0) >> t.expert_accels(i, 1);
            auto& z = t.histories[i].z;
            for (int r = 0; r < z.rows(); ++r)
                for (int c = 0; c < z.cols(); ++c) is >> z(r, c);
        }
        if (!is) throw config_error("truncated dataset in " + path.string());
        tuples.push_back(std::move(t));
    }
    return tuples;
}

// FNV-1a, used to stamp configs into manifests.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace swarmlab
