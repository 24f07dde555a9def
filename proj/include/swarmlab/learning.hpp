#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "swarmlab/controllers.hpp"
#include "swarmlab/errors.hpp"
#include "swarmlab/flock.hpp"
#include "swarmlab/net.hpp"
#include "swarmlab/rng.hpp"

namespace swarmlab {

// One labelled flock snapshot: state, expert accelerations, per-agent
// feature summaries, and the identifier of the initial-condition draw the
// snapshot descends from.
struct TrainingTuple {
    MatX2 positions;
    MatX2 velocities;
    MatX2 expert_accels;
    std::vector<AgentHistory> histories;
    std::uint64_t draw_id = 0;

    int n() const { return static_cast<int>(positions.rows()); }
};

// Bounded FIFO; eviction is strictly oldest-first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {}

    void push(TrainingTuple t) {
        items_.push_back(std::move(t));
        while (items_.size() > capacity_) items_.pop_front();
    }
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const TrainingTuple& operator[](std::size_t i) const { return items_[i]; }

private:
    std::size_t capacity_;
    std::deque<TrainingTuple> items_;
};

// Expert-action probability schedule p_e = max(p_{e-1} * decay, floor).
struct DaggerSchedule {
    double p0 = 0.993;
    double decay = 0.993;
    double floor = 0.5;

    double p(int epoch) const {
        double v = p0;
        for (int e = 0; e < epoch; ++e) v = std::max(v * decay, floor);
        return v;
    }
};

// Eq. (11): mean over agents of the squared error between expert and pupil.
inline double il_loss(const MatX2& expert_accels, const MatX2& pupil_accels) {
    if (expert_accels.rows() != pupil_accels.rows())
        throw input_error("il_loss: agent count mismatch");
    const int n = static_cast<int>(expert_accels.rows());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (expert_accels.row(i) - pupil_accels.row(i)).squaredNorm();
    return acc / n;
}

struct DaggerConfig {
    int epochs = 400;
    int steps = 200;  // T, steps per epoch simulation
    double dt = 1e-2;
    double comm_radius = 1.0;
    double accel_clamp = 10.0;
    std::size_t buffer_capacity = 10000;
    int batches_per_epoch = 200;
    int batch_size = 20;
    double lr = 5e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int validate_every = 40;
    DaggerSchedule schedule;
};

struct DaggerEpochLog {
    int epoch = 0;
    double p = 0.0;
    std::size_t buffer_size = 0;
    double mean_batch_loss = 0.0;
    int sim_steps = 0;          // steps actually simulated (shorter on abort)
    bool aborted = false;       // expert singularity ended the simulation early
    std::optional<double> val_vel_var;  // median final-step velocity variance
};

struct DaggerLog {
    std::vector<DaggerEpochLog> epochs;
    int aborted_sims = 0;
};

// Resumable training state: everything the loop carries between epochs.
struct DaggerTrainerState {
    NetParams params;
    AdamState adam;
    ReplayBuffer buffer;
    long adam_t = 0;
    int next_epoch = 0;

    DaggerTrainerState(NetParams p, std::size_t buffer_capacity)
        : params(std::move(p)), adam(AdamState::zero(params)), buffer(buffer_capacity) {}
};

namespace detail {

inline MatX2 pupil_accels(const NetParams& params, const std::vector<AgentHistory>& hist) {
    MatX2 a(static_cast<int>(hist.size()), 2);
    for (std::size_t i = 0; i < hist.size(); ++i)
        a.row(i) = forward(params, hist[i]).transpose();
    return a;
}

// Median of the final-step velocity variance over pupil-only rollouts.
inline double validation_vel_var(const NetParams& params, const std::vector<FlockState>& bank,
                                 const DaggerConfig& cfg) {
    std::vector<double> finals;
    const AggregationMode mode = aggregation_for(params.arch);
    for (const FlockState& ic : bank) {
        FlockState state = ic;
        std::vector<AgentHistory> hist(state.n(), AgentHistory::zero(params.history_depth));
        for (int t = 0; t < cfg.steps; ++t) {
            const CommGraph g = comm_graph(state, cfg.comm_radius);
            hist = aggregate_history(hist, state, g, mode);
            state = step(state, pupil_accels(params, hist), cfg.dt);
        }
        finals.push_back(velocity_variance(state));
    }
    std::sort(finals.begin(), finals.end());
    const std::size_t m = finals.size();
    return m % 2 ? finals[m / 2] : 0.5 * (finals[m / 2 - 1] + finals[m / 2]);
}

}  // namespace detail

// DAgger imitation learning. Each epoch simulates one initial condition for
// `steps` steps, stepping with the expert with probability p_e and the pupil
// otherwise, collecting (state, expert label, histories) tuples, then takes
// one Adam step per sampled batch. An expert singularity aborts the epoch's
// simulation; training continues on the buffer.
inline DaggerLog dagger_train(DaggerTrainerState& st, const DaggerConfig& cfg,
                              const std::vector<FlockState>& init_bank,
                              const std::vector<FlockState>& validation_bank, Rng& rng) {
    if (init_bank.empty()) throw input_error("dagger_train: empty initial-condition bank");
    const PotentialSpec pot{cfg.comm_radius};
    const AggregationMode mode = aggregation_for(st.params.arch);
    DaggerLog log;

    for (int epoch = st.next_epoch; epoch < cfg.epochs; ++epoch) {
        DaggerEpochLog row;
        row.epoch = epoch;
        row.p = cfg.schedule.p(epoch);

        FlockState state = init_bank[rng.uniform_int(init_bank.size())];
        std::vector<AgentHistory> hist(state.n(), AgentHistory::zero(st.params.history_depth));
        for (int t = 0; t < cfg.steps; ++t) {
            const CommGraph g = comm_graph(state, cfg.comm_radius);
            hist = aggregate_history(hist, state, g, mode);
            MatX2 expert;
            try {
                expert = expert_accel(state, pot, cfg.accel_clamp);
            } catch (const singularity_error&) {
                row.aborted = true;
                ++log.aborted_sims;
                break;
            }
            TrainingTuple tuple;
            tuple.positions = state.positions;
            tuple.velocities = state.velocities;
            tuple.expert_accels = expert;
            tuple.histories = hist;
            tuple.draw_id = (static_cast<std::uint64_t>(epoch) << 32) | static_cast<std::uint32_t>(t);
            st.buffer.push(std::move(tuple));

            const bool use_expert = rng.coin(row.p);
            const MatX2 accel = use_expert ? expert : detail::pupil_accels(st.params, hist);
            state = step(state, accel, cfg.dt);
            row.sim_steps = t + 1;
        }

        NetGrads grads = NetGrads::zero(st.params);
        std::vector<TrainingPair> batch;
        double loss_sum = 0.0;
        for (int b = 0; b < cfg.batches_per_epoch; ++b) {
            batch.clear();
            for (int k = 0; k < cfg.batch_size; ++k) {
                const TrainingTuple& t = st.buffer[rng.uniform_int(st.buffer.size())];
                for (int i = 0; i < t.n(); ++i)
                    batch.push_back({&t.histories[i], t.expert_accels.row(i).transpose()});
            }
            loss_sum += gradient(st.params, batch, grads);
            adam_step(st.params, grads, st.adam, ++st.adam_t, cfg.lr, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_eps);
        }
        row.mean_batch_loss = loss_sum / cfg.batches_per_epoch;
        row.buffer_size = st.buffer.size();

        if (!validation_bank.empty() &&
            ((epoch + 1) % cfg.validate_every == 0 || epoch + 1 == cfg.epochs)) {
            row.val_vel_var = detail::validation_vel_var(st.params, validation_bank, cfg);
        }
        log.epochs.push_back(std::move(row));
        st.next_epoch = epoch + 1;
    }
    return log;
}

struct FfbcConfig {
    int sims = 10;
    int steps = 200;  // T; each simulation contributes T + 1 tuples
    double dt = 1e-2;
    double comm_radius = 1.0;
    double accel_clamp = 10.0;
    int history_depth = 3;
    RandomDiskParams disk;
    AggregationMode mode = AggregationMode::Mean;
};

struct FfbcDataset {
    std::vector<TrainingTuple> tuples;
    int skipped = 0;  // tuples dropped because the expert hit a singularity
};

// Fast-forward behaviour cloning: every tuple descends from a freshly drawn
// initial condition advanced tau steps under the expert alone, so tuples are
// samples of independent draws.
inline FfbcDataset ffbc_generate(const FfbcConfig& cfg, std::uint64_t seed) {
    const PotentialSpec pot{cfg.comm_radius};
    FfbcDataset out;
    for (int sim = 0; sim < cfg.sims; ++sim) {
        for (int tau = 0; tau <= cfg.steps; ++tau) {
            const std::uint64_t draw_id =
                static_cast<std::uint64_t>(sim) * (cfg.steps + 1) + tau;
            Rng rng = derive_stream(seed, draw_id);
            FlockState state = random_disk_init(cfg.disk, rng);
            std::vector<AgentHistory> hist(state.n(), AgentHistory::zero(cfg.history_depth));
            bool skipped = false;
            for (int t = 0;; ++t) {
                const CommGraph g = comm_graph(state, cfg.comm_radius);
                hist = aggregate_history(hist, state, g, cfg.mode);
                MatX2 expert;
                try {
                    expert = expert_accel(state, pot, cfg.accel_clamp);
                } catch (const singularity_error&) {
                    skipped = true;
                    break;
                }
                if (t == tau) {
                    TrainingTuple tuple;
                    tuple.positions = state.positions;
                    tuple.velocities = state.velocities;
                    tuple.expert_accels = expert;
                    tuple.histories = hist;
                    tuple.draw_id = draw_id;
                    out.tuples.push_back(std::move(tuple));
                    break;
                }
                state = step(state, expert, cfg.dt);
            }
            if (skipped) ++out.skipped;
        }
    }
    return out;
}

// min{1, y / c} for y >= 0.
inline double truncated_loss(double y, double c) { return std::min(1.0, y / c); }

// Scored truncated loss of one tuple: L(b^2 + MSE).
inline double scored_tuple_loss(const NetParams& params, double scorer_bias,
                                const TrainingTuple& t, double c_l) {
    double mse = 0.0;
    for (int i = 0; i < t.n(); ++i) {
        const Vec2 out = forward(params, t.histories[i]);
        mse += (out - t.expert_accels.row(i).transpose()).squaredNorm();
    }
    mse /= t.n();
    return truncated_loss(scorer_bias * scorer_bias + mse, c_l);
}

inline double scored_mean_loss(const NetParams& params, double scorer_bias,
                               const std::vector<TrainingTuple>& set, double c_l) {
    if (set.empty()) throw input_error("scored_mean_loss: empty set");
    double acc = 0.0;
    for (const TrainingTuple& t : set) acc += scored_tuple_loss(params, scorer_bias, t, c_l);
    return acc / set.size();
}

struct FfbcEpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double scorer_bias = 0.0;
};

using FfbcEpochHook =
    std::function<void(int epoch, const NetParams&, double scorer_bias, double train_loss,
                       double test_loss)>;

// Full-batch training of the truncated scored loss over the whole training
// set each epoch; the scorer bias trains jointly and is clamped to
// [0, sqrt(c_l)] after every step. The hook fires after each epoch's update
// with the freshly evaluated losses.
inline std::vector<FfbcEpochLog> ffbc_train(NetParams& params, double& scorer_bias,
                                            const std::vector<TrainingTuple>& train_set,
                                            const std::vector<TrainingTuple>& test_set,
                                            double c_l, int epochs, double lr = 5e-5,
                                            const FfbcEpochHook& on_epoch = {}) {
    if (train_set.empty() || test_set.empty()) throw input_error("ffbc_train: empty dataset");
    if (scorer_bias < 0.0 || scorer_bias > std::sqrt(c_l))
        throw input_error("ffbc_train: scorer bias outside [0, sqrt(c_l)]");

    AdamState adam = AdamState::zero(params);
    double bias_m = 0.0, bias_v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<FfbcEpochLog> log;

    NetGrads grads = NetGrads::zero(params);
    NetGrads tuple_grads = NetGrads::zero(params);
    std::vector<TrainingPair> tuple_batch;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        grads.setZero();
        double bias_grad = 0.0;
        const double inv_m = 1.0 / static_cast<double>(train_set.size());
        for (const TrainingTuple& t : train_set) {
            tuple_batch.clear();
            for (int i = 0; i < t.n(); ++i)
                tuple_batch.push_back({&t.histories[i], t.expert_accels.row(i).transpose()});
            const double mse = gradient(params, tuple_batch, tuple_grads);
            const double y = scorer_bias * scorer_bias + mse;
            if (y < c_l) {
                // d loss / d mse = 1 / (c_l * M); tuple_grads already hold d mse.
                const double scale = inv_m / c_l;
                for (std::size_t l = 0; l < grads.w.size(); ++l) {
                    grads.w[l] += scale * tuple_grads.w[l];
                    if (grads.bias[l].size() > 0) grads.bias[l] += scale * tuple_grads.bias[l];
                }
                bias_grad += scale * 2.0 * scorer_bias;
            }
        }
        const long t_step = epoch + 1;
        adam_step(params, grads, adam, t_step, lr, b1, b2, eps);
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_step));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_step));
        bias_m = b1 * bias_m + (1.0 - b1) * bias_grad;
        bias_v = b2 * bias_v + (1.0 - b2) * bias_grad * bias_grad;
        scorer_bias -= lr * (bias_m / bc1) / (std::sqrt(bias_v / bc2) + eps);
        scorer_bias = std::clamp(scorer_bias, 0.0, std::sqrt(c_l));

        FfbcEpochLog row;
        row.epoch = epoch;
        row.train_loss = scored_mean_loss(params, scorer_bias, train_set, c_l);
        row.test_loss = scored_mean_loss(params, scorer_bias, test_set, c_l);
        row.scorer_bias = scorer_bias;
        if (on_epoch) on_epoch(epoch, params, scorer_bias, row.train_loss, row.test_loss);
        log.push_back(row);
    }
    return log;
}

}  // namespace swarmlab
