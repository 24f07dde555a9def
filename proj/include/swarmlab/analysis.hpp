#pragma once

#include <cmath>
#include <vector>

#include "swarmlab/errors.hpp"
#include "swarmlab/flatten.hpp"
#include "swarmlab/learning.hpp"

namespace swarmlab {

struct BoundInputs {
    long sample_count = 0;       // M
    int max_dim = 0;             // W, largest MLP weight-matrix dimension
    int layer_count = 3;         // L
    double activation_lipschitz = 1.0;  // alpha >= 1
    double data_bound = 1.0;     // B >= 1
    double loss_normalizer = 2.0;  // C_L
    double delta = 1e-3;
    std::vector<double> frobenius;  // ||W_l||_F per layer

    void validate() const {
        if (sample_count < 1) throw input_error("BoundInputs: sample count must be >= 1");
        if (max_dim < 1) throw input_error("BoundInputs: max dim must be >= 1");
        if (layer_count < 1) throw input_error("BoundInputs: layer count must be >= 1");
        if (!(activation_lipschitz >= 1.0)) throw input_error("BoundInputs: alpha must be >= 1");
        if (!(data_bound >= 1.0)) throw input_error("BoundInputs: data bound must be >= 1");
        if (!(loss_normalizer > 0.0)) throw input_error("BoundInputs: loss normalizer must be > 0");
        if (!(delta > 0.0 && delta < 1.0)) throw input_error("BoundInputs: delta must be in (0,1)");
        if (frobenius.size() != static_cast<std::size_t>(layer_count))
            throw input_error("BoundInputs: one Frobenius norm per layer required");
    }
};

struct BoundReport {
    double term1 = 0.0;  // 8 / M
    double term2 = 0.0;  // 48 W / sqrt(M) * sqrt(...)
    double term3 = 0.0;  // 3 sqrt(ln(2/delta) / (2M))
    double total = 0.0;
    double sum_log_frobenius = 0.0;
};

// Generalization bound
//   8/M + (48 W / sqrt(M)) * sqrt((3L+1) ln(10 L B a^L sqrt(W M C_L))
//                                 + (2L+3) sum_l ln max{1, ||W_l||_F})
//       + 3 sqrt(ln(2/delta) / (2M)).
inline BoundReport generalization_bound(const BoundInputs& in) {
    in.validate();
    const double m = static_cast<double>(in.sample_count);
    const double w = static_cast<double>(in.max_dim);
    const double l = static_cast<double>(in.layer_count);

    BoundReport r;
    r.term1 = 8.0 / m;
    for (double f : in.frobenius) r.sum_log_frobenius += std::log(std::max(1.0, f));
    const double log_arg = 10.0 * l * in.data_bound *
                           std::pow(in.activation_lipschitz, l) *
                           std::sqrt(w * m * in.loss_normalizer);
    const double inner =
        (3.0 * l + 1.0) * std::log(log_arg) + (2.0 * l + 3.0) * r.sum_log_frobenius;
    r.term2 = (48.0 * w / std::sqrt(m)) * std::sqrt(inner);
    r.term3 = 3.0 * std::sqrt(std::log(2.0 / in.delta) / (2.0 * m));
    r.total = r.term1 + r.term2 + r.term3;
    return r;
}

// B = max over tuples and agents of max{||expert accel||, ||Z_i^MLP||_F},
// floored at 1. The flattening matches the architecture (ones row for biased
// nets, plain rearrangement for the equivariant one).
inline double data_bound(const std::vector<TrainingTuple>& dataset, Arch arch) {
    if (dataset.empty()) throw input_error("data_bound: empty dataset");
    double b = 1.0;
    for (const TrainingTuple& t : dataset) {
        for (int i = 0; i < t.n(); ++i) {
            b = std::max(b, t.expert_accels.row(i).norm());
            b = std::max(b, input_frob_as_mlp(arch, t.histories[i]));
        }
    }
    return b;
}

// Empirical risk over the test set minus over the training set, both under
// the truncated scored loss.
inline double empirical_gap(const NetParams& params, double scorer_bias,
                            const std::vector<TrainingTuple>& train_set,
                            const std::vector<TrainingTuple>& test_set, double c_l) {
    return scored_mean_loss(params, scorer_bias, test_set, c_l) -
           scored_mean_loss(params, scorer_bias, train_set, c_l);
}

inline double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw input_error("pearson_correlation: length mismatch");
    if (a.size() < 2) throw input_error("pearson_correlation: need at least two points");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0)
        throw numeric_error("pearson_correlation: constant series");
    return cov / std::sqrt(va * vb);
}

// alpha for the bound: 1 for the tanh family, the largest equivariant
// activation constant for the equivariant network.
inline double activation_lipschitz_for(Arch arch) {
    if (!is_equivariant(arch)) return 1.0;
    const double l0 = lipschitz_estimate(ActKind::SigmaLog);
    const double l1 = lipschitz_estimate(ActKind::SigmaTanh);
    return std::max({1.0, l0, l1});
}

inline BoundInputs bound_inputs_for(const NetParams& params, long sample_count,
                                    double data_bound_value, double c_l, double delta) {
    const FlattenedMLP mlp = flatten_to_mlp(params);
    BoundInputs in;
    in.sample_count = sample_count;
    in.max_dim = mlp.max_dim();
    in.layer_count = params.layer_count();
    in.activation_lipschitz = activation_lipschitz_for(params.arch);
    in.data_bound = data_bound_value;
    in.loss_normalizer = c_l;
    in.delta = delta;
    for (int l = 0; l < params.layer_count(); ++l) in.frobenius.push_back(mlp.frobenius(l));
    return in;
}

}  // namespace swarmlab
