#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "swarmlab/errors.hpp"
#include "swarmlab/net.hpp"

namespace swarmlab {

namespace detail {

// Maps the ones row 1_a^T to 1_b^T under right multiplication.
inline Eigen::MatrixXd ones_carry_matrix(int a, int b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a, b);
    if (a == b) {
        m.setIdentity();
    } else if (a < b) {
        for (int i = 0; i + 1 < a; ++i) m(i, i) = 1.0;
        for (int j = a - 1; j < b; ++j) m(a - 1, j) = 1.0;
    } else {
        for (int i = 0; i < a - b && i < b; ++i) m(i, i) = 1.0;
    }
    return m;
}

// Toeplitz block of the layer's kernel for one (input, output) channel pair:
// entry (p, f) multiplies input feature p into output feature f.
inline void fill_toeplitz(Eigen::MatrixXd& dst, int row0, int col0, const ConvLayer& layer,
                          int in_index, int out_index) {
    const int kw = layer.spec.kernel_width();
    const int f_in = layer.spec.f_in;
    const int f_out = layer.spec.f_out;
    for (int f = 0; f < f_out; ++f) {
        for (int k = 0; k < kw; ++k) {
            dst(row0 + f + k, col0 + f) = layer.w(out_index, in_index * kw + k);
        }
    }
    (void)f_in;
}

}  // namespace detail

// The conv stack rewritten as a chain of fixed-dimension weight matrices.
// Biased layers carry their bias in extra rows driven by a ones segment that
// the chain propagates; equivariant layers are pure block-Toeplitz maps on a
// two-row input.
struct FlattenedMLP {
    Arch arch = Arch::TDAGNN;
    int history_depth = 3;
    std::vector<Eigen::MatrixXd> w;
    std::vector<ConvLayerSpec> specs;

    double frobenius(int layer) const { return w.at(layer).norm(); }

    double sum_log_frobenius() const {
        double s = 0.0;
        for (const auto& m : w) s += std::log(std::max(1.0, m.norm()));
        return s;
    }

    // Largest dimension over all weight matrices.
    int max_dim() const {
        int d = 0;
        for (const auto& m : w) d = std::max({d, (int)m.rows(), (int)m.cols()});
        return d;
    }

    Vec2 forward(const AgentHistory& history) const {
        if (history.depth() != history_depth)
            throw input_error("FlattenedMLP: history depth mismatch");
        if (is_equivariant(arch)) {
            Eigen::MatrixXd x(2, (specs[0].c_in / 2) * specs[0].f_in);
            for (int b = 0; b < specs[0].c_in / 2; ++b)
                x.middleCols(b * specs[0].f_in, specs[0].f_in) = history.z.middleRows(2 * b, 2);
            x = act_sigma_log(x);
            for (std::size_t l = 0; l < w.size(); ++l) {
                x = x * w[l];
                x = apply_act(activation_after(arch, static_cast<int>(l)), x);
            }
            return Vec2(x(0, 0), x(1, 0));
        }
        Eigen::RowVectorXd x(specs[0].c_in * specs[0].f_in + specs[0].f_out);
        for (int c = 0; c < specs[0].c_in; ++c)
            x.segment(c * specs[0].f_in, specs[0].f_in) = history.z.row(c);
        x.tail(specs[0].f_out).setOnes();
        for (std::size_t l = 0; l < w.size(); ++l) {
            Eigen::RowVectorXd y = x * w[l];
            const Act act = activation_after(arch, static_cast<int>(l));
            if (act == Act::Tanh) {
                const int channel_entries = specs[l].c_out * specs[l].f_out;
                y.head(channel_entries) = y.head(channel_entries).array().tanh().matrix();
            }
            x = y;
        }
        return Vec2(x(0), x(1));
    }
};

inline FlattenedMLP flatten_to_mlp(const NetParams& p) {
    FlattenedMLP out;
    out.arch = p.arch;
    out.history_depth = p.history_depth;
    const int L = p.layer_count();
    for (const auto& layer : p.layers) out.specs.push_back(layer.spec);

    for (int l = 0; l < L; ++l) {
        const ConvLayer& layer = p.layers[l];
        const ConvLayerSpec& s = layer.spec;
        if (is_equivariant(p.arch)) {
            const int rows = (s.c_in / 2) * s.f_in;
            const int cols = (s.c_out / 2) * s.f_out;
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
            for (int bi = 0; bi < s.c_in / 2; ++bi)
                for (int bo = 0; bo < s.c_out / 2; ++bo)
                    detail::fill_toeplitz(m, bi * s.f_in, bo * s.f_out, layer, bi, bo);
            out.w.push_back(std::move(m));
        } else {
            const bool carry = l + 1 < L;
            const int next_f = carry ? p.layers[l + 1].spec.f_out : 0;
            const int rows = s.c_in * s.f_in + s.f_out;
            const int cols = s.c_out * s.f_out + (carry ? next_f : 0);
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
            for (int ci = 0; ci < s.c_in; ++ci)
                for (int co = 0; co < s.c_out; ++co)
                    detail::fill_toeplitz(m, ci * s.f_in, co * s.f_out, layer, ci, co);
            const int bias_row0 = s.c_in * s.f_in;
            for (int co = 0; co < s.c_out; ++co)
                for (int f = 0; f < s.f_out; ++f) m(bias_row0 + f, co * s.f_out + f) = layer.bias(co);
            if (carry)
                m.block(bias_row0, s.c_out * s.f_out, s.f_out, next_f) =
                    detail::ones_carry_matrix(s.f_out, next_f);
            out.w.push_back(std::move(m));
        }
    }
    return out;
}

// Frobenius norm of the tuple input in its MLP representation: biased nets
// append a ones row of length f_out(layer 1); the equivariant rearrangement
// preserves the norm.
inline double input_frob_as_mlp(Arch arch, const AgentHistory& history) {
    if (is_equivariant(arch)) return history.z.norm();
    const double ones_len = 1.0;  // f_out of the first layer in the standard stack
    return std::sqrt(history.z.squaredNorm() + ones_len);
}

}  // namespace swarmlab
