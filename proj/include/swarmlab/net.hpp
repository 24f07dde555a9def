#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "swarmlab/controllers.hpp"
#include "swarmlab/errors.hpp"
#include "swarmlab/rng.hpp"

namespace swarmlab {

enum class Arch { TDAGNN, TDAGNN_TF, TDAGNN_TF_MU, ETDAGNN };

inline const char* arch_tag(Arch a) {
    switch (a) {
        case Arch::TDAGNN: return "tdagnn";
        case Arch::TDAGNN_TF: return "tdagnn-tf";
        case Arch::TDAGNN_TF_MU: return "tdagnn-tf-mu";
        case Arch::ETDAGNN: return "etdagnn";
    }
    throw input_error("arch_tag: unknown architecture");
}

inline Arch arch_from_tag(const std::string& tag) {
    if (tag == "tdagnn") return Arch::TDAGNN;
    if (tag == "tdagnn-tf") return Arch::TDAGNN_TF;
    if (tag == "tdagnn-tf-mu") return Arch::TDAGNN_TF_MU;
    if (tag == "etdagnn") return Arch::ETDAGNN;
    throw input_error("unknown architecture tag: " + tag);
}

inline AggregationMode aggregation_for(Arch a) {
    return (a == Arch::TDAGNN_TF_MU || a == Arch::ETDAGNN) ? AggregationMode::Mean
                                                           : AggregationMode::Sum;
}

inline bool is_equivariant(Arch a) { return a == Arch::ETDAGNN; }

struct ConvLayerSpec {
    int c_in = 0;
    int f_in = 0;
    int c_out = 0;
    int f_out = 0;
    bool has_bias = true;
    bool equivariant = false;

    // No padding, so the kernel width is fixed by the feature counts.
    int kernel_width() const { return f_in - f_out + 1; }

    void validate() const {
        if (c_in < 1 || c_out < 1 || f_in < 1 || f_out < 1 || kernel_width() < 1)
            throw input_error("ConvLayerSpec: invalid shape");
        if (equivariant) {
            if (has_bias) throw input_error("ConvLayerSpec: equivariant layers carry no bias");
            if (c_in % 2 != 0 || c_out % 2 != 0)
                throw input_error("ConvLayerSpec: equivariant layers need even channel counts");
        }
    }
};

// One convolution layer. Plain layers store w as c_out x (c_in * kw) plus a
// per-channel bias; equivariant layers share one kernel per channel pair and
// store w as (c_out/2) x ((c_in/2) * kw) with no bias.
struct ConvLayer {
    ConvLayerSpec spec;
    Eigen::MatrixXd w;
    Eigen::VectorXd bias;

    static ConvLayer make(const ConvLayerSpec& spec) {
        spec.validate();
        ConvLayer l;
        l.spec = spec;
        const int kw = spec.kernel_width();
        if (spec.equivariant) {
            l.w = Eigen::MatrixXd::Zero(spec.c_out / 2, (spec.c_in / 2) * kw);
        } else {
            l.w = Eigen::MatrixXd::Zero(spec.c_out, spec.c_in * kw);
            l.bias = Eigen::VectorXd::Zero(spec.c_out);
        }
        return l;
    }
};

struct NetParams {
    Arch arch = Arch::TDAGNN;
    int history_depth = 3;
    std::vector<ConvLayer> layers;

    int layer_count() const { return static_cast<int>(layers.size()); }
};

// The standard three-layer controller: (6, K) -> (32, 1) -> (32, 1) -> (2, 1).
inline NetParams make_net(Arch arch, int history_depth) {
    if (history_depth < 1) throw input_error("make_net: history depth must be >= 1");
    const bool eq = is_equivariant(arch);
    NetParams p;
    p.arch = arch;
    p.history_depth = history_depth;
    const std::array<std::array<int, 4>, 3> shapes = {{
        {6, history_depth, 32, 1},
        {32, 1, 32, 1},
        {32, 1, 2, 1},
    }};
    for (const auto& s : shapes) {
        ConvLayerSpec spec;
        spec.c_in = s[0];
        spec.f_in = s[1];
        spec.c_out = s[2];
        spec.f_out = s[3];
        spec.equivariant = eq;
        spec.has_bias = !eq;
        p.layers.push_back(ConvLayer::make(spec));
    }
    return p;
}

// Cross-correlation with no padding, per-channel scalar bias.
inline Eigen::MatrixXd conv1d_forward(const ConvLayer& layer, const Eigen::MatrixXd& input) {
    const ConvLayerSpec& s = layer.spec;
    if (s.equivariant) throw input_error("conv1d_forward: layer is equivariant");
    if (input.rows() != s.c_in || input.cols() != s.f_in)
        throw input_error("conv1d_forward: input shape mismatch");
    const int kw = s.kernel_width();
    Eigen::MatrixXd out(s.c_out, s.f_out);
    for (int co = 0; co < s.c_out; ++co) {
        for (int f = 0; f < s.f_out; ++f) {
            double acc = layer.bias(co);
            for (int ci = 0; ci < s.c_in; ++ci)
                for (int k = 0; k < kw; ++k) acc += layer.w(co, ci * kw + k) * input(ci, f + k);
            out(co, f) = acc;
        }
    }
    return out;
}

// Equivariant convolution over stacked 2-row blocks: every output block is a
// kernel-weighted combination of whole input columns, so an orthogonal map
// applied to the 2-vectors commutes with the layer.
inline Eigen::MatrixXd eqconv_forward(const ConvLayer& layer, const Eigen::MatrixXd& input) {
    const ConvLayerSpec& s = layer.spec;
    if (!s.equivariant) throw input_error("eqconv_forward: layer is not equivariant");
    if (input.rows() != s.c_in || input.cols() != s.f_in)
        throw input_error("eqconv_forward: input shape mismatch");
    const int kw = s.kernel_width();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.c_out, s.f_out);
    for (int bo = 0; bo < s.c_out / 2; ++bo) {
        for (int f = 0; f < s.f_out; ++f) {
            double acc0 = 0.0, acc1 = 0.0;
            for (int bi = 0; bi < s.c_in / 2; ++bi) {
                for (int k = 0; k < kw; ++k) {
                    const double wk = layer.w(bo, bi * kw + k);
                    acc0 += wk * input(2 * bi, f + k);
                    acc1 += wk * input(2 * bi + 1, f + k);
                }
            }
            out(2 * bo, f) = acc0;
            out(2 * bo + 1, f) = acc1;
        }
    }
    return out;
}

inline Eigen::MatrixXd act_tanh(const Eigen::MatrixXd& input) {
    return input.array().tanh().matrix();
}

namespace detail {

constexpr double kBlockNormGuard = 1e-12;

inline double sigma_log_scale(double n) { return n < kBlockNormGuard ? 1.0 : std::log1p(n) / n; }

template <typename ScaleFn>
Eigen::MatrixXd blockwise_scale(const Eigen::MatrixXd& input, ScaleFn&& scale) {
    if (input.rows() % 2 != 0)
        throw input_error("equivariant activation: row count must be even");
    Eigen::MatrixXd out(input.rows(), input.cols());
    for (int b = 0; b < input.rows() / 2; ++b) {
        for (int f = 0; f < input.cols(); ++f) {
            const Vec2 g(input(2 * b, f), input(2 * b + 1, f));
            const double s = scale(g.norm());
            out(2 * b, f) = g.x() * s;
            out(2 * b + 1, f) = g.y() * s;
        }
    }
    return out;
}

}  // namespace detail

// sigma_0: each 2-vector g scaled by ln(1 + ||g||)/||g||, 1 at the origin.
inline Eigen::MatrixXd act_sigma_log(const Eigen::MatrixXd& input) {
    return detail::blockwise_scale(input, detail::sigma_log_scale);
}

// sigma_1: each 2-vector g scaled by tanh(||g||).
inline Eigen::MatrixXd act_sigma_tanh(const Eigen::MatrixXd& input) {
    return detail::blockwise_scale(input, [](double n) { return std::tanh(n); });
}

// Which activation follows layer l (0-based), per architecture.
enum class Act { Identity, Tanh, SigmaTanh };

inline Act activation_after(Arch arch, int layer) {
    switch (arch) {
        case Arch::TDAGNN: return layer < 2 ? Act::Tanh : Act::Identity;
        case Arch::TDAGNN_TF:
        case Arch::TDAGNN_TF_MU: return layer == 0 ? Act::Tanh : Act::Identity;
        case Arch::ETDAGNN: return layer == 0 ? Act::SigmaTanh : Act::Identity;
    }
    throw input_error("activation_after: unknown architecture");
}

inline Eigen::MatrixXd apply_act(Act act, const Eigen::MatrixXd& x) {
    switch (act) {
        case Act::Identity: return x;
        case Act::Tanh: return act_tanh(x);
        case Act::SigmaTanh: return act_sigma_tanh(x);
    }
    throw input_error("apply_act: unknown activation");
}

struct ForwardTrace {
    Eigen::MatrixXd a0;                  // network input after any pre-activation
    std::array<Eigen::MatrixXd, 3> pre;  // conv outputs
    std::array<Eigen::MatrixXd, 3> post; // after the layer's activation
};

inline Vec2 forward_trace(const NetParams& p, const AgentHistory& history, ForwardTrace& t) {
    if (history.z.rows() != 6 || history.depth() != p.history_depth)
        throw input_error("forward: history shape does not match the network");
    const bool eq = is_equivariant(p.arch);
    if (eq)
        t.a0 = act_sigma_log(history.z);
    else
        t.a0 = history.z;
    const Eigen::MatrixXd* x = &t.a0;
    for (int l = 0; l < 3; ++l) {
        t.pre[l] = eq ? eqconv_forward(p.layers[l], *x) : conv1d_forward(p.layers[l], *x);
        t.post[l] = apply_act(activation_after(p.arch, l), t.pre[l]);
        x = &t.post[l];
    }
    return Vec2(t.post[2](0, 0), t.post[2](1, 0));
}

inline Vec2 forward(const NetParams& p, const AgentHistory& history) {
    ForwardTrace t;
    return forward_trace(p, history, t);
}

// Gradient accumulators shaped like the trainable parameters.
struct NetGrads {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> bias;

    static NetGrads zero(const NetParams& p) {
        NetGrads g;
        for (const auto& layer : p.layers) {
            g.w.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
            g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
        }
        return g;
    }
    void setZero() {
        for (auto& m : w) m.setZero();
        for (auto& b : bias) b.setZero();
    }
};

namespace detail {

inline void conv1d_backward(const ConvLayer& layer, const Eigen::MatrixXd& input,
                            const Eigen::MatrixXd& d_out, Eigen::MatrixXd& d_w,
                            Eigen::VectorXd& d_bias, Eigen::MatrixXd* d_in) {
    const ConvLayerSpec& s = layer.spec;
    const int kw = s.kernel_width();
    if (d_in) d_in->setZero(s.c_in, s.f_in);
    for (int co = 0; co < s.c_out; ++co) {
        for (int f = 0; f < s.f_out; ++f) {
            const double d = d_out(co, f);
            d_bias(co) += d;
            for (int ci = 0; ci < s.c_in; ++ci) {
                for (int k = 0; k < kw; ++k) {
                    d_w(co, ci * kw + k) += d * input(ci, f + k);
                    if (d_in) (*d_in)(ci, f + k) += d * layer.w(co, ci * kw + k);
                }
            }
        }
    }
}

inline void eqconv_backward(const ConvLayer& layer, const Eigen::MatrixXd& input,
                            const Eigen::MatrixXd& d_out, Eigen::MatrixXd& d_w,
                            Eigen::MatrixXd* d_in) {
    const ConvLayerSpec& s = layer.spec;
    const int kw = s.kernel_width();
    if (d_in) d_in->setZero(s.c_in, s.f_in);
    for (int bo = 0; bo < s.c_out / 2; ++bo) {
        for (int f = 0; f < s.f_out; ++f) {
            const double d0 = d_out(2 * bo, f);
            const double d1 = d_out(2 * bo + 1, f);
            for (int bi = 0; bi < s.c_in / 2; ++bi) {
                for (int k = 0; k < kw; ++k) {
                    d_w(bo, bi * kw + k) +=
                        d0 * input(2 * bi, f + k) + d1 * input(2 * bi + 1, f + k);
                    if (d_in) {
                        const double wk = layer.w(bo, bi * kw + k);
                        (*d_in)(2 * bi, f + k) += d0 * wk;
                        (*d_in)(2 * bi + 1, f + k) += d1 * wk;
                    }
                }
            }
        }
    }
}

// d/dx of y = tanh(x) using the stored output.
inline Eigen::MatrixXd tanh_backward(const Eigen::MatrixXd& post, const Eigen::MatrixXd& d_post) {
    return (d_post.array() * (1.0 - post.array().square())).matrix();
}

// Jacobian of g -> g * s(||g||) applied to d_post; the radial term is dropped
// inside the guard band where it vanishes in the limit.
template <typename ScaleFn, typename ScaleDerivFn>
Eigen::MatrixXd radial_backward(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& d_post,
                                ScaleFn&& scale, ScaleDerivFn&& scale_deriv) {
    Eigen::MatrixXd d_pre(pre.rows(), pre.cols());
    for (int b = 0; b < pre.rows() / 2; ++b) {
        for (int f = 0; f < pre.cols(); ++f) {
            const Vec2 g(pre(2 * b, f), pre(2 * b + 1, f));
            const Vec2 dy(d_post(2 * b, f), d_post(2 * b + 1, f));
            const double n = g.norm();
            Vec2 dg = scale(n) * dy;
            if (n >= kBlockNormGuard) dg += (scale_deriv(n) / n) * g.dot(dy) * g;
            d_pre(2 * b, f) = dg.x();
            d_pre(2 * b + 1, f) = dg.y();
        }
    }
    return d_pre;
}

inline Eigen::MatrixXd sigma_tanh_backward(const Eigen::MatrixXd& pre,
                                           const Eigen::MatrixXd& d_post) {
    return radial_backward(
        pre, d_post, [](double n) { return std::tanh(n); },
        [](double n) {
            const double t = std::tanh(n);
            return 1.0 - t * t;
        });
}

inline Eigen::MatrixXd act_backward(Act act, const Eigen::MatrixXd& pre,
                                    const Eigen::MatrixXd& post, const Eigen::MatrixXd& d_post) {
    switch (act) {
        case Act::Identity: return d_post;
        case Act::Tanh: return tanh_backward(post, d_post);
        case Act::SigmaTanh: return sigma_tanh_backward(pre, d_post);
    }
    throw input_error("act_backward: unknown activation");
}

}  // namespace detail

struct TrainingPair {
    const AgentHistory* history;
    Vec2 target;
};

// Mean-squared-error batch loss (1/B) sum ||target - forward(Z)||^2 and its
// exact reverse-mode gradient, accumulated into `grads`.
inline double gradient(const NetParams& p, const std::vector<TrainingPair>& batch,
                       NetGrads& grads) {
    if (batch.empty()) throw input_error("gradient: empty batch");
    grads.setZero();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    ForwardTrace t;
    for (const TrainingPair& sample : batch) {
        const Vec2 out = forward_trace(p, *sample.history, t);
        const Vec2 err = out - sample.target;
        loss += err.squaredNorm() * inv_b;

        Eigen::MatrixXd d(2, 1);
        d(0, 0) = 2.0 * err.x() * inv_b;
        d(1, 0) = 2.0 * err.y() * inv_b;
        for (int l = 2; l >= 0; --l) {
            d = detail::act_backward(activation_after(p.arch, l), t.pre[l], t.post[l], d);
            const Eigen::MatrixXd& input = (l == 0) ? t.a0 : t.post[l - 1];
            Eigen::MatrixXd d_in;
            Eigen::MatrixXd* d_in_ptr = (l == 0) ? nullptr : &d_in;
            if (is_equivariant(p.arch))
                detail::eqconv_backward(p.layers[l], input, d, grads.w[l], d_in_ptr);
            else
                detail::conv1d_backward(p.layers[l], input, d, grads.w[l], grads.bias[l],
                                        d_in_ptr);
            if (l > 0) d = std::move(d_in);
        }
        if (!std::isfinite(loss)) throw numeric_error("gradient: non-finite loss");
    }
    return loss;
}

struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;

    static AdamState zero(const NetParams& p) {
        AdamState s;
        for (const auto& layer : p.layers) {
            s.m_w.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
            s.v_w.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
            s.m_b.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
            s.v_b.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
        }
        return s;
    }
};

namespace detail {

template <typename M>
void adam_update(M& param, const M& grad, M& m, M& v, double lr, double b1, double b2, double eps,
                 double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * grad;
    v = (b2 * v.array() + (1.0 - b2) * grad.array().square()).matrix();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace detail

// Standard Adam step with bias correction; t counts from 1.
inline void adam_step(NetParams& p, const NetGrads& grads, AdamState& state, long t, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (t < 1) throw input_error("adam_step: t must be >= 1");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        detail::adam_update(p.layers[l].w, grads.w[l], state.m_w[l], state.v_w[l], lr, beta1,
                            beta2, eps, bc1, bc2);
        if (p.layers[l].bias.size() > 0)
            detail::adam_update(p.layers[l].bias, grads.bias[l], state.m_b[l], state.v_b[l], lr,
                                beta1, beta2, eps, bc1, bc2);
    }
}

// Xavier uniform on the kernels, zero biases. Fans count kernel taps.
inline void xavier_init(NetParams& p, double gain, Rng& rng) {
    if (!(gain > 0.0)) throw input_error("xavier_init: gain must be > 0");
    for (auto& layer : p.layers) {
        const ConvLayerSpec& s = layer.spec;
        const int kw = s.kernel_width();
        const double fan_in = (s.equivariant ? s.c_in / 2 : s.c_in) * kw;
        const double fan_out = (s.equivariant ? s.c_out / 2 : s.c_out) * kw;
        const double bound = gain * std::sqrt(6.0 / (fan_in + fan_out));
        for (int r = 0; r < layer.w.rows(); ++r)
            for (int c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = rng.uniform(-bound, bound);
        layer.bias.setZero();
    }
}

inline long param_count(const NetParams& p) {
    long n = 0;
    for (const auto& layer : p.layers) n += layer.w.size() + layer.bias.size();
    return n;
}

// Closed-form trainable-weight count for the standard architecture.
inline long param_count(Arch arch, int history_depth) {
    if (is_equivariant(arch)) return 48L * history_depth + 272L;
    return 192L * history_depth + 1154L;
}

enum class ActKind { SigmaLog, SigmaTanh, Tanh };

// Grid estimate of the activation's Lipschitz constant. For the radial
// activations this maximises s(x) + x s'(x); elementwise tanh is bounded by
// its derivative.
inline double lipschitz_estimate(ActKind kind, double grid_max = 5.0, int grid_points = 5001) {
    if (grid_points < 2) throw input_error("lipschitz_estimate: need at least 2 grid points");
    double best = 0.0;
    for (int i = 0; i < grid_points; ++i) {
        const double x = grid_max * static_cast<double>(i) / (grid_points - 1);
        double v = 0.0;
        switch (kind) {
            case ActKind::SigmaLog: {
                if (x < detail::kBlockNormGuard) {
                    v = 1.0;
                } else {
                    const double s = std::log1p(x) / x;
                    const double ds = (x / (1.0 + x) - std::log1p(x)) / (x * x);
                    v = s + x * ds;
                }
                break;
            }
            case ActKind::SigmaTanh: {
                const double t = std::tanh(x);
                v = t + x * (1.0 - t * t);
                break;
            }
            case ActKind::Tanh: {
                const double t = std::tanh(x);
                v = 1.0 - t * t;
                break;
            }
        }
        best = std::max(best, v);
    }
    return best;
}

}  // namespace swarmlab
