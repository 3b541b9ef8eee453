#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sseg/param_store.hpp"
#include "sseg/rng.hpp"
#include "sseg/tape.hpp"

// Convolutional GRU cell with asymmetric separable convolutions.
//
// Each gate/candidate transform of each stream is a pair of separable
// convolutions computed in both factorization orders (1xk then kx1, and
// kx1 then 1xk) with individually learned weights. Each order emits
// hidden/2 channels; the two results are stacked on the channel axis and
// layer-normalized. There are no convolution biases inside the blocks: the
// layer-norm affine carries the bias role.
//
// The state update is
//   r = sigmoid(LNx(Bx_r(x)) + LNh(Bh_r(h)))
//   z = sigmoid(LNx(Bx_z(x)) + LNh(Bh_z(h)))
//   q = r (.) h
//   hcand = tanh(LNx(Bx_c(x)) + LNq(Bq_c(q)))
//   h_t = z (.) h_{t-1} + (1 - z) (.) hcand
// Note that z scales the previous state, the mirror image of the common
// GRU convention.
//
// A strided cell halves both spatial dimensions on the input path; each
// separable conv strides along its own kernel axis (the 1xk conv strides
// width, the kx1 conv strides height) so no tap is skipped.

namespace sseg {

struct ConvGruConfig {
    int k = 7;
    int hidden = 16;
    int in_channels = 2;
    int stride = 1;  // input path only; 1 or 2
};

inline void validate_gru_config(const ConvGruConfig& cfg) {
    if (cfg.k < 1 || cfg.k % 2 == 0)
        throw ConfigError("convgru kernel size must be odd, got " + std::to_string(cfg.k));
    if (cfg.hidden < 2 || cfg.hidden % 2 != 0)
        throw ConfigError("convgru hidden channels must be even, got " +
                          std::to_string(cfg.hidden));
    if (cfg.stride != 1 && cfg.stride != 2)
        throw ConfigError("convgru stride must be 1 or 2, got " + std::to_string(cfg.stride));
    if (cfg.in_channels < 1) throw ConfigError("convgru input channels must be positive");
}

template <typename T>
TensorT<T> uniform_fan_in_init(std::vector<int> shape, Rng& rng) {
    std::int64_t fan_in = 1;
    for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    TensorT<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-a, a));
    return t;
}

/// Registers the kernels and layer-norm affines of one asymmetric block
/// (one gate, one stream) under `prefix`.
template <typename T>
void register_asymmetric_block(ParamStoreT<T>& store, const std::string& prefix, int k,
                               int in_channels, int hidden, Rng& rng) {
    const int half = hidden / 2;
    // order a: 1xk then kx1; order b: kx1 then 1xk
    store.add(prefix + ".a0.w", uniform_fan_in_init<T>({half, in_channels, 1, k}, rng));
    store.add(prefix + ".a1.w", uniform_fan_in_init<T>({half, half, k, 1}, rng));
    store.add(prefix + ".b0.w", uniform_fan_in_init<T>({half, in_channels, k, 1}, rng));
    store.add(prefix + ".b1.w", uniform_fan_in_init<T>({half, half, 1, k}, rng));
    store.add(prefix + ".ln.gain", TensorT<T>::full({hidden}, T(1)));
    store.add(prefix + ".ln.bias", TensorT<T>::zeros({hidden}));
}

template <typename T>
void register_gru_cell(ParamStoreT<T>& store, const std::string& prefix, const ConvGruConfig& cfg,
                       Rng& rng) {
    validate_gru_config(cfg);
    for (const char* gate : {"r", "z", "c"}) {
        register_asymmetric_block(store, prefix + "." + gate + ".x", cfg.k, cfg.in_channels,
                                  cfg.hidden, rng);
        register_asymmetric_block(store, prefix + "." + gate + ".h", cfg.k, cfg.hidden, cfg.hidden,
                                  rng);
    }
}

namespace detail {

template <typename T>
typename TapeT<T>::Id zero_bias(TapeT<T>& tape, int channels) {
    return tape.input(TensorT<T>::zeros({channels}));
}

}  // namespace detail

/// Both-order separable convolution block followed by layer norm.
/// `stride` halves both spatial dims when 2 (input path); the state path
/// uses stride 1. Each conv of a pair strides only along its own kernel
/// axis (1xk strides width, kx1 strides height) so no tap is skipped, and
/// the pair covers both axes exactly once. Conv orientation follows the
/// kernel shapes, so swapping the two order slots wholesale swaps the
/// concatenation halves.
template <typename T>
typename TapeT<T>::Id asymmetric_block(TapeT<T>& tape, const BoundParamsT<T>& params,
                                       const std::string& prefix, typename TapeT<T>::Id s,
                                       int hidden, int stride) {
    using Id = typename TapeT<T>::Id;
    const Id zb = detail::zero_bias(tape, hidden / 2);
    auto run_pair = [&](const std::string& k0, const std::string& k1) {
        const auto& w0 = tape.value(params[k0]).shape;
        const bool width_first = w0[3] > 1 || w0[2] == 1;  // 1xk (or 1x1) first
        Id h0 = width_first ? tape.conv2d(s, params[k0], zb, 1, stride)
                            : tape.conv2d(s, params[k0], zb, stride, 1);
        return width_first ? tape.conv2d(h0, params[k1], zb, stride, 1)
                           : tape.conv2d(h0, params[k1], zb, 1, stride);
    };
    Id a = run_pair(prefix + ".a0.w", prefix + ".a1.w");
    Id b = run_pair(prefix + ".b0.w", prefix + ".b1.w");
    Id stacked = tape.concat_channels({a, b});
    return tape.layer_norm(stacked, params[prefix + ".ln.gain"], params[prefix + ".ln.bias"]);
}

/// One ConvGRU step. Returns the new state id.
template <typename T>
typename TapeT<T>::Id gru_step(TapeT<T>& tape, const BoundParamsT<T>& params,
                               const std::string& prefix, const ConvGruConfig& cfg,
                               typename TapeT<T>::Id x, typename TapeT<T>::Id h_prev) {
    using Id = typename TapeT<T>::Id;
    const auto& xs = tape.value(x).shape;
    const auto& hs = tape.value(h_prev).shape;
    const int eh = ceil_div(xs[2], cfg.stride), ew = ceil_div(xs[3], cfg.stride);
    if (hs[1] != cfg.hidden || hs[2] != eh || hs[3] != ew)
        throw ShapeError("gru_step: state " + shape_str(hs) + " does not match input " +
                         shape_str(xs) + " at stride " + std::to_string(cfg.stride));

    Id r = tape.sigmoid(tape.add(
        asymmetric_block(tape, params, prefix + ".r.x", x, cfg.hidden, cfg.stride),
        asymmetric_block(tape, params, prefix + ".r.h", h_prev, cfg.hidden, 1)));
    Id z = tape.sigmoid(tape.add(
        asymmetric_block(tape, params, prefix + ".z.x", x, cfg.hidden, cfg.stride),
        asymmetric_block(tape, params, prefix + ".z.h", h_prev, cfg.hidden, 1)));
    Id q = tape.hadamard(r, h_prev);
    Id cand = tape.tanh_(tape.add(
        asymmetric_block(tape, params, prefix + ".c.x", x, cfg.hidden, cfg.stride),
        asymmetric_block(tape, params, prefix + ".c.h", q, cfg.hidden, 1)));
    // h_t = z (.) h_prev + (1 - z) (.) cand, exactly as printed
    Id keep = tape.hadamard(z, h_prev);
    Id take = tape.hadamard(tape.scale(z, T(-1), T(1)), cand);
    return tape.add(keep, take);
}

}  // namespace sseg
