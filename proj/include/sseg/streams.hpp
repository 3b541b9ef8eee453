#pragma once

#include <string>
#include <vector>

#include "sseg/convgru.hpp"
#include "sseg/param_store.hpp"

// The two-stream pixel model: an hourglass of ConvGRU cells per direction
// (strided encoder cells, bilinearly upsampled decoder cells with skip
// concatenation, terminal stride-2 transposed convolution back to full
// resolution), a small stateless appearance CNN, and a 1x1 fusion
// convolution applied at the original resolution.

namespace sseg {

struct StackConfig {
    int levels = 5;              // odd
    std::vector<int> hidden;     // per cell, size == levels
    int k = 7;
    int in_channels = 2;
    int out_channels = 16;
    int out_kernel = 4;          // terminal transposed conv
};

inline int encoder_cells(int levels) { return (levels + 1) / 2; }

/// Input resolution divisor required by the stride-2 ladder.
inline int resolution_divisor(int levels) { return 1 << encoder_cells(levels); }

inline void validate_stack_config(const StackConfig& cfg) {
    if (cfg.levels < 3 || cfg.levels % 2 == 0)
        throw ConfigError("stack levels must be odd and >= 3, got " + std::to_string(cfg.levels));
    if (static_cast<int>(cfg.hidden.size()) != cfg.levels)
        throw ConfigError("stack hidden widths must list one entry per cell");
    const int E = encoder_cells(cfg.levels);
    for (int l = 0; l < cfg.levels; ++l) {
        if (cfg.hidden[static_cast<size_t>(l)] != cfg.hidden[static_cast<size_t>(cfg.levels - 1 - l)])
            throw ConfigError("stack hidden widths must be symmetric for skip connections");
        (void)E;
    }
}

/// Input channel count of cell `l` (0-based).
inline int stack_cell_in_channels(const StackConfig& cfg, int l) {
    const int E = encoder_cells(cfg.levels);
    if (l == 0) return cfg.in_channels;
    if (l <= E) return cfg.hidden[static_cast<size_t>(l - 1)];
    // later decoder cells consume [h^{l-1} ; h^{L-l}] (0-based skip pair)
    return cfg.hidden[static_cast<size_t>(l - 1)] + cfg.hidden[static_cast<size_t>(cfg.levels - l)];
}

inline ConvGruConfig stack_cell_config(const StackConfig& cfg, int l) {
    ConvGruConfig c;
    c.k = cfg.k;
    c.hidden = cfg.hidden[static_cast<size_t>(l)];
    c.in_channels = stack_cell_in_channels(cfg, l);
    c.stride = l < encoder_cells(cfg.levels) ? 2 : 1;
    return c;
}

template <typename T>
void register_stack(ParamStoreT<T>& store, const std::string& prefix, const StackConfig& cfg,
                    Rng& rng) {
    validate_stack_config(cfg);
    for (int l = 0; l < cfg.levels; ++l)
        register_gru_cell(store, prefix + ".cell" + std::to_string(l), stack_cell_config(cfg, l),
                          rng);
    const int term_in = cfg.hidden[static_cast<size_t>(cfg.levels - 1)] + cfg.hidden[0];
    store.add(prefix + ".out.w", uniform_fan_in_init<T>(
                                     {term_in, cfg.out_channels, cfg.out_kernel, cfg.out_kernel},
                                     rng));
    store.add(prefix + ".out.b", TensorT<T>::zeros({cfg.out_channels}));
}

/// Zero states at the scales of the stride ladder for an HxW input.
template <typename T>
std::vector<TensorT<T>> zero_stack_state(const StackConfig& cfg, int n, int h, int w) {
    const int E = encoder_cells(cfg.levels);
    std::vector<TensorT<T>> states;
    states.reserve(static_cast<size_t>(cfg.levels));
    for (int l = 0; l < cfg.levels; ++l) {
        const int depth = l < E ? l + 1 : cfg.levels - l;  // halvings relative to input
        states.push_back(TensorT<T>::zeros(
            {n, cfg.hidden[static_cast<size_t>(l)], h >> depth, w >> depth}));
    }
    return states;
}

/// One frame through the hourglass. `states` holds the per-cell state ids
/// and is replaced with the updated states. Returns the full-resolution
/// output feature id.
template <typename T>
typename TapeT<T>::Id multiscale_step(TapeT<T>& tape, const BoundParamsT<T>& params,
                                      const std::string& prefix, const StackConfig& cfg,
                                      typename TapeT<T>::Id x,
                                      std::vector<typename TapeT<T>::Id>& states) {
    using Id = typename TapeT<T>::Id;
    const auto& xs = tape.value(x).shape;
    const int div = resolution_divisor(cfg.levels);
    if (xs[2] % div != 0 || xs[3] % div != 0)
        throw ShapeError("multiscale_step: resolution " + std::to_string(xs[3]) + "x" +
                         std::to_string(xs[2]) + " must be divisible by " + std::to_string(div) +
                         " for " + std::to_string(cfg.levels) + " levels");
    if (states.size() != static_cast<size_t>(cfg.levels))
        throw ShapeError("multiscale_step: expected " + std::to_string(cfg.levels) + " states");

    const int E = encoder_cells(cfg.levels);
    std::vector<Id> h(static_cast<size_t>(cfg.levels));
    Id cur = x;
    for (int l = 0; l < E; ++l) {
        h[static_cast<size_t>(l)] =
            gru_step(tape, params, prefix + ".cell" + std::to_string(l), stack_cell_config(cfg, l),
                     cur, states[static_cast<size_t>(l)]);
        cur = h[static_cast<size_t>(l)];
    }
    for (int l = E; l < cfg.levels; ++l) {
        cur = tape.resize_bilinear(cur, 2);
        h[static_cast<size_t>(l)] =
            gru_step(tape, params, prefix + ".cell" + std::to_string(l), stack_cell_config(cfg, l),
                     cur, states[static_cast<size_t>(l)]);
        // skip connection: pair the decoder output with the same-scale
        // encoder output for the next cell
        cur = tape.concat_channels(
            {h[static_cast<size_t>(l)], h[static_cast<size_t>(cfg.levels - 1 - l)]});
    }
    states = h;
    return tape.conv2d_transpose(cur, params[prefix + ".out.w"], params[prefix + ".out.b"], 2);
}

/// Forward pass over T frames followed by a backward pass over the reversed
/// concatenation of forward outputs and flow; the backward stack starts from
/// the final forward state. Returns per-frame [o_fwd ; o_bwd] features in
/// forward frame order, plus the forward outputs themselves, and replaces
/// `fwd_states` with the final forward state ids for the next batch.
template <typename T>
struct BidirectionalResult {
    std::vector<typename TapeT<T>::Id> z;       // fused per-frame features
    std::vector<typename TapeT<T>::Id> o_fwd;   // forward-direction outputs
};

template <typename T>
BidirectionalResult<T> cascaded_bidirectional(TapeT<T>& tape, const BoundParamsT<T>& params,
                                              const std::string& fwd_prefix,
                                              const std::string& bwd_prefix,
                                              const StackConfig& fwd_cfg,
                                              const StackConfig& bwd_cfg,
                                              const std::vector<typename TapeT<T>::Id>& flows,
                                              std::vector<typename TapeT<T>::Id>& fwd_states) {
    using Id = typename TapeT<T>::Id;
    if (flows.empty()) throw ShapeError("cascaded_bidirectional: empty frame sequence");
    const int T_len = static_cast<int>(flows.size());

    BidirectionalResult<T> out;
    out.o_fwd.reserve(static_cast<size_t>(T_len));
    for (int t = 0; t < T_len; ++t)
        out.o_fwd.push_back(
            multiscale_step(tape, params, fwd_prefix, fwd_cfg, flows[static_cast<size_t>(t)],
                            fwd_states));

    // backward pass consumes reverse([o_fwd ; flow]) from the final forward state
    std::vector<Id> bwd_states = fwd_states;
    std::vector<Id> o_bwd(static_cast<size_t>(T_len));
    for (int s = 0; s < T_len; ++s) {
        const int t = T_len - 1 - s;
        Id in = tape.concat_channels(
            {out.o_fwd[static_cast<size_t>(t)], flows[static_cast<size_t>(t)]});
        o_bwd[static_cast<size_t>(s)] =
            multiscale_step(tape, params, bwd_prefix, bwd_cfg, in, bwd_states);
    }

    out.z.reserve(static_cast<size_t>(T_len));
    for (int t = 0; t < T_len; ++t)
        out.z.push_back(tape.concat_channels(
            {out.o_fwd[static_cast<size_t>(t)], o_bwd[static_cast<size_t>(T_len - 1 - t)]}));
    return out;
}

// ---------------------------------------------------------------------------
// appearance stream: small per-frame CNN at 1/4 resolution, upsampled x4

struct AppearanceConfig {
    std::vector<int> widths = {16, 32, 32, 16};  // strides 2,2,1,1
    int kernel = 3;
    float slope = 0.1f;  // leaky relu
};

template <typename T>
void register_appearance(ParamStoreT<T>& store, const std::string& prefix,
                         const AppearanceConfig& cfg, Rng& rng) {
    if (cfg.widths.size() != 4) throw ConfigError("appearance network expects 4 conv widths");
    int in_ch = 3;
    for (size_t i = 0; i < cfg.widths.size(); ++i) {
        store.add(prefix + ".conv" + std::to_string(i) + ".w",
                  uniform_fan_in_init<T>({cfg.widths[i], in_ch, cfg.kernel, cfg.kernel}, rng));
        store.add(prefix + ".conv" + std::to_string(i) + ".b",
                  TensorT<T>::zeros({cfg.widths[i]}));
        in_ch = cfg.widths[i];
    }
}

template <typename T>
typename TapeT<T>::Id appearance_forward(TapeT<T>& tape, const BoundParamsT<T>& params,
                                         const std::string& prefix, const AppearanceConfig& cfg,
                                         typename TapeT<T>::Id rgb) {
    using Id = typename TapeT<T>::Id;
    const auto& s = tape.value(rgb).shape;
    if (s[2] % 4 != 0 || s[3] % 4 != 0)
        throw ShapeError("appearance_forward: resolution " + std::to_string(s[3]) + "x" +
                         std::to_string(s[2]) + " must be divisible by 4");
    Id cur = rgb;
    const int strides[4] = {2, 2, 1, 1};
    for (int i = 0; i < 4; ++i) {
        cur = tape.conv2d(cur, params[prefix + ".conv" + std::to_string(i) + ".w"],
                          params[prefix + ".conv" + std::to_string(i) + ".b"], strides[i]);
        cur = tape.leaky_relu(cur, static_cast<T>(cfg.slope));
    }
    return tape.resize_bilinear(cur, 4);
}

// ---------------------------------------------------------------------------
// fusion head: channel concat -> 1x1 conv -> sigmoid

template <typename T>
void register_fusion(ParamStoreT<T>& store, const std::string& prefix, int in_channels, Rng& rng) {
    store.add(prefix + ".w", uniform_fan_in_init<T>({1, in_channels, 1, 1}, rng));
    store.add(prefix + ".b", TensorT<T>::zeros({1}));
}

template <typename T>
typename TapeT<T>::Id fuse_streams(TapeT<T>& tape, const BoundParamsT<T>& params,
                                   const std::string& prefix,
                                   const std::vector<typename TapeT<T>::Id>& parts) {
    using Id = typename TapeT<T>::Id;
    Id cat = tape.concat_channels(parts);
    Id logit = tape.conv2d(cat, params[prefix + ".w"], params[prefix + ".b"], 1);
    return tape.sigmoid(logit);
}

// ---------------------------------------------------------------------------
// whole pixel-level model

struct ModelConfig {
    int levels = 5;
    std::vector<int> hidden = {4, 8, 16, 8, 4};
    int k = 7;
    int motion_channels = 16;  // terminal feature channels per direction
    AppearanceConfig appearance;
    std::string streams = "both";  // both | motion | appearance
};

inline bool motion_enabled(const ModelConfig& m) { return m.streams != "appearance"; }
inline bool appearance_enabled(const ModelConfig& m) { return m.streams != "motion"; }

inline void validate_model_config(const ModelConfig& m) {
    if (m.streams != "both" && m.streams != "motion" && m.streams != "appearance")
        throw ConfigError("model.streams must be one of both|motion|appearance");
    StackConfig s;
    s.levels = m.levels;
    s.hidden = m.hidden;
    s.k = m.k;
    validate_stack_config(s);
    for (int hdim : m.hidden)
        if (hdim < 2 || hdim % 2 != 0)
            throw ConfigError("hidden widths must be even and >= 2");
}

inline StackConfig motion_stack_config(const ModelConfig& m, bool backward) {
    StackConfig s;
    s.levels = m.levels;
    s.hidden = m.hidden;
    s.k = m.k;
    s.in_channels = backward ? m.motion_channels + 2 : 2;
    s.out_channels = m.motion_channels;
    return s;
}

inline int fusion_in_channels(const ModelConfig& m) {
    int c = 2;  // flow is re-injected at the fusion stage
    if (motion_enabled(m)) c += 2 * m.motion_channels;
    if (appearance_enabled(m)) c += m.appearance.widths.back();
    return c;
}

template <typename T>
ParamStoreT<T> init_model_params(const ModelConfig& m, std::uint64_t seed) {
    validate_model_config(m);
    ParamStoreT<T> store;
    Rng rng(Rng::derive(seed, 0x70d3));
    if (motion_enabled(m)) {
        register_stack(store, "motion.fwd", motion_stack_config(m, false), rng);
        register_stack(store, "motion.bwd", motion_stack_config(m, true), rng);
    }
    if (appearance_enabled(m)) register_appearance(store, "app", m.appearance, rng);
    register_fusion(store, "fuse", fusion_in_channels(m), rng);
    return store;
}

/// Graph for one batch of T frames. Returns per-frame foreground probability
/// ids; `fwd_states` carries motion state ids across batches (empty means
/// zero-initialized, and it is refilled with the final states).
template <typename T>
std::vector<typename TapeT<T>::Id> build_pixel_graph(
    TapeT<T>& tape, const BoundParamsT<T>& params, const ModelConfig& m,
    const std::vector<typename TapeT<T>::Id>& flows,
    const std::vector<typename TapeT<T>::Id>& rgbs,
    std::vector<typename TapeT<T>::Id>* fwd_states) {
    using Id = typename TapeT<T>::Id;
    if (flows.size() != rgbs.size() || flows.empty())
        throw ShapeError("build_pixel_graph: flow/frame counts differ or are empty");
    const int T_len = static_cast<int>(flows.size());

    std::vector<Id> zs;
    if (motion_enabled(m)) {
        if (fwd_states->empty()) {
            const auto& fs = tape.value(flows[0]).shape;
            for (auto& s :
                 zero_stack_state<T>(motion_stack_config(m, false), fs[0], fs[2], fs[3]))
                fwd_states->push_back(tape.input(std::move(s)));
        }
        auto bi = cascaded_bidirectional(tape, params, "motion.fwd", "motion.bwd",
                                         motion_stack_config(m, false),
                                         motion_stack_config(m, true), flows, *fwd_states);
        zs = std::move(bi.z);
    }
    std::vector<Id> probs;
    probs.reserve(static_cast<size_t>(T_len));
    for (int t = 0; t < T_len; ++t) {
        std::vector<Id> parts;
        if (motion_enabled(m)) parts.push_back(zs[static_cast<size_t>(t)]);
        if (appearance_enabled(m))
            parts.push_back(
                appearance_forward(tape, params, "app", m.appearance, rgbs[static_cast<size_t>(t)]));
        parts.push_back(flows[static_cast<size_t>(t)]);
        probs.push_back(fuse_streams(tape, params, "fuse", parts));
    }
    return probs;
}

}  // namespace sseg
