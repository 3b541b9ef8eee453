#include "sseg/training.hpp"

#include <cmath>

#include "sseg/rng.hpp"

namespace sseg {

AdamOptimizer::AdamOptimizer(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& name : params.names()) {
        m_.add(name, Tensor::zeros(params.get(name).shape));
        v_.add(name, Tensor::zeros(params.get(name).shape));
    }
}

AdamOptimizer::StepInfo AdamOptimizer::step(ParamStore& params, const ParamStore& grads) {
    double sq = 0.0;
    for (const auto& name : params.names()) {
        const auto& g = grads.get(name);
        const auto& p = params.get(name);
        if (g.shape != p.shape)
            throw ShapeError("optimizer_step: gradient " + shape_str(g.shape) +
                             " does not match parameter '" + name + "' " + shape_str(p.shape));
        for (float v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
    }
    if (!std::isfinite(sq))
        throw NumericError("optimizer_step: non-finite gradient norm; step aborted");

    StepInfo info;
    info.grad_norm = std::sqrt(sq);
    info.clip_scale =
        info.grad_norm > cfg_.clip_norm ? cfg_.clip_norm / info.grad_norm : 1.0;
    info.lr = cfg_.lr;
    if (cfg_.lr_halflife_steps > 0)
        info.lr = cfg_.lr * std::pow(0.5, static_cast<double>(step_ / cfg_.lr_halflife_steps));

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (const auto& name : params.names()) {
        auto& p = params.get(name);
        auto& m = m_.get(name);
        auto& v = v_.get(name);
        const auto& g = grads.get(name);
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double gi = static_cast<double>(g.data[i]) * info.clip_scale;
            const double mi = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * gi;
            const double vi = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * gi * gi;
            m.data[i] = static_cast<float>(mi);
            v.data[i] = static_cast<float>(vi);
            p.data[i] = static_cast<float>(static_cast<double>(p.data[i]) -
                                           info.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps));
        }
    }
    return info;
}

namespace {

/// General bilinear resample (half-pixel centers, edge clamp); used only for
/// crop augmentation, where the scale factor is not an integer ratio.
Tensor resample_bilinear(const Tensor& src, int out_h, int out_w) {
    const int N = src.dim(0), C = src.dim(1), H = src.dim(2), W = src.dim(3);
    Tensor out({N, C, out_h, out_w});
    const double sy = static_cast<double>(H) / out_h;
    const double sx = static_cast<double>(W) / out_w;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < out_h; ++oy) {
                const double fy = (oy + 0.5) * sy - 0.5;
                int y0 = static_cast<int>(std::floor(fy));
                const double ty = fy - y0;
                const int y0c = std::clamp(y0, 0, H - 1), y1c = std::clamp(y0 + 1, 0, H - 1);
                for (int ox = 0; ox < out_w; ++ox) {
                    const double fx = (ox + 0.5) * sx - 0.5;
                    int x0 = static_cast<int>(std::floor(fx));
                    const double tx = fx - x0;
                    const int x0c = std::clamp(x0, 0, W - 1), x1c = std::clamp(x0 + 1, 0, W - 1);
                    const double v =
                        (1 - ty) * ((1 - tx) * src.at4(n, c, y0c, x0c) + tx * src.at4(n, c, y0c, x1c)) +
                        ty * ((1 - tx) * src.at4(n, c, y1c, x0c) + tx * src.at4(n, c, y1c, x1c));
                    out.at4(n, c, oy, ox) = static_cast<float>(v);
                }
            }
    return out;
}

Tensor crop(const Tensor& src, int oy, int ox, int ch, int cw) {
    const int N = src.dim(0), C = src.dim(1);
    Tensor out({N, C, ch, cw});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < ch; ++y)
                for (int x = 0; x < cw; ++x)
                    out.at4(n, c, y, x) = src.at4(n, c, oy + y, ox + x);
    return out;
}

/// Crops a fraction-sized window at the given offset and scales back to the
/// original resolution; masks are re-binarized at 0.5.
SequenceTensors crop_resize_view(const SequenceTensors& seq, double fraction, Rng& rng) {
    const int H = seq.rgb[0].dim(2), W = seq.rgb[0].dim(3);
    const int ch = std::max(1, static_cast<int>(std::lround(H * fraction)));
    const int cw = std::max(1, static_cast<int>(std::lround(W * fraction)));
    const int oy = static_cast<int>(rng.uniform_int(0, H - ch));
    const int ox = static_cast<int>(rng.uniform_int(0, W - cw));
    SequenceTensors out;
    out.name = seq.name;
    out.rgb.reserve(seq.rgb.size());
    out.flow.reserve(seq.flow.size());
    out.mask.reserve(seq.mask.size());
    for (size_t t = 0; t < seq.rgb.size(); ++t) {
        out.rgb.push_back(resample_bilinear(crop(seq.rgb[t], oy, ox, ch, cw), H, W));
        out.flow.push_back(resample_bilinear(crop(seq.flow[t], oy, ox, ch, cw), H, W));
        Tensor m = resample_bilinear(crop(seq.mask[t], oy, ox, ch, cw), H, W);
        for (float& v : m.data) v = v >= 0.5f ? 1.0f : 0.0f;
        out.mask.push_back(std::move(m));
    }
    return out;
}

void check_sequence(const ModelConfig& model_cfg, const SequenceTensors& seq) {
    if (seq.rgb.empty() || seq.rgb.size() != seq.flow.size() || seq.rgb.size() != seq.mask.size())
        throw SpecError("sequence '" + seq.name + "' has mismatched frame/flow/mask counts");
    const int div = std::max(resolution_divisor(model_cfg.levels), 4);
    const int H = seq.rgb[0].dim(2), W = seq.rgb[0].dim(3);
    if (H % div != 0 || W % div != 0)
        throw ShapeError("sequence '" + seq.name + "' resolution " + std::to_string(W) + "x" +
                         std::to_string(H) + " must be divisible by " + std::to_string(div));
}

struct BatchResult {
    std::vector<Tape::Id> probs;
    std::vector<Tensor> next_states;
};

/// Forward over frames [t0, t1) of one sequence, carrying motion states.
BatchResult run_batch(Tape& tape, const BoundParamsT<float>& bound, const ModelConfig& model_cfg,
                      const SequenceTensors& seq, size_t t0, size_t t1,
                      const std::vector<Tensor>& states_in) {
    std::vector<Tape::Id> flows, rgbs;
    for (size_t t = t0; t < t1; ++t) {
        flows.push_back(tape.input(Tensor(seq.flow[t])));
        rgbs.push_back(tape.input(Tensor(seq.rgb[t])));
    }
    std::vector<Tape::Id> state_ids;
    if (motion_enabled(model_cfg)) {
        std::vector<Tensor> init = states_in;
        if (init.empty())
            init = zero_stack_state<float>(motion_stack_config(model_cfg, false), 1,
                                           seq.rgb[0].dim(2), seq.rgb[0].dim(3));
        for (auto& s : init) state_ids.push_back(tape.input(std::move(s)));
    }
    BatchResult res;
    res.probs = build_pixel_graph(tape, bound, model_cfg, flows, rgbs, &state_ids);
    if (motion_enabled(model_cfg))
        for (auto id : state_ids) res.next_states.push_back(tape.value(id));
    return res;
}

}  // namespace

void train_model(const ModelConfig& model_cfg, ParamStore& params,
                 const std::vector<SequenceTensors>& dataset, const TrainConfig& cfg,
                 const TrainLogger& log) {
    if (dataset.empty()) throw SpecError("train: empty dataset");
    for (const auto& seq : dataset) check_sequence(model_cfg, seq);
    if (cfg.batch_frames < 1) throw ConfigError("train.batch_frames must be >= 1");

    AdamOptimizer opt(params, cfg.adam);
    Rng rng(Rng::derive(cfg.seed, 0x7215));
    std::int64_t step = 0;

    ParamStore grads;
    for (const auto& name : params.names()) grads.add(name, Tensor::zeros(params.get(name).shape));

    while (step < cfg.steps) {
        // one epoch: seeded video order, whole videos at a time so the
        // stateful hand-off stays within a video
        std::vector<size_t> order(dataset.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

        for (size_t vi : order) {
            const bool do_crop = cfg.augment && cfg.crop_fraction < 1.0;
            SequenceTensors cropped;
            if (do_crop) cropped = crop_resize_view(dataset[vi], cfg.crop_fraction, rng);
            const SequenceTensors& seq = do_crop ? cropped : dataset[vi];

            std::vector<Tensor> states;  // zero-reset at video start
            const size_t frames = seq.rgb.size();
            for (size_t t0 = 0; t0 < frames && step < cfg.steps; t0 += static_cast<size_t>(cfg.batch_frames)) {
                const size_t t1 = std::min(frames, t0 + static_cast<size_t>(cfg.batch_frames));

                Tape tape;
                BoundParamsT<float> bound(tape, params);
                BatchResult batch = run_batch(tape, bound, model_cfg, seq, t0, t1, states);

                const double inv_t = 1.0 / static_cast<double>(batch.probs.size());
                double loss = 0.0;
                std::vector<std::pair<Tape::Id, Tensor>> seeds;
                for (size_t i = 0; i < batch.probs.size(); ++i) {
                    auto bce = bce_loss(tape.value(batch.probs[i]), seq.mask[t0 + i]);
                    loss += bce.loss * inv_t;
                    for (float& g : bce.grad.data) g = static_cast<float>(g * inv_t);
                    seeds.emplace_back(batch.probs[i], std::move(bce.grad));
                }
                tape.backward(seeds);

                for (const auto& name : grads.names())
                    std::fill(grads.get(name).data.begin(), grads.get(name).data.end(), 0.0f);
                bound.collect_grads(grads);

                auto info = opt.step(params, grads);
                ++step;
                if (log) log(TrainStepRow{step, loss, info.lr, info.grad_norm});

                states = std::move(batch.next_states);
            }
        }
    }
}

std::vector<Tensor> infer_sequence(const ModelConfig& model_cfg, const ParamStore& params,
                                   const SequenceTensors& seq, int batch_frames) {
    check_sequence(model_cfg, seq);
    if (batch_frames < 1) throw ConfigError("infer.batch_frames must be >= 1");
    std::vector<Tensor> out;
    std::vector<Tensor> states;
    const size_t frames = seq.rgb.size();
    for (size_t t0 = 0; t0 < frames; t0 += static_cast<size_t>(batch_frames)) {
        const size_t t1 = std::min(frames, t0 + static_cast<size_t>(batch_frames));
        Tape tape;
        BoundParamsT<float> bound(tape, params);
        BatchResult batch = run_batch(tape, bound, model_cfg, seq, t0, t1, states);
        for (auto id : batch.probs) out.push_back(tape.value(id));
        states = std::move(batch.next_states);
    }
    return out;
}

}  // namespace sseg
