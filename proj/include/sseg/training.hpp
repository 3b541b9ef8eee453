#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sseg/param_store.hpp"
#include "sseg/streams.hpp"

namespace sseg {

// ---------------------------------------------------------------------------
// loss

template <typename T>
struct BceResultT {
    double loss = 0.0;
    TensorT<T> grad;  // d loss / d prob
};

/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7].
/// Ground truth must be exactly 0/1 valued.
template <typename T>
BceResultT<T> bce_loss(const TensorT<T>& prob, const TensorT<T>& gt) {
    require_same_shape("bce_loss", prob.shape, gt.shape);
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    BceResultT<T> r;
    r.grad = TensorT<T>(prob.shape);
    const double inv_n = 1.0 / static_cast<double>(prob.numel());
    double acc = 0.0;
    for (std::int64_t i = 0; i < prob.numel(); ++i) {
        const double y = static_cast<double>(gt.data[static_cast<size_t>(i)]);
        if (y != 0.0 && y != 1.0)
            throw SpecError("bce_loss: ground truth value " + std::to_string(y) +
                            " outside {0,1}");
        const double praw = static_cast<double>(prob.data[static_cast<size_t>(i)]);
        const double p = std::clamp(praw, lo, hi);
        acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        // clamped coordinates get zero gradient
        const double g = (praw > lo && praw < hi) ? (p - y) / (p * (1.0 - p)) * inv_n : 0.0;
        r.grad.data[static_cast<size_t>(i)] = static_cast<T>(g);
    }
    r.loss = acc * inv_n;
    return r;
}

// ---------------------------------------------------------------------------
// optimizer: global-norm clipping + Adam with bias correction

struct AdamConfig {
    double lr = 1e-4;
    double clip_norm = 5.0;
    int lr_halflife_steps = 2000;  // learning rate halves every this many steps
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamOptimizer {
public:
    AdamOptimizer(const ParamStore& params, AdamConfig cfg);

    struct StepInfo {
        double grad_norm = 0.0;  // pre-clip global norm
        double clip_scale = 1.0;
        double lr = 0.0;
    };

    /// Clips the global gradient norm, then applies one Adam update.
    /// Throws NumericError on non-finite gradients without touching params.
    StepInfo step(ParamStore& params, const ParamStore& grads);

    std::int64_t steps_taken() const { return step_; }

private:
    AdamConfig cfg_;
    ParamStore m_, v_;
    std::int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// training loop

/// One video, fully preprocessed in memory: RGB in [-1,1], flow normalized
/// to unit maximum magnitude per frame, binary masks in {0,1}.
struct SequenceTensors {
    std::string name;
    std::vector<Tensor> rgb;   // [1,3,H,W]
    std::vector<Tensor> flow;  // [1,2,H,W]
    std::vector<Tensor> mask;  // [1,1,H,W]
};

struct TrainConfig {
    int steps = 1000;
    int batch_frames = 20;  // T
    std::uint64_t seed = 1;
    double crop_fraction = 0.875;  // of each dimension; 1 disables cropping
    bool augment = true;
    AdamConfig adam;
};

struct TrainStepRow {
    std::int64_t step;
    double loss;
    double lr;
    double grad_norm;
};

using TrainLogger = std::function<void(const TrainStepRow&)>;

/// Seeded training loop. Iterates mini-batches of `batch_frames` consecutive
/// frames with stateful hand-off within each video and a zero-state reset
/// between videos. Deterministic for a fixed seed.
void train_model(const ModelConfig& model_cfg, ParamStore& params,
                 const std::vector<SequenceTensors>& dataset, const TrainConfig& cfg,
                 const TrainLogger& log);

/// Runs the pixel model over one full sequence (stateful batches of
/// `batch_frames`) and returns the per-frame probability maps [1,1,H,W].
std::vector<Tensor> infer_sequence(const ModelConfig& model_cfg, const ParamStore& params,
                                   const SequenceTensors& seq, int batch_frames);

}  // namespace sseg
