#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "sseg/rng.hpp"
#include "sseg/tape.hpp"

namespace sseg {

/// Builds a graph from the given leaves (all registered as params so their
/// gradients are tracked) and returns the root id.
using GraphBuilder =
    std::function<DTape::Id(DTape&, const std::vector<DTape::Id>&)>;

/// Scalar objective evaluated on the root value; returns the objective and
/// its gradient with respect to the root.
struct ScalarObjective {
    double value = 0.0;
    DTensor grad;
};
using ObjectiveFn = std::function<ScalarObjective(const DTensor&)>;

struct GradCheckOptions {
    double step = 1e-5;
    // central differences are run on every coordinate up to this count,
    // a seeded random subset beyond it
    std::int64_t max_coords = 10000;
};

/// Compares the tape's analytic gradients against 64-bit central finite
/// differences of `objective` over every leaf coordinate (or a seeded subset
/// when the total exceeds max_coords). Returns the worst per-coordinate
/// error |analytic - numeric| / max(|analytic|, |numeric|, 1): relative for
/// order-one gradients, absolute below that (keeps finite-difference
/// cancellation noise on near-zero coordinates from dominating).
inline double grad_check_objective(const GraphBuilder& build, std::vector<DTensor> leaves,
                                   const ObjectiveFn& objective, std::uint64_t seed,
                                   GradCheckOptions opt = {}) {
    auto eval = [&](const std::vector<DTensor>& pt, std::vector<DTensor>* grads) {
        DTape tape;
        std::vector<DTape::Id> ids;
        ids.reserve(pt.size());
        for (const auto& t : pt) ids.push_back(tape.param(DTensor(t)));
        DTape::Id root = build(tape, ids);
        ScalarObjective obj = objective(tape.value(root));
        if (!std::isfinite(obj.value))
            throw NumericError("grad_check: non-finite objective value");
        if (grads) {
            tape.backward(root, std::move(obj.grad));
            grads->clear();
            for (auto id : ids) {
                grads->push_back(tape.grad(id));
                if (!grads->back().all_finite())
                    throw NumericError("grad_check: non-finite analytic gradient");
            }
        }
        return obj.value;
    };

    std::vector<DTensor> analytic;
    eval(leaves, &analytic);

    std::int64_t total = 0;
    for (const auto& t : leaves) total += t.numel();

    // enumerate (leaf, coord) pairs to probe
    std::vector<std::pair<int, std::int64_t>> coords;
    if (total <= opt.max_coords) {
        for (size_t li = 0; li < leaves.size(); ++li)
            for (std::int64_t j = 0; j < leaves[li].numel(); ++j)
                coords.emplace_back(static_cast<int>(li), j);
    } else {
        Rng rng(Rng::derive(seed, 0x6fd7));
        for (std::int64_t k = 0; k < opt.max_coords; ++k) {
            std::int64_t flat = rng.uniform_int(0, total - 1);
            for (size_t li = 0; li < leaves.size(); ++li) {
                if (flat < leaves[li].numel()) {
                    coords.emplace_back(static_cast<int>(li), flat);
                    break;
                }
                flat -= leaves[li].numel();
            }
        }
    }

    double worst = 0.0;
    for (const auto& [li, j] : coords) {
        double& slot = leaves[static_cast<size_t>(li)].data[static_cast<size_t>(j)];
        const double orig = slot;
        slot = orig + opt.step;
        const double fp = eval(leaves, nullptr);
        slot = orig - opt.step;
        const double fm = eval(leaves, nullptr);
        slot = orig;
        const double numeric = (fp - fm) / (2.0 * opt.step);
        const double a = analytic[static_cast<size_t>(li)].data[static_cast<size_t>(j)];
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
        worst = std::max(worst, rel);
    }
    return worst;
}

/// grad_check with the default reduction: a seeded random linear functional
/// of the root so every output coordinate participates.
inline double grad_check(const GraphBuilder& build, std::vector<DTensor> leaves,
                         std::uint64_t seed, GradCheckOptions opt = {}) {
    Rng wrng(Rng::derive(seed, 0x11c3));
    // weights are drawn lazily on first call and reused: the root shape is
    // fixed by the builder, so every evaluation sees the same functional
    auto weights = std::make_shared<DTensor>();
    ObjectiveFn reduce = [weights, &wrng](const DTensor& root) {
        if (weights->data.empty()) {
            *weights = DTensor(root.shape);
            for (auto& v : weights->data) v = wrng.uniform(-1.0, 1.0);
        }
        ScalarObjective obj;
        obj.grad = *weights;
        obj.value = 0.0;
        for (std::int64_t i = 0; i < root.numel(); ++i)
            obj.value += root.data[static_cast<size_t>(i)] *
                         weights->data[static_cast<size_t>(i)];
        return obj;
    };
    return grad_check_objective(build, std::move(leaves), reduce, seed, opt);
}

/// Seeded uniform tensor in [-1, 1], handy for grad-check points.
inline DTensor random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
    DTensor t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace sseg
