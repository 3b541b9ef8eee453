#pragma once

#include <functional>

#include "sseg/image_io.hpp"

namespace sseg {

/// Two-label dense CRF mean field, brute-force pairwise (exact, O(N^2) per
/// iteration). Unaries come from the probability map; pairwise terms are a
/// Potts-compatibility bilateral kernel (weight w1, position scale
/// theta_alpha, color scale theta_beta on 0..255 RGB) plus a spatial Gaussian
/// kernel (weight w2, scale theta_gamma). Kernels are symmetrically
/// normalized, k(i,j)/sqrt(D_i D_j) with D the kernel row sums including
/// self, so each pixel's message mass is order one and the weights mean the
/// same thing at any image size.
struct CrfConfig {
    double w1 = 5.0;
    double w2 = 3.0;
    double theta_alpha = 30.0;
    double theta_beta = 5.0;
    double theta_gamma = 3.0;
    int iterations = 5;
};

/// Foreground marginals after the final mean-field iteration. The optional
/// hook receives (q_fg, q_bg) after every iteration.
using CrfIterationHook =
    std::function<void(const std::vector<double>& q_fg, const std::vector<double>& q_bg)>;

ProbImage meanfield_marginals(const ProbImage& prob, const ImageU8& rgb, const CrfConfig& cfg,
                              const CrfIterationHook& hook = nullptr);

/// Mean field over explicit per-pixel unary potentials (energy scale;
/// the map-based entry builds u_fg = -log p, u_bg = -log(1-p)).
ProbImage meanfield_from_unaries(const std::vector<double>& u_fg, const std::vector<double>& u_bg,
                                 const ImageU8& rgb, const CrfConfig& cfg,
                                 const CrfIterationHook& hook = nullptr);

/// Refined binary mask: argmax labeling of the final marginals
/// (ties go to foreground, matching a 0.5 probability threshold).
MaskImage meanfield_refine(const ProbImage& prob, const ImageU8& rgb, const CrfConfig& cfg);

}  // namespace sseg
