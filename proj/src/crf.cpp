#include "sseg/crf.hpp"

#include <cmath>

#include "sseg/threadpool.hpp"

namespace sseg {

namespace {

constexpr double kProbClamp = 1e-6;

struct KernelTables {
    // Gaussian of squared pixel distance, indexed by (|dy|, |dx|)
    std::vector<double> spatial;    // theta_gamma
    std::vector<double> bilat_pos;  // theta_alpha
    std::vector<double> color;      // squared RGB distance 0 .. 3*255^2
    int w = 0, h = 0;

    double sp(int dy, int dx) const { return spatial[static_cast<size_t>(dy) * w + dx]; }
    double bp(int dy, int dx) const { return bilat_pos[static_cast<size_t>(dy) * w + dx]; }
};

KernelTables build_tables(int w, int h, const CrfConfig& cfg) {
    KernelTables t;
    t.w = w;
    t.h = h;
    t.spatial.resize(static_cast<size_t>(w) * h);
    t.bilat_pos.resize(static_cast<size_t>(w) * h);
    for (int dy = 0; dy < h; ++dy)
        for (int dx = 0; dx < w; ++dx) {
            const double d2 = static_cast<double>(dy) * dy + static_cast<double>(dx) * dx;
            t.spatial[static_cast<size_t>(dy) * w + dx] =
                std::exp(-d2 / (2.0 * cfg.theta_gamma * cfg.theta_gamma));
            t.bilat_pos[static_cast<size_t>(dy) * w + dx] =
                std::exp(-d2 / (2.0 * cfg.theta_alpha * cfg.theta_alpha));
        }
    t.color.resize(3 * 255 * 255 + 1);
    for (size_t d2 = 0; d2 < t.color.size(); ++d2)
        t.color[d2] = std::exp(-static_cast<double>(d2) /
                               (2.0 * cfg.theta_beta * cfg.theta_beta));
    return t;
}

}  // namespace

ProbImage meanfield_marginals(const ProbImage& prob, const ImageU8& rgb, const CrfConfig& cfg,
                              const CrfIterationHook& hook) {
    if (prob.w != rgb.w || prob.h != rgb.h)
        throw ShapeError("meanfield_refine: map and image resolutions differ");
    const std::int64_t n = static_cast<std::int64_t>(prob.w) * prob.h;
    // unaries: -log p for foreground, -log (1-p) for background
    std::vector<double> u_fg(static_cast<size_t>(n)), u_bg(static_cast<size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double p =
            std::clamp(static_cast<double>(prob.v[static_cast<size_t>(i)]), kProbClamp,
                       1.0 - kProbClamp);
        u_fg[static_cast<size_t>(i)] = -std::log(p);
        u_bg[static_cast<size_t>(i)] = -std::log(1.0 - p);
    }
    return meanfield_from_unaries(u_fg, u_bg, rgb, cfg, hook);
}

ProbImage meanfield_from_unaries(const std::vector<double>& u_fg, const std::vector<double>& u_bg,
                                 const ImageU8& rgb, const CrfConfig& cfg,
                                 const CrfIterationHook& hook) {
    const int W = rgb.w, H = rgb.h;
    const std::int64_t n = static_cast<std::int64_t>(W) * H;
    if (u_fg.size() != static_cast<size_t>(n) || u_bg.size() != static_cast<size_t>(n))
        throw ShapeError("meanfield_refine: unary size does not match the image");
    if (cfg.iterations < 1) throw ConfigError("crf.iterations must be >= 1");
    if (n > (1 << 16))
        throw CapacityError("meanfield_refine: " + std::to_string(n) +
                            " pixels exceed the 65536-pixel brute-force limit");

    // init: per-pixel softmax of the negated unaries (== the clamped map)
    std::vector<double> q_fg(static_cast<size_t>(n)), q_bg(static_cast<size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double base = std::min(u_fg[static_cast<size_t>(i)], u_bg[static_cast<size_t>(i)]);
        const double e_fg = std::exp(-(u_fg[static_cast<size_t>(i)] - base));
        const double e_bg = std::exp(-(u_bg[static_cast<size_t>(i)] - base));
        q_fg[static_cast<size_t>(i)] = e_fg / (e_fg + e_bg);
        q_bg[static_cast<size_t>(i)] = e_bg / (e_fg + e_bg);
    }

    const bool need_pairwise = cfg.w1 != 0.0 || cfg.w2 != 0.0;
    const KernelTables tables = need_pairwise ? build_tables(W, H, cfg) : KernelTables{};

    // symmetric normalization: row sums D include the self weight k(i,i)=1
    std::vector<double> sp_inv_sqrt_d(static_cast<size_t>(n), 1.0);
    std::vector<double> bl_inv_sqrt_d(static_cast<size_t>(n), 1.0);
    std::vector<double> sp_total(static_cast<size_t>(n), 0.0);  // sum_j!=i of normalized kernel
    std::vector<double> bl_total(static_cast<size_t>(n), 0.0);
    if (need_pairwise) {
        parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const int yi = static_cast<int>(i) / W, xi = static_cast<int>(i) % W;
                const std::uint8_t* ci = rgb.px(xi, yi);
                double sp_d = 0.0, bl_d = 0.0;
                for (std::int64_t j = 0; j < n; ++j) {
                    const int yj = static_cast<int>(j) / W, xj = static_cast<int>(j) % W;
                    const int dy = yj > yi ? yj - yi : yi - yj;
                    const int dx = xj > xi ? xj - xi : xi - xj;
                    sp_d += tables.sp(dy, dx);
                    const std::uint8_t* cj = rgb.px(xj, yj);
                    const int dr = static_cast<int>(ci[0]) - cj[0];
                    const int dg = static_cast<int>(ci[1]) - cj[1];
                    const int db = static_cast<int>(ci[2]) - cj[2];
                    bl_d += tables.bp(dy, dx) *
                            tables.color[static_cast<size_t>(dr * dr + dg * dg + db * db)];
                }
                sp_inv_sqrt_d[static_cast<size_t>(i)] = 1.0 / std::sqrt(sp_d);
                bl_inv_sqrt_d[static_cast<size_t>(i)] = 1.0 / std::sqrt(bl_d);
            }
        }, 64);
        parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const int yi = static_cast<int>(i) / W, xi = static_cast<int>(i) % W;
                const std::uint8_t* ci = rgb.px(xi, yi);
                double sp_acc = 0.0, bl_acc = 0.0;
                for (std::int64_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const int yj = static_cast<int>(j) / W, xj = static_cast<int>(j) % W;
                    const int dy = yj > yi ? yj - yi : yi - yj;
                    const int dx = xj > xi ? xj - xi : xi - xj;
                    sp_acc += tables.sp(dy, dx) * sp_inv_sqrt_d[static_cast<size_t>(j)];
                    const std::uint8_t* cj = rgb.px(xj, yj);
                    const int dr = static_cast<int>(ci[0]) - cj[0];
                    const int dg = static_cast<int>(ci[1]) - cj[1];
                    const int db = static_cast<int>(ci[2]) - cj[2];
                    bl_acc += tables.bp(dy, dx) *
                              tables.color[static_cast<size_t>(dr * dr + dg * dg + db * db)] *
                              bl_inv_sqrt_d[static_cast<size_t>(j)];
                }
                sp_total[static_cast<size_t>(i)] = sp_acc * sp_inv_sqrt_d[static_cast<size_t>(i)];
                bl_total[static_cast<size_t>(i)] = bl_acc * bl_inv_sqrt_d[static_cast<size_t>(i)];
            }
        }, 64);
    }

    std::vector<double> next_fg(static_cast<size_t>(n)), next_bg(static_cast<size_t>(n));
    std::vector<double> sp_scaled_q(static_cast<size_t>(n)), bl_scaled_q(static_cast<size_t>(n));
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        if (need_pairwise)
            for (std::int64_t i = 0; i < n; ++i) {
                sp_scaled_q[static_cast<size_t>(i)] =
                    q_fg[static_cast<size_t>(i)] * sp_inv_sqrt_d[static_cast<size_t>(i)];
                bl_scaled_q[static_cast<size_t>(i)] =
                    q_fg[static_cast<size_t>(i)] * bl_inv_sqrt_d[static_cast<size_t>(i)];
            }
        parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                double sp_fg = 0.0, bl_fg = 0.0;
                if (need_pairwise) {
                    const int yi = static_cast<int>(i) / W, xi = static_cast<int>(i) % W;
                    const std::uint8_t* ci = rgb.px(xi, yi);
                    for (std::int64_t j = 0; j < n; ++j) {
                        if (j == i) continue;
                        const int yj = static_cast<int>(j) / W, xj = static_cast<int>(j) % W;
                        const int dy = yj > yi ? yj - yi : yi - yj;
                        const int dx = xj > xi ? xj - xi : xi - xj;
                        sp_fg += tables.sp(dy, dx) * sp_scaled_q[static_cast<size_t>(j)];
                        const std::uint8_t* cj = rgb.px(xj, yj);
                        const int dr = static_cast<int>(ci[0]) - cj[0];
                        const int dg = static_cast<int>(ci[1]) - cj[1];
                        const int db = static_cast<int>(ci[2]) - cj[2];
                        bl_fg += tables.bp(dy, dx) *
                                 tables.color[static_cast<size_t>(dr * dr + dg * dg + db * db)] *
                                 bl_scaled_q[static_cast<size_t>(j)];
                    }
                    sp_fg *= sp_inv_sqrt_d[static_cast<size_t>(i)];
                    bl_fg *= bl_inv_sqrt_d[static_cast<size_t>(i)];
                }
                // Potts compatibility: each label is penalized by the other
                // label's message mass
                const double m_fg = cfg.w1 * (bl_total[static_cast<size_t>(i)] - bl_fg) +
                                    cfg.w2 * (sp_total[static_cast<size_t>(i)] - sp_fg);
                const double m_bg = cfg.w1 * bl_fg + cfg.w2 * sp_fg;
                const double e_fg = u_fg[static_cast<size_t>(i)] + m_fg;
                const double e_bg = u_bg[static_cast<size_t>(i)] + m_bg;
                const double base = std::min(e_fg, e_bg);
                const double z_fg = std::exp(-(e_fg - base));
                const double z_bg = std::exp(-(e_bg - base));
                next_fg[static_cast<size_t>(i)] = z_fg / (z_fg + z_bg);
                next_bg[static_cast<size_t>(i)] = z_bg / (z_fg + z_bg);
            }
        }, 64);
        std::swap(q_fg, next_fg);
        std::swap(q_bg, next_bg);
        if (hook) hook(q_fg, q_bg);
    }

    ProbImage out;
    out.w = W;
    out.h = H;
    out.v.resize(static_cast<size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        out.v[static_cast<size_t>(i)] = static_cast<float>(q_fg[static_cast<size_t>(i)]);
    return out;
}

MaskImage meanfield_refine(const ProbImage& prob, const ImageU8& rgb, const CrfConfig& cfg) {
    const ProbImage q = meanfield_marginals(prob, rgb, cfg);
    MaskImage mask;
    mask.w = q.w;
    mask.h = q.h;
    mask.v.resize(q.v.size());
    for (size_t i = 0; i < q.v.size(); ++i) mask.v[i] = q.v[i] >= 0.5f ? 1 : 0;
    return mask;
}

}  // namespace sseg
