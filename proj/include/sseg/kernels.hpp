#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sseg/tensor.hpp"
#include "sseg/threadpool.hpp"

// Dense kernels for every network op, forward and backward.
// Conventions, used consistently everywhere:
//   * conv2d uses "same" zero padding: out = ceil(in / stride),
//     pad_total = max((out-1)*stride + k - in, 0), pad_begin = pad_total / 2.
//   * conv2d_transpose has gradient-of-conv semantics and produces exactly
//     stride * in spatial size; pad_begin = max(k - stride, 0) / 2.
//   * resize_bilinear samples at half-pixel centers with edge clamping:
//     src = (dst + 0.5) / ratio - 0.5.
//   * layer_norm normalizes over C,H,W jointly per frame (epsilon 1e-5)
//     and applies a per-channel affine.
// Convolutions run over explicitly zero-padded buffers so the inner loops
// are branch-free weight*row updates. Every output coordinate has a fixed
// summation order, which keeps results bit-identical regardless of the
// worker count.

namespace sseg {

constexpr double kLayerNormEps = 1e-5;

struct ConvGeom {
    int out_h = 0, out_w = 0;
    int pad_top = 0, pad_left = 0;
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

inline ConvGeom conv2d_geometry(int in_h, int in_w, int kh, int kw, int sh, int sw) {
    ConvGeom g;
    g.out_h = ceil_div(in_h, sh);
    g.out_w = ceil_div(in_w, sw);
    int pad_h = std::max((g.out_h - 1) * sh + kh - in_h, 0);
    int pad_w = std::max((g.out_w - 1) * sw + kw - in_w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
    return g;
}

template <typename T>
void check_conv_args(const char* op, const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                     int in_ch_axis) {
    if (x.rank() != 4)
        throw ShapeError(std::string(op) + ": input must be rank 4, got " + shape_str(x.shape));
    if (w.rank() != 4)
        throw ShapeError(std::string(op) + ": kernel must be rank 4, got " + shape_str(w.shape));
    if (w.dim(in_ch_axis) != x.dim(1))
        throw ShapeError(std::string(op) + ": kernel " + shape_str(w.shape) +
                         " does not match input channels of " + shape_str(x.shape));
    int out_ch = w.dim(1 - in_ch_axis);
    if (b.rank() != 1 || b.dim(0) != out_ch)
        throw ShapeError(std::string(op) + ": bias " + shape_str(b.shape) +
                         " does not match output channels of kernel " + shape_str(w.shape));
}

namespace detail {

/// Zero-padded per-channel planes for one batch item.
template <typename T>
struct Padded {
    int c = 0, h = 0, w = 0;  // padded sizes
    std::vector<T> data;

    void reset(int c_, int h_, int w_) {
        c = c_;
        h = h_;
        w = w_;
        data.assign(static_cast<size_t>(c) * h * w, T(0));
    }
    T* row(int ci, int y) { return &data[(static_cast<size_t>(ci) * h + y) * w]; }
    const T* row(int ci, int y) const { return &data[(static_cast<size_t>(ci) * h + y) * w]; }
};

/// y[0..n) += a * x[0..n) with x read at the given stride.
template <typename T>
inline void axpy_strided_load(T* y, const T* x, T a, int n, int stride) {
    if (stride == 1) {
        for (int i = 0; i < n; ++i) y[i] += a * x[i];
    } else {
        for (int i = 0; i < n; ++i) y[i] += a * x[i * stride];
    }
}

/// y[i*stride] += a * x[i]
template <typename T>
inline void axpy_strided_store(T* y, const T* x, T a, int n, int stride) {
    if (stride == 1) {
        for (int i = 0; i < n; ++i) y[i] += a * x[i];
    } else {
        for (int i = 0; i < n; ++i) y[i * stride] += a * x[i];
    }
}

template <typename T>
inline T dot_strided(const T* a, const T* b, int n, int stride_a) {
    T acc = T(0);
    if (stride_a == 1) {
        for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    } else {
        for (int i = 0; i < n; ++i) acc += a[i * stride_a] * b[i];
    }
    return acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: cross-correlation, kernel [C_out, C_in, kh, kw]

template <typename T>
TensorT<T> conv2d_fwd(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int sh, int sw) {
    check_conv_args("conv2d", x, w, b, 1);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int CO = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    const ConvGeom g = conv2d_geometry(H, W, KH, KW, sh, sw);
    const int PH = std::max(H + g.pad_top, (g.out_h - 1) * sh + KH);
    const int PW = std::max(W + g.pad_left, (g.out_w - 1) * sw + KW);
    TensorT<T> y({N, CO, g.out_h, g.out_w});

    const std::int64_t macs_per_co =
        static_cast<std::int64_t>(C) * KH * KW * g.out_h * g.out_w;
    const std::int64_t grain = std::max<std::int64_t>(1, 1500000 / std::max<std::int64_t>(1, macs_per_co));
    detail::Padded<T> xpad;
    for (int n = 0; n < N; ++n) {
        xpad.reset(C, PH, PW);
        for (int ci = 0; ci < C; ++ci)
            for (int iy = 0; iy < H; ++iy)
                std::copy_n(&x.at4(n, ci, iy, 0), W, xpad.row(ci, iy + g.pad_top) + g.pad_left);

        parallel_for(CO, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t co = lo; co < hi; ++co) {
                T* out = &y.at4(n, static_cast<int>(co), 0, 0);
                std::fill_n(out, static_cast<size_t>(g.out_h) * g.out_w,
                            b.data[static_cast<size_t>(co)]);
                for (int ci = 0; ci < C; ++ci) {
                    const T* wk = &w.at4(static_cast<int>(co), ci, 0, 0);
                    for (int ky = 0; ky < KH; ++ky)
                        for (int kx = 0; kx < KW; ++kx) {
                            const T wv = wk[ky * KW + kx];
                            if (wv == T(0)) continue;
                            for (int oy = 0; oy < g.out_h; ++oy)
                                detail::axpy_strided_load(out + static_cast<size_t>(oy) * g.out_w,
                                                          xpad.row(ci, oy * sh + ky) + kx, wv,
                                                          g.out_w, sw);
                        }
                }
            }
        }, grain);
    }
    return y;
}

template <typename T>
void conv2d_bwd(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy, int sh, int sw,
                TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int CO = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    const ConvGeom g = conv2d_geometry(H, W, KH, KW, sh, sw);
    const int OH = g.out_h, OW = g.out_w;
    const int PH = std::max(H + g.pad_top, (OH - 1) * sh + KH);
    const int PW = std::max(W + g.pad_left, (OW - 1) * sw + KW);

    if (gx) *gx = TensorT<T>({N, C, H, W});
    if (gw) *gw = TensorT<T>({CO, C, KH, KW});
    if (gb) *gb = TensorT<T>({CO});

    const std::int64_t macs_per_ci =
        static_cast<std::int64_t>(CO) * KH * KW * OH * OW;
    const std::int64_t grain_ci =
        std::max<std::int64_t>(1, 1500000 / std::max<std::int64_t>(1, macs_per_ci));
    const std::int64_t macs_per_co =
        static_cast<std::int64_t>(C) * KH * KW * OH * OW;
    const std::int64_t grain_co =
        std::max<std::int64_t>(1, 1500000 / std::max<std::int64_t>(1, macs_per_co));
    detail::Padded<T> xpad, gxpad;
    for (int n = 0; n < N; ++n) {
        if (gw) {
            xpad.reset(C, PH, PW);
            for (int ci = 0; ci < C; ++ci)
                for (int iy = 0; iy < H; ++iy)
                    std::copy_n(&x.at4(n, ci, iy, 0), W, xpad.row(ci, iy + g.pad_top) + g.pad_left);
        }

        if (gx) {
            gxpad.reset(C, PH, PW);
            parallel_for(C, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t ci = lo; ci < hi; ++ci) {
                    for (int co = 0; co < CO; ++co) {
                        const T* wk = &w.at4(co, static_cast<int>(ci), 0, 0);
                        for (int ky = 0; ky < KH; ++ky)
                            for (int kx = 0; kx < KW; ++kx) {
                                const T wv = wk[ky * KW + kx];
                                if (wv == T(0)) continue;
                                for (int oy = 0; oy < OH; ++oy)
                                    detail::axpy_strided_store(
                                        gxpad.row(static_cast<int>(ci), oy * sh + ky) + kx,
                                        &gy.at4(n, co, oy, 0), wv, OW, sw);
                            }
                    }
                }
            }, grain_ci);
            for (int ci = 0; ci < C; ++ci)
                for (int iy = 0; iy < H; ++iy)
                    std::copy_n(gxpad.row(ci, iy + g.pad_top) + g.pad_left, W,
                                &gx->at4(n, ci, iy, 0));
        }

        if (gw) {
            parallel_for(CO, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t co = lo; co < hi; ++co) {
                    for (int ci = 0; ci < C; ++ci)
                        for (int ky = 0; ky < KH; ++ky)
                            for (int kx = 0; kx < KW; ++kx) {
                                T acc = T(0);
                                for (int oy = 0; oy < OH; ++oy)
                                    acc += detail::dot_strided(xpad.row(ci, oy * sh + ky) + kx,
                                                               &gy.at4(n, static_cast<int>(co), oy, 0),
                                                               OW, sw);
                                gw->at4(static_cast<int>(co), ci, ky, kx) += acc;
                            }
                }
            }, grain_co);
        }

        if (gb) {
            for (int co = 0; co < CO; ++co) {
                T acc = T(0);
                const T* grow = &gy.at4(n, co, 0, 0);
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(OH) * OW; ++i)
                    acc += grow[i];
                gb->data[static_cast<size_t>(co)] += acc;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// conv2d_transpose: kernel [C_in, C_out, kh, kw], output stride * in size

inline ConvGeom conv2d_transpose_geometry(int in_h, int in_w, int kh, int kw, int s) {
    ConvGeom g;
    g.out_h = in_h * s;
    g.out_w = in_w * s;
    g.pad_top = std::max(kh - s, 0) / 2;
    g.pad_left = std::max(kw - s, 0) / 2;
    return g;
}

template <typename T>
TensorT<T> conv2d_transpose_fwd(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                                int s) {
    check_conv_args("conv2d_transpose", x, w, b, 0);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int CO = w.dim(1), KH = w.dim(2), KW = w.dim(3);
    const ConvGeom g = conv2d_transpose_geometry(H, W, KH, KW, s);
    // scatter targets live in [0, (in-1)*s + k); the real output is the
    // pad-offset window of that range
    const int PH = std::max((H - 1) * s + KH, g.out_h + g.pad_top);
    const int PW = std::max((W - 1) * s + KW, g.out_w + g.pad_left);
    TensorT<T> y({N, CO, g.out_h, g.out_w});

    const std::int64_t macs_per_co = static_cast<std::int64_t>(C) * KH * KW * H * W;
    const std::int64_t grain = std::max<std::int64_t>(1, 1500000 / std::max<std::int64_t>(1, macs_per_co));
    detail::Padded<T> ypad;
    for (int n = 0; n < N; ++n) {
        ypad.reset(CO, PH, PW);
        parallel_for(CO, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t co = lo; co < hi; ++co) {
                for (int ci = 0; ci < C; ++ci) {
                    const T* wk = &w.at4(ci, static_cast<int>(co), 0, 0);
                    for (int ky = 0; ky < KH; ++ky)
                        for (int kx = 0; kx < KW; ++kx) {
                            const T wv = wk[ky * KW + kx];
                            if (wv == T(0)) continue;
                            for (int iy = 0; iy < H; ++iy)
                                detail::axpy_strided_store(
                                    ypad.row(static_cast<int>(co), iy * s + ky) + kx,
                                    &x.at4(n, ci, iy, 0), wv, W, s);
                        }
                }
            }
        }, grain);
        for (int co = 0; co < CO; ++co) {
            const T bias = b.data[static_cast<size_t>(co)];
            for (int oy = 0; oy < g.out_h; ++oy) {
                const T* src = ypad.row(co, oy + g.pad_top) + g.pad_left;
                T* dst = &y.at4(n, co, oy, 0);
                for (int ox = 0; ox < g.out_w; ++ox) dst[ox] = src[ox] + bias;
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_transpose_bwd(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy, int s,
                          TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int CO = w.dim(1), KH = w.dim(2), KW = w.dim(3);
    const ConvGeom g = conv2d_transpose_geometry(H, W, KH, KW, s);
    const int PH = std::max((H - 1) * s + KH, g.out_h + g.pad_top);
    const int PW = std::max((W - 1) * s + KW, g.out_w + g.pad_left);

    if (gx) *gx = TensorT<T>({N, C, H, W});
    if (gw) *gw = TensorT<T>({C, CO, KH, KW});
    if (gb) *gb = TensorT<T>({CO});

    const std::int64_t macs_per_ci = static_cast<std::int64_t>(CO) * KH * KW * H * W;
    const std::int64_t grain_ci =
        std::max<std::int64_t>(1, 1500000 / std::max<std::int64_t>(1, macs_per_ci));
    detail::Padded<T> gypad;
    for (int n = 0; n < N; ++n) {
        gypad.reset(CO, PH, PW);
        for (int co = 0; co < CO; ++co)
            for (int oy = 0; oy < g.out_h; ++oy)
                std::copy_n(&gy.at4(n, co, oy, 0), g.out_w,
                            gypad.row(co, oy + g.pad_top) + g.pad_left);

        if (gx) {
            parallel_for(C, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t ci = lo; ci < hi; ++ci) {
                    for (int co = 0; co < CO; ++co) {
                        const T* wk = &w.at4(static_cast<int>(ci), co, 0, 0);
                        for (int ky = 0; ky < KH; ++ky)
                            for (int kx = 0; kx < KW; ++kx) {
                                const T wv = wk[ky * KW + kx];
                                if (wv == T(0)) continue;
                                for (int iy = 0; iy < H; ++iy)
                                    detail::axpy_strided_load(
                                        &gx->at4(n, static_cast<int>(ci), iy, 0),
                                        gypad.row(co, iy * s + ky) + kx, wv, W, s);
                            }
                    }
                }
            }, grain_ci);
        }

        if (gw) {
            parallel_for(C, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t ci = lo; ci < hi; ++ci) {
                    for (int co = 0; co < CO; ++co)
                        for (int ky = 0; ky < KH; ++ky)
                            for (int kx = 0; kx < KW; ++kx) {
                                T acc = T(0);
                                for (int iy = 0; iy < H; ++iy)
                                    acc += detail::dot_strided(gypad.row(co, iy * s + ky) + kx,
                                                               &x.at4(n, static_cast<int>(ci), iy, 0),
                                                               W, s);
                                gw->at4(static_cast<int>(ci), co, ky, kx) += acc;
                            }
                }
            }, grain_ci);
        }

        if (gb) {
            for (int co = 0; co < CO; ++co) {
                T acc = T(0);
                const T* grow = &gy.at4(n, co, 0, 0);
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(g.out_h) * g.out_w; ++i)
                    acc += grow[i];
                gb->data[static_cast<size_t>(co)] += acc;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// resize_bilinear: integer upscaling with half-pixel centers

struct BilinearAxis {
    std::vector<int> i0, i1;
    std::vector<double> w1;  // weight of i1; i0 gets 1 - w1
};

inline BilinearAxis bilinear_axis(int in, int out, int ratio) {
    BilinearAxis a;
    a.i0.resize(static_cast<size_t>(out));
    a.i1.resize(static_cast<size_t>(out));
    a.w1.resize(static_cast<size_t>(out));
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) / ratio - 0.5;
        int lo = static_cast<int>(std::floor(src));
        double w = src - lo;
        int hi = lo + 1;
        a.i0[static_cast<size_t>(o)] = std::clamp(lo, 0, in - 1);
        a.i1[static_cast<size_t>(o)] = std::clamp(hi, 0, in - 1);
        a.w1[static_cast<size_t>(o)] = w;
    }
    return a;
}

template <typename T>
TensorT<T> resize_bilinear_fwd(const TensorT<T>& x, int ratio) {
    if (x.rank() != 4)
        throw ShapeError("resize_bilinear: input must be rank 4, got " + shape_str(x.shape));
    if (ratio < 1) throw ShapeError("resize_bilinear: ratio must be >= 1");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int OH = H * ratio, OW = W * ratio;
    const BilinearAxis ay = bilinear_axis(H, OH, ratio);
    const BilinearAxis ax = bilinear_axis(W, OW, ratio);
    TensorT<T> y({N, C, OH, OW});
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int oy = 0; oy < OH; ++oy) {
                const int y0 = ay.i0[static_cast<size_t>(oy)], y1 = ay.i1[static_cast<size_t>(oy)];
                const double wy = ay.w1[static_cast<size_t>(oy)];
                const T* r0 = &x.at4(n, c, y0, 0);
                const T* r1 = &x.at4(n, c, y1, 0);
                T* out = &y.at4(n, c, oy, 0);
                for (int ox = 0; ox < OW; ++ox) {
                    const int x0 = ax.i0[static_cast<size_t>(ox)],
                              x1 = ax.i1[static_cast<size_t>(ox)];
                    const double wx = ax.w1[static_cast<size_t>(ox)];
                    const double v = (1 - wy) * ((1 - wx) * r0[x0] + wx * r0[x1]) +
                                     wy * ((1 - wx) * r1[x0] + wx * r1[x1]);
                    out[ox] = static_cast<T>(v);
                }
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> resize_bilinear_bwd(const std::vector<int>& in_shape, const TensorT<T>& gy, int ratio) {
    const int N = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
    const int OH = H * ratio, OW = W * ratio;
    const BilinearAxis ay = bilinear_axis(H, OH, ratio);
    const BilinearAxis ax = bilinear_axis(W, OW, ratio);
    TensorT<T> gx({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int oy = 0; oy < OH; ++oy) {
                const int y0 = ay.i0[static_cast<size_t>(oy)], y1 = ay.i1[static_cast<size_t>(oy)];
                const double wy = ay.w1[static_cast<size_t>(oy)];
                T* r0 = &gx.at4(n, c, y0, 0);
                T* r1 = &gx.at4(n, c, y1, 0);
                const T* grow = &gy.at4(n, c, oy, 0);
                for (int ox = 0; ox < OW; ++ox) {
                    const int x0 = ax.i0[static_cast<size_t>(ox)],
                              x1 = ax.i1[static_cast<size_t>(ox)];
                    const double wx = ax.w1[static_cast<size_t>(ox)];
                    const double go = static_cast<double>(grow[ox]);
                    r0[x0] += static_cast<T>((1 - wy) * (1 - wx) * go);
                    r0[x1] += static_cast<T>((1 - wy) * wx * go);
                    r1[x0] += static_cast<T>(wy * (1 - wx) * go);
                    r1[x1] += static_cast<T>(wy * wx * go);
                }
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// layer_norm over C,H,W per frame, per-channel affine

template <typename T>
struct LayerNormAux {
    std::vector<double> mean, inv_std;  // per frame
};

template <typename T>
TensorT<T> layer_norm_fwd(const TensorT<T>& x, const TensorT<T>& gain, const TensorT<T>& bias,
                          LayerNormAux<T>* aux) {
    if (x.rank() != 4)
        throw ShapeError("layer_norm: input must be rank 4, got " + shape_str(x.shape));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (gain.rank() != 1 || gain.dim(0) != C || bias.rank() != 1 || bias.dim(0) != C)
        throw ShapeError("layer_norm: affine shapes " + shape_str(gain.shape) + "/" +
                         shape_str(bias.shape) + " do not match channels of " + shape_str(x.shape));
    const std::int64_t M = static_cast<std::int64_t>(C) * H * W;
    TensorT<T> y(x.shape);
    if (aux) {
        aux->mean.assign(static_cast<size_t>(N), 0.0);
        aux->inv_std.assign(static_cast<size_t>(N), 0.0);
    }
    for (int n = 0; n < N; ++n) {
        const T* xp = &x.data[static_cast<std::int64_t>(n) * M];
        double sum = 0.0, sq = 0.0;
        for (std::int64_t i = 0; i < M; ++i) {
            const double v = static_cast<double>(xp[i]);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / static_cast<double>(M);
        const double var = std::max(sq / static_cast<double>(M) - mean * mean, 0.0);
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        if (aux) {
            aux->mean[static_cast<size_t>(n)] = mean;
            aux->inv_std[static_cast<size_t>(n)] = inv_std;
        }
        T* yp = &y.data[static_cast<std::int64_t>(n) * M];
        std::int64_t i = 0;
        for (int c = 0; c < C; ++c) {
            const double gc = static_cast<double>(gain.data[static_cast<size_t>(c)]);
            const double bc = static_cast<double>(bias.data[static_cast<size_t>(c)]);
            for (int p = 0; p < H * W; ++p, ++i)
                yp[i] = static_cast<T>(gc * (static_cast<double>(xp[i]) - mean) * inv_std + bc);
        }
    }
    return y;
}

template <typename T>
void layer_norm_bwd(const TensorT<T>& x, const TensorT<T>& gain, const LayerNormAux<T>& aux,
                    const TensorT<T>& gy, TensorT<T>* gx, TensorT<T>* ggain, TensorT<T>* gbias) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t M = static_cast<std::int64_t>(C) * H * W;
    if (gx) *gx = TensorT<T>(x.shape);
    if (ggain) *ggain = TensorT<T>({C});
    if (gbias) *gbias = TensorT<T>({C});
    std::vector<double> ggain_acc(static_cast<size_t>(C), 0.0);
    std::vector<double> gbias_acc(static_cast<size_t>(C), 0.0);

    for (int n = 0; n < N; ++n) {
        const T* xp = &x.data[static_cast<std::int64_t>(n) * M];
        const T* gp = &gy.data[static_cast<std::int64_t>(n) * M];
        const double mean = aux.mean[static_cast<size_t>(n)];
        const double inv_std = aux.inv_std[static_cast<size_t>(n)];

        // dxhat = gy * gain; reduce sums of dxhat and dxhat*xhat per frame
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        std::int64_t i = 0;
        for (int c = 0; c < C; ++c) {
            const double gc = static_cast<double>(gain.data[static_cast<size_t>(c)]);
            for (int p = 0; p < H * W; ++p, ++i) {
                const double xhat = (static_cast<double>(xp[i]) - mean) * inv_std;
                const double dxhat = static_cast<double>(gp[i]) * gc;
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                ggain_acc[static_cast<size_t>(c)] += static_cast<double>(gp[i]) * xhat;
                gbias_acc[static_cast<size_t>(c)] += static_cast<double>(gp[i]);
            }
        }
        if (gx) {
            T* op = &gx->data[static_cast<std::int64_t>(n) * M];
            const double inv_m = 1.0 / static_cast<double>(M);
            i = 0;
            for (int c = 0; c < C; ++c) {
                const double gc = static_cast<double>(gain.data[static_cast<size_t>(c)]);
                for (int p = 0; p < H * W; ++p, ++i) {
                    const double xhat = (static_cast<double>(xp[i]) - mean) * inv_std;
                    const double dxhat = static_cast<double>(gp[i]) * gc;
                    op[i] = static_cast<T>(
                        inv_std * (dxhat - inv_m * sum_dxhat - xhat * inv_m * sum_dxhat_xhat));
                }
            }
        }
    }
    for (int c = 0; c < C; ++c) {
        if (ggain) ggain->data[static_cast<size_t>(c)] = static_cast<T>(ggain_acc[static_cast<size_t>(c)]);
        if (gbias) gbias->data[static_cast<size_t>(c)] = static_cast<T>(gbias_acc[static_cast<size_t>(c)]);
    }
}

// ---------------------------------------------------------------------------
// pointwise

template <typename T>
T sigmoid_scalar(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
}

}  // namespace sseg
