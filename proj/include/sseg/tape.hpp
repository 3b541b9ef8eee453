#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "sseg/kernels.hpp"
#include "sseg/tensor.hpp"

namespace sseg {

/// Reverse-mode autodiff tape. Ops append nodes in execution order and keep
/// the inputs they need for backward (parent values stay alive on the tape);
/// backward() walks the nodes in exact reverse order. Values are immutable
/// once recorded. A tape is single-writer: record and differentiate from one
/// thread; independent tapes are safe to use concurrently.
template <typename T>
class TapeT {
public:
    using Id = int;

    Id input(TensorT<T> v) { return push(std::move(v), {}, false, nullptr); }
    Id param(TensorT<T> v) { return push(std::move(v), {}, true, nullptr); }

    const TensorT<T>& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
    size_t size() const { return nodes_.size(); }

    /// Gradient of the last backward() with respect to node `id`.
    const TensorT<T>& grad(Id id) {
        auto& g = grads_[static_cast<size_t>(id)];
        if (g.data.empty()) g = TensorT<T>(nodes_[static_cast<size_t>(id)].value.shape);
        return g;
    }

    bool needs_grad(Id id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

    // -- ops ----------------------------------------------------------------

    Id conv2d(Id x, Id w, Id b, int stride) { return conv2d(x, w, b, stride, stride); }

    Id conv2d(Id x, Id w, Id b, int sh, int sw) {
        if (sh < 1 || sw < 1) throw ShapeError("conv2d: stride must be positive");
        TensorT<T> y = conv2d_fwd(value(x), value(w), value(b), sh, sw);
        return push(std::move(y), {x, w, b}, any_grad({x, w, b}),
                    [sh, sw](TapeT& t, int self) {
                        const auto& n = t.nodes_[static_cast<size_t>(self)];
                        const auto& gy = t.grads_[static_cast<size_t>(self)];
                        const Id x_ = n.parents[0], w_ = n.parents[1], b_ = n.parents[2];
                        TensorT<T> gx, gw, gb;
                        conv2d_bwd(t.value(x_), t.value(w_), gy, sh, sw,
                                   t.needs_grad(x_) ? &gx : nullptr,
                                   t.needs_grad(w_) ? &gw : nullptr,
                                   t.needs_grad(b_) ? &gb : nullptr);
                        if (t.needs_grad(x_)) t.accum(x_, std::move(gx));
                        if (t.needs_grad(w_)) t.accum(w_, std::move(gw));
                        if (t.needs_grad(b_)) t.accum(b_, std::move(gb));
                    });
    }

    Id conv2d_transpose(Id x, Id w, Id b, int stride) {
        if (stride < 1) throw ShapeError("conv2d_transpose: stride must be positive");
        TensorT<T> y = conv2d_transpose_fwd(value(x), value(w), value(b), stride);
        return push(std::move(y), {x, w, b}, any_grad({x, w, b}),
                    [stride](TapeT& t, int self) {
                        const auto& n = t.nodes_[static_cast<size_t>(self)];
                        const auto& gy = t.grads_[static_cast<size_t>(self)];
                        const Id x_ = n.parents[0], w_ = n.parents[1], b_ = n.parents[2];
                        TensorT<T> gx, gw, gb;
                        conv2d_transpose_bwd(t.value(x_), t.value(w_), gy, stride,
                                             t.needs_grad(x_) ? &gx : nullptr,
                                             t.needs_grad(w_) ? &gw : nullptr,
                                             t.needs_grad(b_) ? &gb : nullptr);
                        if (t.needs_grad(x_)) t.accum(x_, std::move(gx));
                        if (t.needs_grad(w_)) t.accum(w_, std::move(gw));
                        if (t.needs_grad(b_)) t.accum(b_, std::move(gb));
                    });
    }

    Id resize_bilinear(Id x, int ratio) {
        TensorT<T> y = resize_bilinear_fwd(value(x), ratio);
        return push(std::move(y), {x}, any_grad({x}), [ratio](TapeT& t, int self) {
            const auto& n = t.nodes_[static_cast<size_t>(self)];
            const Id x_ = n.parents[0];
            if (!t.needs_grad(x_)) return;
            t.accum(x_, resize_bilinear_bwd(t.value(x_).shape,
                                            t.grads_[static_cast<size_t>(self)], ratio));
        });
    }

    Id layer_norm(Id x, Id gain, Id bias) {
        LayerNormAux<T> aux;
        TensorT<T> y = layer_norm_fwd(value(x), value(gain), value(bias), &aux);
        return push(std::move(y), {x, gain, bias}, any_grad({x, gain, bias}),
                    [aux = std::move(aux)](TapeT& t, int self) {
                        const auto& n = t.nodes_[static_cast<size_t>(self)];
                        const auto& gy = t.grads_[static_cast<size_t>(self)];
                        const Id x_ = n.parents[0], g_ = n.parents[1], b_ = n.parents[2];
                        TensorT<T> gx, gg, gb;
                        layer_norm_bwd(t.value(x_), t.value(g_), aux, gy,
                                       t.needs_grad(x_) ? &gx : nullptr,
                                       t.needs_grad(g_) ? &gg : nullptr,
                                       t.needs_grad(b_) ? &gb : nullptr);
                        if (t.needs_grad(x_)) t.accum(x_, std::move(gx));
                        if (t.needs_grad(g_)) t.accum(g_, std::move(gg));
                        if (t.needs_grad(b_)) t.accum(b_, std::move(gb));
                    });
    }

    Id sigmoid(Id x) {
        TensorT<T> y = value(x);
        for (T& v : y.data) v = sigmoid_scalar(v);
        return unary(std::move(y), x, [](T yv, T /*xv*/) { return yv * (T(1) - yv); });
    }

    Id tanh_(Id x) {
        TensorT<T> y = value(x);
        for (T& v : y.data) v = std::tanh(v);
        return unary(std::move(y), x, [](T yv, T /*xv*/) { return T(1) - yv * yv; });
    }

    Id leaky_relu(Id x, T slope) {
        TensorT<T> y = value(x);
        for (T& v : y.data) v = v > T(0) ? v : slope * v;
        return unary(std::move(y), x, [slope](T /*yv*/, T xv) { return xv > T(0) ? T(1) : slope; });
    }

    /// y = mul * x + shift (elementwise, scalar constants)
    Id scale(Id x, T mul, T shift = T(0)) {
        TensorT<T> y = value(x);
        for (T& v : y.data) v = mul * v + shift;
        return unary(std::move(y), x, [mul](T, T) { return mul; });
    }

    Id add(Id a, Id b) {
        require_same_shape("add", value(a).shape, value(b).shape);
        TensorT<T> y = value(a);
        const auto& bd = value(b).data;
        for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += bd[i];
        return push(std::move(y), {a, b}, any_grad({a, b}), [](TapeT& t, int self) {
            const auto& n = t.nodes_[static_cast<size_t>(self)];
            const auto& gy = t.grads_[static_cast<size_t>(self)];
            for (Id p : n.parents)
                if (t.needs_grad(p)) t.accum(p, TensorT<T>(gy));
        });
    }

    Id hadamard(Id a, Id b) {
        require_same_shape("hadamard", value(a).shape, value(b).shape);
        TensorT<T> y = value(a);
        const auto& bd = value(b).data;
        for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= bd[i];
        return push(std::move(y), {a, b}, any_grad({a, b}), [](TapeT& t, int self) {
            const auto& n = t.nodes_[static_cast<size_t>(self)];
            const auto& gy = t.grads_[static_cast<size_t>(self)];
            const Id a_ = n.parents[0], b_ = n.parents[1];
            if (t.needs_grad(a_)) {
                TensorT<T> ga(gy.shape);
                const auto& bv = t.value(b_).data;
                for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] = gy.data[i] * bv[i];
                t.accum(a_, std::move(ga));
            }
            if (t.needs_grad(b_)) {
                TensorT<T> gb(gy.shape);
                const auto& av = t.value(a_).data;
                for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] = gy.data[i] * av[i];
                t.accum(b_, std::move(gb));
            }
        });
    }

    Id concat_channels(const std::vector<Id>& xs) {
        if (xs.empty()) throw ShapeError("concat_channels: empty input list");
        const auto& first = value(xs[0]);
        if (first.rank() != 4)
            throw ShapeError("concat_channels: inputs must be rank 4, got " +
                             shape_str(first.shape));
        int ctot = 0;
        for (Id id : xs) {
            const auto& v = value(id);
            if (v.rank() != 4 || v.dim(0) != first.dim(0) || v.dim(2) != first.dim(2) ||
                v.dim(3) != first.dim(3))
                throw ShapeError("concat_channels: shapes " + shape_str(first.shape) + " and " +
                                 shape_str(v.shape) + " differ outside the channel axis");
            ctot += v.dim(1);
        }
        const int N = first.dim(0), H = first.dim(2), W = first.dim(3);
        TensorT<T> y({N, ctot, H, W});
        const std::int64_t plane = static_cast<std::int64_t>(H) * W;
        for (int n = 0; n < N; ++n) {
            std::int64_t coff = 0;
            for (Id id : xs) {
                const auto& v = value(id);
                const int c = v.dim(1);
                std::copy_n(&v.data[static_cast<std::int64_t>(n) * c * plane], c * plane,
                            &y.data[(static_cast<std::int64_t>(n) * ctot + coff) * plane]);
                coff += c;
            }
        }
        return push(std::move(y), xs, any_grad(xs), [](TapeT& t, int self) {
            const auto& n = t.nodes_[static_cast<size_t>(self)];
            const auto& gy = t.grads_[static_cast<size_t>(self)];
            const int N = gy.dim(0), CT = gy.dim(1);
            const std::int64_t plane = static_cast<std::int64_t>(gy.dim(2)) * gy.dim(3);
            std::int64_t coff = 0;
            for (Id p : n.parents) {
                const int c = t.value(p).dim(1);
                if (t.needs_grad(p)) {
                    TensorT<T> gp(t.value(p).shape);
                    for (int b = 0; b < N; ++b)
                        std::copy_n(&gy.data[(static_cast<std::int64_t>(b) * CT + coff) * plane],
                                    c * plane,
                                    &gp.data[static_cast<std::int64_t>(b) * c * plane]);
                    t.accum(p, std::move(gp));
                }
                coff += c;
            }
        });
    }

    // -- backward -----------------------------------------------------------

    /// Seeds output gradients at one or more roots, then sweeps the tape in
    /// reverse execution order.
    void backward(const std::vector<std::pair<Id, TensorT<T>>>& seeds) {
        grads_.assign(nodes_.size(), TensorT<T>{});
        for (const auto& [id, seed] : seeds) {
            require_same_shape("backward seed", nodes_[static_cast<size_t>(id)].value.shape,
                               seed.shape);
            accum(id, TensorT<T>(seed));
        }
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            auto& node = nodes_[static_cast<size_t>(i)];
            if (!node.backfn || grads_[static_cast<size_t>(i)].data.empty()) continue;
            node.backfn(*this, i);
        }
    }

    void backward(Id root, TensorT<T> seed) { backward({{root, std::move(seed)}}); }

private:
    using BackFn = std::function<void(TapeT&, int)>;

    struct Node {
        TensorT<T> value;
        std::vector<Id> parents;
        bool needs_grad = false;
        BackFn backfn;
    };

    std::vector<Node> nodes_;
    std::vector<TensorT<T>> grads_;

    bool any_grad(const std::vector<Id>& ids) const {
        for (Id id : ids)
            if (nodes_[static_cast<size_t>(id)].needs_grad) return true;
        return false;
    }

    Id push(TensorT<T> v, std::vector<Id> parents, bool needs, BackFn fn) {
        nodes_.push_back(Node{std::move(v), std::move(parents), needs, std::move(fn)});
        return static_cast<Id>(nodes_.size()) - 1;
    }

    template <typename DFn>
    Id unary(TensorT<T> y, Id x, DFn dfn) {
        return push(std::move(y), {x}, any_grad({x}), [dfn](TapeT& t, int self) {
            const auto& n = t.nodes_[static_cast<size_t>(self)];
            const Id x_ = n.parents[0];
            if (!t.needs_grad(x_)) return;
            const auto& gy = t.grads_[static_cast<size_t>(self)];
            const auto& yv = n.value.data;
            const auto& xv = t.value(x_).data;
            TensorT<T> gx(n.value.shape);
            for (size_t i = 0; i < gx.data.size(); ++i)
                gx.data[i] = gy.data[i] * dfn(yv[i], xv[i]);
            t.accum(x_, std::move(gx));
        });
    }

    void accum(Id id, TensorT<T> contribution) {
        auto& slot = grads_[static_cast<size_t>(id)];
        if (slot.data.empty()) {
            slot = std::move(contribution);
            return;
        }
        for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += contribution.data[i];
    }
};

using Tape = TapeT<float>;
using DTape = TapeT<double>;

}  // namespace sseg
