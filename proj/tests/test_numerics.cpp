#include <doctest.h>

#include <cmath>

#include "sseg/gradcheck.hpp"
#include "sseg/tape.hpp"

#include "oracles.hpp"

using namespace sseg;

namespace {

DTensor to_tensor(const oracle::Grid& g) {
    DTensor t({g.n, g.c, g.h, g.w});
    for (size_t i = 0; i < g.v.size(); ++i) t.data[i] = g.v[i];
    return t;
}

oracle::Grid to_grid(const DTensor& t) {
    oracle::Grid g(t.dim(0), t.dim(1), t.dim(2), t.dim(3));
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = t.data[i];
    return g;
}

void check_close(const DTensor& a, const DTensor& b, double tol) {
    REQUIRE(a.shape == b.shape);
    double worst = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("conv2d identity and bias cases") {
    DTape tape;
    auto x = tape.input(random_tensor({1, 1, 4, 5}, 11));
    // 1x1 identity kernel
    auto w = tape.input(DTensor({1, 1, 1, 1}, {1.0}));
    auto b = tape.input(DTensor::zeros({1}));
    auto y = tape.conv2d(x, w, b, 1);
    check_close(tape.value(y), tape.value(x), 0.0);

    // all-zero kernel, bias 3.5 -> constant
    auto wz = tape.input(DTensor::zeros({2, 1, 3, 3}));
    auto bz = tape.input(DTensor({2}, {3.5, -1.25}));
    auto yz = tape.conv2d(x, wz, bz, 2);
    const auto& v = tape.value(yz);
    CHECK(v.shape == std::vector<int>{1, 2, 2, 3});
    for (int c = 0; c < 2; ++c)
        for (int p = 0; p < 6; ++p)
            CHECK(v.data[static_cast<size_t>(c * 6 + p)] == (c == 0 ? 3.5 : -1.25));
}

TEST_CASE("conv2d row kernel on ones matches reference") {
    DTape tape;
    auto x = tape.input(DTensor::full({1, 1, 3, 3}, 1.0));
    auto w = tape.input(DTensor({1, 1, 1, 3}, {1.0, 1.0, 1.0}));
    auto b = tape.input(DTensor::zeros({1}));
    auto y = tape.conv2d(x, w, b, 1);
    const auto& v = tape.value(y);
    // center column accumulates 3 taps, edge columns 2 (zero padding)
    for (int r = 0; r < 3; ++r) {
        CHECK(v.at4(0, 0, r, 0) == 2.0);
        CHECK(v.at4(0, 0, r, 1) == 3.0);
        CHECK(v.at4(0, 0, r, 2) == 2.0);
    }
    auto ref = oracle::conv2d(to_grid(tape.value(x)), to_grid(tape.value(w)), {0.0}, 1, 1);
    check_close(v, to_tensor(ref), 1e-12);
}

TEST_CASE("conv2d random case matches reference, square and per-axis strides") {
    for (auto [sh, sw] : {std::pair{1, 1}, {2, 2}, {1, 2}, {2, 1}}) {
        DTensor x = random_tensor({2, 3, 6, 8}, 77 + sh * 10 + sw);
        DTensor w = random_tensor({4, 3, 3, 5}, 99 + sh + sw);
        DTensor b = random_tensor({4}, 5);
        DTape tape;
        auto y = tape.conv2d(tape.input(DTensor(x)), tape.input(DTensor(w)),
                             tape.input(DTensor(b)), sh, sw);
        auto ref = oracle::conv2d(to_grid(x), to_grid(w),
                                  std::vector<double>(b.data.begin(), b.data.end()), sh, sw);
        check_close(tape.value(y), to_tensor(ref), 1e-12);
    }
}

TEST_CASE("conv2d shape mismatch raises structured error") {
    DTape tape;
    auto x = tape.input(DTensor::zeros({1, 2, 4, 4}));
    auto w = tape.input(DTensor::zeros({1, 3, 3, 3}));
    auto b = tape.input(DTensor::zeros({1}));
    CHECK_THROWS_WITH_AS(tape.conv2d(x, w, b, 1),
                         doctest::Contains("conv2d"), ShapeError);
    try {
        tape.conv2d(x, w, b, 1);
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("[1,3,3,3]") != std::string::npos);
        CHECK(std::string(e.what()).find("[1,2,4,4]") != std::string::npos);
    }
}

TEST_CASE("conv2d_transpose identity, block scatter, zero input") {
    DTape tape;
    auto x = tape.input(random_tensor({1, 1, 3, 3}, 3));
    auto w1 = tape.input(DTensor({1, 1, 1, 1}, {1.0}));
    auto b0 = tape.input(DTensor::zeros({1}));
    check_close(tape.value(tape.conv2d_transpose(x, w1, b0, 1)), tape.value(x), 0.0);

    // single pixel, stride-2 2x2 kernel of ones -> 2x2 block of v
    auto px = tape.input(DTensor({1, 1, 1, 1}, {2.5}));
    auto w2 = tape.input(DTensor::full({1, 1, 2, 2}, 1.0));
    auto y = tape.conv2d_transpose(px, w2, b0, 2);
    const auto& v = tape.value(y);
    CHECK(v.shape == std::vector<int>{1, 1, 2, 2});
    for (double d : v.data) CHECK(d == 2.5);

    auto zin = tape.input(DTensor::zeros({1, 2, 3, 3}));
    auto wz = tape.input(random_tensor({2, 3, 4, 4}, 8));
    auto bz = tape.input(DTensor({3}, {1.0, 2.0, 3.0}));
    const auto& vz = tape.value(tape.conv2d_transpose(zin, wz, bz, 2));
    CHECK(vz.shape == std::vector<int>{1, 3, 6, 6});
    for (int c = 0; c < 3; ++c)
        for (int p = 0; p < 36; ++p) CHECK(vz.data[static_cast<size_t>(c * 36 + p)] == c + 1.0);
}

TEST_CASE("conv2d_transpose random case matches reference scatter") {
    DTensor x = random_tensor({2, 3, 4, 5}, 21);
    DTensor w = random_tensor({3, 2, 4, 4}, 22);
    DTensor b = random_tensor({2}, 23);
    for (int s : {1, 2, 3}) {
        DTape tape;
        auto y = tape.conv2d_transpose(tape.input(DTensor(x)), tape.input(DTensor(w)),
                                       tape.input(DTensor(b)), s);
        auto ref = oracle::conv2d_transpose(to_grid(x), to_grid(w),
                                            std::vector<double>(b.data.begin(), b.data.end()), s);
        check_close(tape.value(y), to_tensor(ref), 1e-12);
    }
}

TEST_CASE("conv2d then conv2d_transpose restores spatial dims") {
    for (int s : {1, 2, 4}) {
        DTape tape;
        auto x = tape.input(random_tensor({1, 2, 8, 16}, 31 + s));
        auto w = tape.input(random_tensor({3, 2, 3, 3}, 32));
        auto b = tape.input(DTensor::zeros({3}));
        auto mid = tape.conv2d(x, w, b, s);
        auto wt = tape.input(random_tensor({3, 2, 3, 3}, 33));
        auto bt = tape.input(DTensor::zeros({2}));
        auto back = tape.conv2d_transpose(mid, wt, bt, s);
        CHECK(tape.value(back).dim(2) == 8);
        CHECK(tape.value(back).dim(3) == 16);
    }
}

TEST_CASE("resize_bilinear half-pixel convention") {
    DTape tape;
    auto c = tape.input(DTensor::full({1, 2, 3, 3}, 4.25));
    const auto& vc = tape.value(tape.resize_bilinear(c, 2));
    CHECK(vc.shape == std::vector<int>{1, 2, 6, 6});
    for (double d : vc.data) CHECK(d == doctest::Approx(4.25));

    auto x = tape.input(random_tensor({1, 1, 3, 4}, 44));
    check_close(tape.value(tape.resize_bilinear(x, 1)), tape.value(x), 0.0);

    auto row = tape.input(DTensor({1, 1, 1, 2}, {0.0, 1.0}));
    const auto& vr = tape.value(tape.resize_bilinear(row, 2));
    CHECK(vr.data[0] == doctest::Approx(0.0));
    CHECK(vr.data[1] == doctest::Approx(0.25));
    CHECK(vr.data[2] == doctest::Approx(0.75));
    CHECK(vr.data[3] == doctest::Approx(1.0));
}

TEST_CASE("resize_bilinear random case matches scalar reference") {
    DTensor x = random_tensor({2, 2, 3, 5}, 55);
    for (int r : {2, 3, 4}) {
        DTape tape;
        auto y = tape.resize_bilinear(tape.input(DTensor(x)), r);
        check_close(tape.value(y), to_tensor(oracle::resize_bilinear(to_grid(x), r)), 1e-12);
    }
}

TEST_CASE("layer_norm basics and reference") {
    DTape tape;
    auto c = tape.input(DTensor::full({2, 3, 4, 4}, 7.0));
    auto g1 = tape.input(DTensor::full({3}, 1.0));
    auto b0 = tape.input(DTensor::zeros({3}));
    for (double d : tape.value(tape.layer_norm(c, g1, b0)).data) CHECK(d == 0.0);

    // three-value frame: mean 2, population std sqrt(2/3)
    auto x = tape.input(DTensor({1, 3, 1, 1}, {1.0, 2.0, 3.0}));
    const auto& v = tape.value(tape.layer_norm(x, g1, b0));
    CHECK(v.data[0] == doctest::Approx(-1.2247448).epsilon(1e-4));
    CHECK(std::abs(v.data[1]) < 1e-9);
    CHECK(v.data[2] == doctest::Approx(1.2247448).epsilon(1e-4));

    auto g0 = tape.input(DTensor::zeros({3}));
    auto bb = tape.input(DTensor({3}, {0.5, 1.5, -2.0}));
    const auto& vb = tape.value(tape.layer_norm(x, g0, bb));
    CHECK(vb.data[0] == 0.5);
    CHECK(vb.data[1] == 1.5);
    CHECK(vb.data[2] == -2.0);

    DTensor xr = random_tensor({2, 3, 4, 5}, 66);
    DTensor gr = random_tensor({3}, 67);
    DTensor br = random_tensor({3}, 68);
    DTape t2;
    auto yr = t2.layer_norm(t2.input(DTensor(xr)), t2.input(DTensor(gr)), t2.input(DTensor(br)));
    auto ref = oracle::layer_norm(to_grid(xr), std::vector<double>(gr.data.begin(), gr.data.end()),
                                  std::vector<double>(br.data.begin(), br.data.end()),
                                  kLayerNormEps);
    check_close(t2.value(yr), to_tensor(ref), 1e-10);
}

TEST_CASE("layer_norm normalizes to zero mean unit variance") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        DTape tape;
        auto x = tape.input(random_tensor({2, 4, 8, 8}, seed, -3.0, 5.0));
        auto g = tape.input(DTensor::full({4}, 1.0));
        auto b = tape.input(DTensor::zeros({4}));
        const auto& y = tape.value(tape.layer_norm(x, g, b));
        const std::int64_t m = 4 * 8 * 8;
        for (int n = 0; n < 2; ++n) {
            double mean = 0, var = 0;
            for (std::int64_t i = 0; i < m; ++i) mean += y.data[static_cast<size_t>(n * m + i)];
            mean /= static_cast<double>(m);
            for (std::int64_t i = 0; i < m; ++i) {
                double d = y.data[static_cast<size_t>(n * m + i)] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            CHECK(std::abs(mean) < 1e-5);
            CHECK(std::abs(var - 1.0) < 1e-3);
        }
    }
}

TEST_CASE("pointwise ops") {
    DTape tape;
    auto z = tape.input(DTensor::zeros({1, 1, 1, 2}));
    CHECK(tape.value(tape.sigmoid(z)).data[0] == 0.5);
    CHECK(tape.value(tape.tanh_(z)).data[0] == 0.0);

    auto x = tape.input(random_tensor({1, 2, 3, 3}, 7));
    auto ones = tape.input(DTensor::full({1, 2, 3, 3}, 1.0));
    check_close(tape.value(tape.hadamard(x, ones)), tape.value(x), 0.0);

    auto a = tape.input(DTensor({1, 2, 1, 1}, {1.0, 2.0}));
    auto b = tape.input(DTensor({1, 3, 1, 1}, {3.0, 4.0, 5.0}));
    const auto& cat = tape.value(tape.concat_channels({a, b}));
    CHECK(cat.shape == std::vector<int>{1, 5, 1, 1});
    for (int i = 0; i < 5; ++i) CHECK(cat.data[static_cast<size_t>(i)] == i + 1.0);

    auto bad = tape.input(DTensor::zeros({1, 2, 4, 4}));
    CHECK_THROWS_AS(tape.add(x, bad), ShapeError);
    CHECK_THROWS_AS(tape.hadamard(x, bad), ShapeError);

    // scale covers the affine "one minus" path used by the GRU update
    const auto& om = tape.value(tape.scale(a, -1.0, 1.0));
    CHECK(om.data[0] == 0.0);
    CHECK(om.data[1] == -1.0);
}

TEST_CASE("ops are deterministic") {
    DTensor x = random_tensor({2, 3, 8, 8}, 123);
    DTensor w = random_tensor({4, 3, 3, 3}, 124);
    DTensor b = random_tensor({4}, 125);
    DTape t1, t2;
    auto y1 = t1.conv2d(t1.input(DTensor(x)), t1.input(DTensor(w)), t1.input(DTensor(b)), 2);
    auto y2 = t2.conv2d(t2.input(DTensor(x)), t2.input(DTensor(w)), t2.input(DTensor(b)), 2);
    CHECK(t1.value(y1).data == t2.value(y2).data);
}

// -- gradient checks ---------------------------------------------------------

TEST_CASE("grad_check: linear conv against finite differences is exact") {
    DTensor w = random_tensor({2, 3, 3, 3}, 201);
    auto build = [&w](DTape& t, const std::vector<DTape::Id>& leaves) {
        auto wid = t.input(DTensor(w));  // fixed kernel: linear in x
        auto bid = t.input(DTensor::zeros({2}));
        return t.conv2d(leaves[0], wid, bid, 2);
    };
    double err = grad_check(build, {random_tensor({1, 3, 6, 6}, 202)}, 7);
    CHECK(err < 1e-9);
}

TEST_CASE("grad_check: sigmoid and layer_norm") {
    auto sig = [](DTape& t, const std::vector<DTape::Id>& l) { return t.sigmoid(l[0]); };
    CHECK(grad_check(sig, {random_tensor({1, 2, 4, 4}, 301)}, 8) < 1e-4);

    auto ln = [](DTape& t, const std::vector<DTape::Id>& l) {
        return t.layer_norm(l[0], l[1], l[2]);
    };
    CHECK(grad_check(ln, {random_tensor({2, 3, 4, 4}, 302), random_tensor({3}, 303),
                          random_tensor({3}, 304)},
                     9) < 1e-3);
}

TEST_CASE("grad_check: every op at seeded random points") {
    const int points = 10;
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        const std::uint64_t s = 1000 + static_cast<std::uint64_t>(p);
        auto conv = [](DTape& t, const std::vector<DTape::Id>& l) {
            return t.conv2d(l[0], l[1], l[2], 2, 1);
        };
        worst = std::max(worst, grad_check(conv,
                                           {random_tensor({1, 2, 4, 6}, s), random_tensor({3, 2, 3, 3}, s + 50),
                                            random_tensor({3}, s + 99)},
                                           s));
        auto convt = [](DTape& t, const std::vector<DTape::Id>& l) {
            return t.conv2d_transpose(l[0], l[1], l[2], 2);
        };
        worst = std::max(worst, grad_check(convt,
                                           {random_tensor({1, 2, 3, 3}, s + 1), random_tensor({2, 3, 4, 4}, s + 2),
                                            random_tensor({3}, s + 3)},
                                           s));
        auto rb = [](DTape& t, const std::vector<DTape::Id>& l) {
            return t.resize_bilinear(l[0], 2);
        };
        worst = std::max(worst, grad_check(rb, {random_tensor({1, 2, 3, 4}, s + 4)}, s));
        auto ln = [](DTape& t, const std::vector<DTape::Id>& l) {
            return t.layer_norm(l[0], l[1], l[2]);
        };
        worst = std::max(worst, grad_check(ln,
                                           {random_tensor({2, 2, 3, 3}, s + 5), random_tensor({2}, s + 6),
                                            random_tensor({2}, s + 7)},
                                           s));
        auto mix = [](DTape& t, const std::vector<DTape::Id>& l) {
            auto sg = t.sigmoid(l[0]);
            auto th = t.tanh_(l[1]);
            auto hp = t.hadamard(sg, th);
            auto lr = t.leaky_relu(t.add(hp, t.scale(l[0], -1.0, 0.5)), 0.1);
            return t.concat_channels({lr, hp});
        };
        worst = std::max(worst, grad_check(mix,
                                           {random_tensor({1, 2, 3, 3}, s + 8),
                                            random_tensor({1, 2, 3, 3}, s + 9)},
                                           s));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("backward accumulates over shared inputs and multiple roots") {
    // y1 = x*x, y2 = 2x; d(sum y1 + sum y2)/dx = 2x + 2
    DTape tape;
    auto x = tape.param(DTensor({1, 1, 1, 3}, {1.0, -2.0, 0.5}));
    auto y1 = tape.hadamard(x, x);
    auto y2 = tape.scale(x, 2.0);
    tape.backward({{y1, DTensor::full({1, 1, 1, 3}, 1.0)}, {y2, DTensor::full({1, 1, 1, 3}, 1.0)}});
    const auto& g = tape.grad(x);
    CHECK(g.data[0] == doctest::Approx(4.0));
    CHECK(g.data[1] == doctest::Approx(-2.0));
    CHECK(g.data[2] == doctest::Approx(3.0));
}
