#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sseg/datagen.hpp"
#include "sseg/image_io.hpp"
#include "sseg/instance.hpp"
#include "sseg/metrics.hpp"
#include "sseg/rng.hpp"

using namespace sseg;

namespace {

MaskImage rows_mask(int w, int h, int y0, int y1) {
    MaskImage m;
    m.w = w;
    m.h = h;
    m.v.assign(static_cast<size_t>(w) * h, 0);
    for (int y = y0; y <= y1; ++y)
        for (int x = 0; x < w; ++x) m.at(x, y) = 1;
    return m;
}

MaskImage random_mask(int w, int h, Rng& rng, double fill = 0.4) {
    MaskImage m;
    m.w = w;
    m.h = h;
    m.v.resize(static_cast<size_t>(w) * h);
    for (auto& v : m.v) v = rng.uniform() < fill ? 1 : 0;
    return m;
}

MaskImage box_mask(int w, int h, int x0, int y0, int x1, int y1) {
    MaskImage m;
    m.w = w;
    m.h = h;
    m.v.assign(static_cast<size_t>(w) * h, 0);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.at(x, y) = 1;
    return m;
}

// scalar J oracle
double j_oracle(const MaskImage& a, const MaskImage& b) {
    long inter = 0, uni = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        inter += a.v[i] && b.v[i];
        uni += a.v[i] || b.v[i];
    }
    return uni ? static_cast<double>(inter) / uni : 1.0;
}

// brute-force boundary F oracle: 4-connectivity boundaries (image border
// counts as background), O(B^2) nearest-distance matching
std::vector<std::pair<int, int>> boundary_pixels(const MaskImage& m) {
    std::vector<std::pair<int, int>> px;
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            if (!m.at(x, y)) continue;
            const bool border = x == 0 || y == 0 || x == m.w - 1 || y == m.h - 1;
            if (border || !m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) ||
                !m.at(x, y + 1))
                px.emplace_back(x, y);
        }
    return px;
}

double f_oracle(const MaskImage& pred, const MaskImage& gt, int tol) {
    const auto pb = boundary_pixels(pred);
    const auto gb = boundary_pixels(gt);
    if (pb.empty() && gb.empty()) return 1.0;
    if (pb.empty() || gb.empty()) return 0.0;
    auto matched = [tol](const std::vector<std::pair<int, int>>& from,
                         const std::vector<std::pair<int, int>>& to) {
        long hits = 0;
        for (const auto& [x, y] : from) {
            double best = 1e18;
            for (const auto& [tx, ty] : to) {
                const double d2 = static_cast<double>(x - tx) * (x - tx) +
                                  static_cast<double>(y - ty) * (y - ty);
                best = std::min(best, d2);
            }
            if (best <= static_cast<double>(tol) * tol) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(from.size());
    };
    const double precision = matched(pb, gb);
    const double recall = matched(gb, pb);
    if (precision + recall == 0.0) return 0.0;
    return 2 * precision * recall / (precision + recall);
}

}  // namespace

TEST_CASE("region_j: named cases and oracle agreement") {
    MaskImage a = rows_mask(10, 10, 0, 4);
    MaskImage b = rows_mask(10, 10, 2, 6);
    CHECK(region_j(a, a) == 1.0);
    CHECK(region_j(a, b) == doctest::Approx(30.0 / 70.0).epsilon(1e-12));
    CHECK(region_j(rows_mask(10, 10, 0, 1), rows_mask(10, 10, 8, 9)) == 0.0);
    CHECK(region_j(rows_mask(4, 4, 2, 1), rows_mask(4, 4, 3, 2)) == 1.0);  // both empty

    MaskImage odd = rows_mask(9, 10, 0, 4);
    CHECK_THROWS_AS(region_j(a, odd), ShapeError);

    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        MaskImage p = random_mask(12, 9, rng);
        MaskImage g = random_mask(12, 9, rng);
        CHECK(region_j(p, g) == doctest::Approx(j_oracle(p, g)).epsilon(1e-12));
        CHECK(region_j(p, g) == doctest::Approx(region_j(g, p)).epsilon(1e-12));  // symmetry
    }
}

TEST_CASE("region_j agrees with compute_iou on binary maps") {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        MaskImage p = random_mask(10, 10, rng);
        MaskImage g = random_mask(10, 10, rng);
        if (g.area() == 0) continue;
        InstanceProposal prop;
        prop.mask = g;
        prop.objectness = 1.0f;
        ProbImage binary;
        binary.w = p.w;
        binary.h = p.h;
        binary.v.resize(p.v.size());
        for (size_t i = 0; i < p.v.size(); ++i) binary.v[i] = p.v[i] ? 1.0f : 0.0f;
        CHECK(compute_iou(prop, binary) == doctest::Approx(region_j(p, g)).epsilon(1e-9));
    }
}

TEST_CASE("boundary_f: named cases") {
    MaskImage sq = box_mask(20, 20, 5, 5, 12, 12);
    CHECK(boundary_f(sq, sq) == 1.0);
    MaskImage empty = box_mask(20, 20, 5, 5, 4, 4);
    CHECK(boundary_f(empty, sq) == 0.0);
    CHECK(boundary_f(sq, empty) == 0.0);
    CHECK(boundary_f(empty, empty) == 1.0);

    // square shifted by exactly the tolerance: every boundary pixel finds a
    // match within tol, so F stays high; compare against the oracle
    const int tol = boundary_tolerance(20, 20);
    MaskImage shifted = box_mask(20, 20, 5 + tol, 5, 12 + tol, 12);
    CHECK(boundary_f(sq, shifted) == doctest::Approx(f_oracle(sq, shifted, tol)).epsilon(1e-12));
}

TEST_CASE("boundary_f: oracle agreement, symmetry, tolerance monotonicity") {
    Rng rng(3);
    for (int t = 0; t < 60; ++t) {
        // blend of blobs and noise so boundaries are non-trivial
        MaskImage p = t % 2 ? random_mask(14, 11, rng, 0.3)
                            : box_mask(14, 11, static_cast<int>(rng.uniform_int(0, 5)),
                                       static_cast<int>(rng.uniform_int(0, 4)),
                                       static_cast<int>(rng.uniform_int(6, 13)),
                                       static_cast<int>(rng.uniform_int(5, 10)));
        MaskImage g = box_mask(14, 11, static_cast<int>(rng.uniform_int(0, 5)),
                               static_cast<int>(rng.uniform_int(0, 4)),
                               static_cast<int>(rng.uniform_int(6, 13)),
                               static_cast<int>(rng.uniform_int(5, 10)));
        for (int tol : {1, 2, 3}) {
            CHECK(boundary_f(p, g, tol) == doctest::Approx(f_oracle(p, g, tol)).epsilon(1e-9));
            CHECK(boundary_f(p, g, tol) == doctest::Approx(boundary_f(g, p, tol)).epsilon(1e-12));
        }
        CHECK(boundary_f(p, g, 1) <= boundary_f(p, g, 2) + 1e-12);
        CHECK(boundary_f(p, g, 2) <= boundary_f(p, g, 4) + 1e-12);
        CHECK(boundary_f(p, g, 4) <= boundary_f(p, g, 8) + 1e-12);
    }
}

TEST_CASE("boundary tolerance default") {
    // 0.8% of the diagonal, at least 1 px
    CHECK(boundary_tolerance(64, 64) == 1);
    CHECK(boundary_tolerance(854, 480) == 8);
    CHECK(boundary_tolerance(4, 4) == 1);
}

TEST_CASE("score_sequence: perfect, empty, oracle, frame exclusion") {
    std::vector<MaskImage> gt, pred;
    std::vector<std::string> names;
    Rng rng(4);
    for (int t = 0; t < 5; ++t) {
        gt.push_back(box_mask(12, 12, 2, 2, 8, 8));
        pred.push_back(gt.back());
        names.push_back(std::to_string(t));
    }
    const SequenceScore perfect = score_sequence(pred, gt, names);
    CHECK(perfect.j_mean == 1.0);
    CHECK(perfect.f_mean == 1.0);
    CHECK(perfect.jf_mean == 1.0);

    std::vector<MaskImage> none(5, box_mask(12, 12, 2, 2, 1, 1));  // all background
    const SequenceScore zero = score_sequence(none, gt, names);
    CHECK(zero.j_mean == 0.0);
    CHECK(zero.f_mean == 0.0);

    // random 5-frame set vs a scalar reimplementation with the first/last
    // frames excluded from the means
    std::vector<MaskImage> rp, rg;
    for (int t = 0; t < 5; ++t) {
        rp.push_back(random_mask(10, 8, rng));
        rg.push_back(random_mask(10, 8, rng));
    }
    const SequenceScore got = score_sequence(rp, rg, names);
    double js = 0, fsum = 0;
    for (int t = 1; t <= 3; ++t) {
        js += j_oracle(rp[static_cast<size_t>(t)], rg[static_cast<size_t>(t)]);
        fsum += f_oracle(rp[static_cast<size_t>(t)], rg[static_cast<size_t>(t)],
                         boundary_tolerance(10, 8));
    }
    CHECK(got.j_mean == doctest::Approx(js / 3).epsilon(1e-9));
    CHECK(got.f_mean == doctest::Approx(fsum / 3).epsilon(1e-9));
    CHECK(got.jf_mean == doctest::Approx((got.j_mean + got.f_mean) / 2).epsilon(1e-12));
    CHECK(got.per_frame.size() == 5);
}

TEST_CASE("evaluate_sequence: directories, 16-bit binarization, missing frames") {
    namespace fs = std::filesystem;
    const auto root = fs::temp_directory_path() / "sseg_eval_test";
    fs::remove_all(root);
    fs::create_directories(root / "pred");
    fs::create_directories(root / "gt");

    const MaskImage m = box_mask(16, 16, 4, 4, 11, 11);
    for (int t = 0; t < 3; ++t) {
        const std::string name = "0000" + std::to_string(t) + ".pgm";
        mask_write((root / "gt" / name).string(), m);
        // predictions as 16-bit probability maps around the same mask
        ProbImage p;
        p.w = 16;
        p.h = 16;
        p.v.resize(256);
        for (size_t i = 0; i < 256; ++i) p.v[i] = m.v[i] ? 0.9f : 0.2f;
        prob_write((root / "pred" / name).string(), p);
    }
    const SequenceScore score = evaluate_sequence((root / "pred").string(), (root / "gt").string());
    CHECK(score.j_mean == 1.0);
    CHECK(score.f_mean == 1.0);

    fs::remove(root / "pred" / "00001.pgm");
    CHECK_THROWS_WITH_AS(
        evaluate_sequence((root / "pred").string(), (root / "gt").string()),
        doctest::Contains("00001"), IoError);
}

// ---------------------------------------------------------------------------
// file formats

TEST_CASE("flo: round-trip, byte layout, rejection") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "sseg_flo_test";
    fs::create_directories(dir);
    const std::string path = (dir / "f.flo").string();

    FlowImage flow;
    flow.w = 2;
    flow.h = 1;
    flow.uv = {1.0f, 2.0f, 3.0f, 4.0f};
    flo_write(path, flow);
    CHECK(fs::file_size(path) == 28);  // 4 magic + 4 w + 4 h + 16 payload

    const FlowImage back = flo_read(path);
    CHECK(back.w == 2);
    CHECK(back.h == 1);
    CHECK(std::memcmp(back.uv.data(), flow.uv.data(), 16) == 0);

    // random payloads round-trip bit-exactly
    Rng rng(5);
    FlowImage big;
    big.w = 7;
    big.h = 5;
    big.uv.resize(70);
    for (auto& v : big.uv) v = static_cast<float>(rng.uniform(-50, 50));
    flo_write(path, big);
    const FlowImage back2 = flo_read(path);
    CHECK(std::memcmp(back2.uv.data(), big.uv.data(), big.uv.size() * 4) == 0);

    // corrupt magic
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("\0\0\0\0", 4);
    }
    CHECK_THROWS_WITH_AS(flo_read(path), doctest::Contains("bad flo magic"), FormatError);

    // truncation reports the byte offset
    flo_write(path, big);
    fs::resize_file(path, 20);
    CHECK_THROWS_WITH_AS(flo_read(path), doctest::Contains("byte offset"), FormatError);
}

TEST_CASE("pgm: mask and probability round-trips, quantization, rejection") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "sseg_pgm_test";
    fs::create_directories(dir);
    const std::string path = (dir / "m.pgm").string();

    Rng rng(6);
    MaskImage mask;
    mask.w = 9;
    mask.h = 6;
    mask.v.resize(54);
    for (auto& v : mask.v) v = rng.uniform() < 0.5 ? 1 : 0;
    mask_write(path, mask);
    CHECK(mask_read(path).v == mask.v);
    CHECK(pgm_is_16bit(path) == false);

    // probability 0.5 stores as 32768 (round half up)
    ProbImage prob;
    prob.w = 2;
    prob.h = 1;
    prob.v = {0.5f, 1.0f};
    prob_write(path, prob);
    CHECK(pgm_is_16bit(path) == true);
    {
        std::ifstream f(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        const size_t payload = all.size() - 4;
        const auto hi = static_cast<unsigned char>(all[payload]);
        const auto lo = static_cast<unsigned char>(all[payload + 1]);
        CHECK((hi << 8 | lo) == 32768);
    }
    const ProbImage back = prob_read(path);
    CHECK(back.v[0] == doctest::Approx(32768.0 / 65535.0).epsilon(1e-9));
    CHECK(back.v[1] == 1.0f);

    // 16-bit quantization round-trips to within half a step
    ProbImage q;
    q.w = 16;
    q.h = 4;
    q.v.resize(64);
    for (auto& v : q.v) v = static_cast<float>(rng.uniform());
    prob_write(path, q);
    const ProbImage qb = prob_read(path);
    for (size_t i = 0; i < q.v.size(); ++i)
        CHECK(std::abs(qb.v[i] - q.v[i]) <= 0.5f / 65535.0f + 1e-7f);

    // unsupported maxval
    std::ofstream(path, std::ios::binary) << "P5\n2 1\n31\n"
                                          << '\0' << '\0';
    CHECK_THROWS_WITH_AS(mask_read(path), doctest::Contains("maxval"), FormatError);
    CHECK_THROWS_WITH_AS(prob_read(path), doctest::Contains("maxval"), FormatError);

    // a mask file with a non-binary value
    std::ofstream(path, std::ios::binary) << "P5\n2 1\n255\n" << static_cast<char>(128)
                                          << static_cast<char>(0);
    CHECK_THROWS_AS(mask_read(path), FormatError);
}

TEST_CASE("ppm round-trip and preprocessing endpoints") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "sseg_ppm_test";
    fs::create_directories(dir);
    const std::string path = (dir / "img.ppm").string();

    ImageU8 img;
    img.w = 5;
    img.h = 3;
    img.rgb.resize(45);
    Rng rng(7);
    for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    img.px(0, 0)[0] = 0;
    img.px(1, 0)[0] = 255;
    ppm_write(path, img);
    const ImageU8 back = ppm_read(path);
    CHECK(back.rgb == img.rgb);

    const Tensor t = rgb_to_tensor(back);
    CHECK(t.at4(0, 0, 0, 0) == -1.0f);
    CHECK(t.at4(0, 0, 0, 1) == 1.0f);

    // flow normalization: max magnitude becomes 1, other pixels scale by 0.1
    FlowImage flow;
    flow.w = 2;
    flow.h = 1;
    flow.uv = {10.0f, 0.0f, 1.0f, 0.0f};
    const Tensor ft = flow_to_tensor(flow);
    CHECK(ft.at4(0, 0, 0, 0) == 1.0f);
    CHECK(ft.at4(0, 0, 0, 1) == doctest::Approx(0.1f));

    FlowImage zero;
    zero.w = 2;
    zero.h = 2;
    zero.uv.assign(8, 0.0f);
    const Tensor zt = flow_to_tensor(zero);
    for (float v : zt.data) CHECK(v == 0.0f);
}

// ---------------------------------------------------------------------------
// generator

namespace {

SceneSpec basic_scene() {
    SceneSpec spec;
    spec.width = 48;
    spec.height = 40;
    spec.frames = 8;
    spec.seed = 99;
    spec.background.seed = 11;
    spec.background.base = {0.4, 0.45, 0.5};
    spec.main_object.shape = ObjectSpec::Shape::Rectangle;
    spec.main_object.half_w = 5;
    spec.main_object.half_h = 4;
    spec.main_object.texture.seed = 12;
    spec.main_object.texture.base = {0.7, 0.3, 0.2};
    spec.main_object.traj.x0 = 12;
    spec.main_object.traj.y0 = 12;
    return spec;
}

double bilinear_sample(const ImageU8& img, int channel, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double tx = x - x0, ty = y - y0;
    auto at = [&](int xi, int yi) {
        xi = std::clamp(xi, 0, img.w - 1);
        yi = std::clamp(yi, 0, img.h - 1);
        return static_cast<double>(img.px(xi, yi)[channel]);
    };
    return (1 - ty) * ((1 - tx) * at(x0, y0) + tx * at(x0 + 1, y0)) +
           ty * ((1 - tx) * at(x0, y0 + 1) + tx * at(x0 + 1, y0 + 1));
}

}  // namespace

TEST_CASE("generator: static scene, rigid pan, object flow") {
    // zero velocities: identical frames, zero flow
    SceneSpec still = basic_scene();
    const GeneratedSequence s1 = generate_sequence(still);
    for (int t = 1; t < still.frames; ++t) CHECK(s1.frames[static_cast<size_t>(t)].rgb == s1.frames[0].rgb);
    for (const auto& f : s1.flows)
        for (float v : f.uv) CHECK(v == 0.0f);

    // pure camera pan over a static scene: everything (the static object
    // included) moves with the pan, so flow = (3,0) everywhere
    SceneSpec pan = basic_scene();
    pan.frames = 4;
    pan.pan_x = 3.0;
    pan.pan_y = 0.0;
    pan.main_object.traj.x0 = 10;  // keeps the margin while drifting right
    const GeneratedSequence s2 = generate_sequence(pan);
    for (int y = 0; y < pan.height; ++y)
        for (int x = 0; x < pan.width; ++x) {
            CHECK(s2.flows[1].u(x, y) == 3.0f);
            CHECK(s2.flows[1].v(x, y) == 0.0f);
        }

    // moving rectangle over a static background
    SceneSpec move = basic_scene();
    move.main_object.traj.vx = 2.0;
    move.main_object.traj.vy = 1.0;
    const GeneratedSequence s3 = generate_sequence(move);
    for (int y = 0; y < move.height; ++y)
        for (int x = 0; x < move.width; ++x) {
            if (s3.masks[2].at(x, y)) {
                CHECK(s3.flows[2].u(x, y) == 2.0f);
                CHECK(s3.flows[2].v(x, y) == 1.0f);
            } else {
                CHECK(s3.flows[2].u(x, y) == 0.0f);
            }
        }
}

TEST_CASE("generator: determinism and margin rejection") {
    SceneSpec spec = basic_scene();
    spec.main_object.traj.vx = 1.5;
    const GeneratedSequence a = generate_sequence(spec);
    const GeneratedSequence b = generate_sequence(spec);
    for (size_t t = 0; t < a.frames.size(); ++t) {
        CHECK(a.frames[t].rgb == b.frames[t].rgb);
        CHECK(a.masks[t].v == b.masks[t].v);
        CHECK(std::memcmp(a.flows[t].uv.data(), b.flows[t].uv.data(),
                          a.flows[t].uv.size() * 4) == 0);
    }
    for (size_t i = 0; i < a.proposals.size(); ++i)
        CHECK(a.proposals[i].objectness == b.proposals[i].objectness);

    SceneSpec escapes = basic_scene();
    escapes.main_object.traj.vx = 10.0;  // leaves the frame
    CHECK_THROWS_AS(generate_sequence(escapes), SpecError);
}

TEST_CASE("generator: warp consistency of flow and frames") {
    SceneSpec spec = basic_scene();
    spec.main_object.traj.vx = 1.3;
    spec.main_object.traj.vy = 0.7;
    spec.pan_x = -0.8;
    spec.pan_y = 0.4;
    spec.frames = 6;
    spec.main_object.traj.x0 = 14;
    spec.main_object.traj.y0 = 14;
    const GeneratedSequence gen = generate_sequence(spec);

    for (int t = 0; t + 1 < spec.frames; ++t) {
        const auto& cur = gen.frames[static_cast<size_t>(t)];
        const auto& nxt = gen.frames[static_cast<size_t>(t + 1)];
        const auto& flow = gen.flows[static_cast<size_t>(t)];
        const auto& mask = gen.masks[static_cast<size_t>(t)];
        const auto& mask_next = gen.masks[static_cast<size_t>(t + 1)];
        double worst = 0;
        for (int y = 2; y < spec.height - 2; ++y)
            for (int x = 2; x < spec.width - 2; ++x) {
                // skip pixels near the object boundary in either frame:
                // bilinear warping mixes object and background there
                bool near_boundary = false;
                for (int dy = -2; dy <= 2 && !near_boundary; ++dy)
                    for (int dx = -2; dx <= 2 && !near_boundary; ++dx)
                        if (mask.at(x + dx, y + dy) != mask.at(x, y) ||
                            mask_next.at(x + dx, y + dy) != mask.at(x, y))
                            near_boundary = true;
                if (near_boundary) continue;
                const double wx = x + flow.u(x, y), wy = y + flow.v(x, y);
                if (wx < 1 || wy < 1 || wx > spec.width - 2 || wy > spec.height - 2) continue;
                for (int c = 0; c < 3; ++c) {
                    const double warped = bilinear_sample(nxt, c, wx, wy);
                    worst = std::max(worst,
                                     std::abs(warped - static_cast<double>(cur.px(x, y)[c])) / 255.0);
                }
            }
        CHECK(worst < 2.0 / 255.0);
    }
}

TEST_CASE("generator: proposals are non-empty with tight boxes") {
    SceneSampler sampler;
    sampler.width = 48;
    sampler.height = 48;
    sampler.frames = 6;
    sampler.min_distractors = 2;
    sampler.max_distractors = 3;
    sampler.corrupt_proposals = true;
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        const SceneSpec spec = sampler.sample(seed);
        CHECK(spec.distractors.size() >= 2);
        const GeneratedSequence gen = generate_sequence(spec);
        CHECK(!gen.proposals.empty());
        for (const auto& p : gen.proposals) {
            CHECK(p.mask.area() > 0);
            const auto tb = tight_box(p.mask);
            REQUIRE(tb.has_value());
            CHECK(*tb == p.box);
            CHECK(p.objectness > 0.0f);
            CHECK(p.objectness <= 1.0f);
        }
        // at least one main-object proposal per frame
        std::vector<int> count(static_cast<size_t>(spec.frames), 0);
        for (const auto& p : gen.proposals) count[static_cast<size_t>(p.frame)]++;
        for (int c : count) CHECK(c >= 1);
    }
}

TEST_CASE("scene spec JSON round-trip") {
    SceneSampler sampler;
    sampler.min_distractors = 1;
    const SceneSpec spec = sampler.sample(42);
    const SceneSpec back = scene_spec_from_json(scene_spec_to_json(spec));
    CHECK(back.width == spec.width);
    CHECK(back.seed == spec.seed);
    CHECK(back.pan_x == spec.pan_x);
    CHECK(back.main_object.traj.vx == spec.main_object.traj.vx);
    CHECK(back.main_object.texture.seed == spec.main_object.texture.seed);
    CHECK(back.distractors.size() == spec.distractors.size());
    const nlohmann::json a = scene_spec_to_json(spec);
    const nlohmann::json b = scene_spec_to_json(back);
    CHECK(a == b);
}
