#include "sseg/datagen.hpp"

#include <cmath>

#include "sseg/rng.hpp"

namespace sseg {

namespace {

// -- value noise --------------------------------------------------------------

double lattice_hash(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
    std::uint64_t z = seed;
    z ^= static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL;
    z ^= static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(double x, double y, std::uint64_t seed) {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double tx = smoothstep(x - fx), ty = smoothstep(y - fy);
    const double v00 = lattice_hash(ix, iy, seed);
    const double v10 = lattice_hash(ix + 1, iy, seed);
    const double v01 = lattice_hash(ix, iy + 1, seed);
    const double v11 = lattice_hash(ix + 1, iy + 1, seed);
    return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

/// Multi-octave value noise in [0,1), continuous in (x, y).
double texture_noise(const TextureSpec& tex, double x, double y, int channel) {
    const std::uint64_t s = Rng::derive(tex.seed, static_cast<std::uint64_t>(channel) + 17);
    double acc = 0.0, norm = 0.0, amp = 1.0, freq = 1.0 / tex.scale;
    for (int o = 0; o < tex.octaves; ++o) {
        acc += amp * value_noise(x * freq, y * freq, Rng::derive(s, static_cast<std::uint64_t>(o)));
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    return acc / norm;
}

std::array<double, 3> texture_color(const TextureSpec& tex, double x, double y) {
    std::array<double, 3> c{};
    for (int ch = 0; ch < 3; ++ch) {
        const double n = texture_noise(tex, x, y, ch);
        c[static_cast<size_t>(ch)] =
            std::clamp(tex.base[static_cast<size_t>(ch)] + tex.amp * (n - 0.5), 0.0, 1.0);
    }
    return c;
}

bool inside_object(const ObjectSpec& obj, double cx, double cy, int px, int py) {
    const double dx = px - cx, dy = py - cy;
    if (obj.shape == ObjectSpec::Shape::Rectangle)
        return std::abs(dx) <= obj.half_w && std::abs(dy) <= obj.half_h;
    const double nx = dx / obj.half_w, ny = dy / obj.half_h;
    return nx * nx + ny * ny <= 1.0;
}

MaskImage morph(const MaskImage& m, int radius, bool dilate) {
    MaskImage out = m;
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            bool hit = false;
            for (int dy = -radius; dy <= radius && !hit; ++dy)
                for (int dx = -radius; dx <= radius && !hit; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    const bool inb = nx >= 0 && nx < m.w && ny >= 0 && ny < m.h;
                    const bool v = inb ? m.at(nx, ny) != 0 : false;
                    if (dilate ? v : !v) hit = true;
                }
            out.at(x, y) = dilate ? (hit ? 1 : 0) : (hit ? 0 : 1);
        }
    return out;
}

}  // namespace

std::optional<std::array<int, 4>> tight_box(const MaskImage& mask) {
    int x0 = mask.w, y0 = mask.h, x1 = -1, y1 = -1;
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            if (mask.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return std::nullopt;
    return std::array<int, 4>{x0, y0, x1, y1};
}

namespace {

/// Whole-pixel screen position at frame t: trajectory plus the camera-pan
/// offset, both rounded.
std::array<int, 2> screen_position(const Trajectory& traj, const SceneSpec& spec, int t) {
    const auto p = traj.position(t);
    return {static_cast<int>(std::lround(p[0] + spec.pan_x * t)),
            static_cast<int>(std::lround(p[1] + spec.pan_y * t))};
}

std::array<int, 2> pan_offset(const SceneSpec& spec, int t) {
    return {static_cast<int>(std::lround(spec.pan_x * t)),
            static_cast<int>(std::lround(spec.pan_y * t))};
}

MaskImage object_mask_at(const ObjectSpec& obj, const std::array<int, 2>& pos, int w, int h) {
    MaskImage m;
    m.w = w;
    m.h = h;
    m.v.assign(static_cast<size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (inside_object(obj, pos[0], pos[1], x, y)) m.at(x, y) = 1;
    return m;
}

}  // namespace

GeneratedSequence generate_sequence(const SceneSpec& spec) {
    if (spec.width < 8 || spec.height < 8 || spec.frames < 1)
        throw SpecError("scene spec: implausible dimensions or frame count");

    // the main object must keep a 2 px margin inside the frame at every frame
    for (int t = 0; t < spec.frames; ++t) {
        const auto pos = screen_position(spec.main_object.traj, spec, t);
        if (pos[0] - spec.main_object.half_w < 2.0 ||
            pos[0] + spec.main_object.half_w > spec.width - 3.0 ||
            pos[1] - spec.main_object.half_h < 2.0 ||
            pos[1] + spec.main_object.half_h > spec.height - 3.0)
            throw SpecError("scene spec: main object leaves the frame margin at frame " +
                            std::to_string(t));
    }

    GeneratedSequence out;
    out.spec = spec;
    Rng prop_rng(Rng::derive(spec.seed, 0x9a11));

    for (int t = 0; t < spec.frames; ++t) {
        ImageU8 frame;
        frame.w = spec.width;
        frame.h = spec.height;
        frame.rgb.resize(static_cast<size_t>(spec.width) * spec.height * 3);
        FlowImage flow;
        flow.w = spec.width;
        flow.h = spec.height;
        flow.uv.assign(static_cast<size_t>(spec.width) * spec.height * 2, 0.0f);

        const auto bg_off = pan_offset(spec, t);
        const auto bg_off_next = pan_offset(spec, t + 1);
        const std::array<double, 2> bg_disp = {static_cast<double>(bg_off_next[0] - bg_off[0]),
                                               static_cast<double>(bg_off_next[1] - bg_off[1])};

        const auto main_pos = screen_position(spec.main_object.traj, spec, t);
        const auto main_next = screen_position(spec.main_object.traj, spec, t + 1);
        const std::array<double, 2> main_disp = {static_cast<double>(main_next[0] - main_pos[0]),
                                                 static_cast<double>(main_next[1] - main_pos[1])};
        std::vector<std::array<int, 2>> dist_pos;
        std::vector<std::array<double, 2>> dist_disp;
        for (const auto& d : spec.distractors) {
            const auto p = screen_position(d.traj, spec, t);
            const auto pn = screen_position(d.traj, spec, t + 1);
            dist_pos.push_back(p);
            dist_disp.push_back({static_cast<double>(pn[0] - p[0]),
                                 static_cast<double>(pn[1] - p[1])});
        }

        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                std::array<double, 3> color;
                std::array<double, 2> disp = bg_disp;
                if (inside_object(spec.main_object, main_pos[0], main_pos[1], x, y)) {
                    // object texture in object-local coordinates moves with it
                    color = texture_color(spec.main_object.texture, x - main_pos[0],
                                          y - main_pos[1]);
                    disp = main_disp;
                } else {
                    bool hit = false;
                    for (size_t d = 0; d < spec.distractors.size(); ++d) {
                        if (inside_object(spec.distractors[d], dist_pos[d][0], dist_pos[d][1], x,
                                          y)) {
                            color = texture_color(spec.distractors[d].texture,
                                                  x - dist_pos[d][0], y - dist_pos[d][1]);
                            disp = dist_disp[d];
                            hit = true;
                            break;
                        }
                    }
                    if (!hit)
                        color = texture_color(spec.background, x - bg_off[0], y - bg_off[1]);
                }
                std::uint8_t* px = frame.px(x, y);
                for (int c = 0; c < 3; ++c)
                    px[c] = static_cast<std::uint8_t>(
                        std::lround(std::clamp(color[static_cast<size_t>(c)], 0.0, 1.0) * 255.0));
                flow.u(x, y) = static_cast<float>(disp[0]);
                flow.v(x, y) = static_cast<float>(disp[1]);
            }
        }

        MaskImage main_mask = object_mask_at(spec.main_object, main_pos, spec.width, spec.height);
        out.frames.push_back(std::move(frame));
        out.flows.push_back(std::move(flow));

        // proposals: the main object, optionally corrupted, plus distractors
        MaskImage prop_mask = main_mask;
        if (spec.corrupt_proposals) {
            const int radius = static_cast<int>(prop_rng.uniform_int(1, 2));
            const bool dilate = prop_rng.uniform() < 0.5;
            MaskImage corrupted = morph(prop_mask, radius, dilate);
            if (corrupted.area() > 0) prop_mask = std::move(corrupted);
        }
        if (auto box = tight_box(prop_mask)) {
            ProposalRecord rec;
            rec.frame = t;
            rec.mask = std::move(prop_mask);
            rec.objectness = static_cast<float>(prop_rng.uniform(0.7, 1.0));
            rec.box = *box;
            out.proposals.push_back(std::move(rec));
        }
        for (size_t di = 0; di < spec.distractors.size(); ++di) {
            MaskImage dm = object_mask_at(spec.distractors[di], dist_pos[di], spec.width,
                                          spec.height);
            if (auto box = tight_box(dm)) {
                ProposalRecord rec;
                rec.frame = t;
                rec.mask = std::move(dm);
                rec.objectness = static_cast<float>(prop_rng.uniform(0.3, 0.9));
                rec.box = *box;
                out.proposals.push_back(std::move(rec));
            }
        }
        out.masks.push_back(std::move(main_mask));
    }
    return out;
}

// -- randomized scenes --------------------------------------------------------

SceneSpec SceneSampler::sample(std::uint64_t seed) const {
    Rng rng(Rng::derive(seed, 0x5ce7));
    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.frames = frames;
    spec.seed = seed;
    spec.corrupt_proposals = corrupt_proposals;

    spec.background.seed = rng.next_u64();
    spec.background.base = {rng.uniform(0.25, 0.45), rng.uniform(0.3, 0.55), rng.uniform(0.35, 0.6)};
    spec.background.amp = rng.uniform(0.15, 0.3);
    spec.background.scale = rng.uniform(6.0, 12.0);

    // whole-pixel pan on one axis keeps the background displacement constant
    // from frame to frame instead of flickering through the rounding; the
    // pan drift consumes most of that axis' corridor, so the object size is
    // capped there
    if (rng.uniform() < 0.5) {
        const bool horizontal = rng.uniform() < 0.5;
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        (horizontal ? spec.pan_x : spec.pan_y) = sign;
    }

    // main object: warm-tinted texture, clearly inside the margin over the
    // whole trajectory
    ObjectSpec& main = spec.main_object;
    main.shape = rng.uniform() < 0.5 ? ObjectSpec::Shape::Rectangle : ObjectSpec::Shape::Ellipse;
    main.half_w = rng.uniform(0.09, spec.pan_x != 0 ? 0.12 : 0.16) * width;
    main.half_h = rng.uniform(0.09, spec.pan_y != 0 ? 0.12 : 0.16) * height;
    main.texture.seed = rng.next_u64();
    main.texture.base = {rng.uniform(0.65, 0.85), rng.uniform(0.25, 0.4), rng.uniform(0.15, 0.3)};
    main.texture.amp = rng.uniform(0.2, 0.35);
    main.texture.scale = rng.uniform(3.0, 6.0);

    // over `frames` frames the net drift must fit the frame, so the speed
    // target is carried mostly by the oscillation (peak speed ~ amp * omega)
    // on top of a small drift velocity
    const double speed = rng.uniform(min_speed, max_speed);
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double drift = rng.uniform(0.1, 0.5);
    main.traj.vx = drift * std::cos(angle);
    main.traj.vy = drift * std::sin(angle);
    if (allow_sinusoidal) {
        main.traj.omega = rng.uniform(0.25, 0.6);
        const double amp = std::min(speed / main.traj.omega, 10.0);
        const double split = rng.uniform(0.3, 0.7);
        main.traj.amp_x = amp * split;
        main.traj.amp_y = amp * (1.0 - split);
        main.traj.phase = rng.uniform(0.0, 6.283185307179586);
    } else {
        main.traj.vx = speed * std::cos(angle);
        main.traj.vy = speed * std::sin(angle);
    }

    // pick a start so the whole screen trajectory (camera pan included)
    // stays inside the margin; shrink the velocity until a corridor exists
    for (int attempt = 0;; ++attempt) {
        double min_dx = 0, max_dx = 0, min_dy = 0, max_dy = 0;
        for (int t = 0; t < frames; ++t) {
            const double dx = main.traj.vx * t + spec.pan_x * t +
                              main.traj.amp_x * std::sin(main.traj.omega * t + main.traj.phase) -
                              main.traj.amp_x * std::sin(main.traj.phase);
            const double dy = main.traj.vy * t + spec.pan_y * t +
                              main.traj.amp_y * std::sin(main.traj.omega * t + main.traj.phase) -
                              main.traj.amp_y * std::sin(main.traj.phase);
            min_dx = std::min(min_dx, dx);
            max_dx = std::max(max_dx, dx);
            min_dy = std::min(min_dy, dy);
            max_dy = std::max(max_dy, dy);
        }
        const double lo_x = 2.5 + main.half_w - min_dx;
        const double hi_x = width - 3.5 - main.half_w - max_dx;
        const double lo_y = 2.5 + main.half_h - min_dy;
        const double hi_y = height - 3.5 - main.half_h - max_dy;
        if (lo_x <= hi_x && lo_y <= hi_y) {
            const double sx = main.traj.amp_x * std::sin(main.traj.phase);
            const double sy = main.traj.amp_y * std::sin(main.traj.phase);
            main.traj.x0 = rng.uniform(lo_x, hi_x) - sx;
            main.traj.y0 = rng.uniform(lo_y, hi_y) - sy;
            break;
        }
        if (attempt > 64) throw SpecError("scene sampler: no feasible main trajectory");
        main.traj.vx *= 0.8;
        main.traj.vy *= 0.8;
        main.traj.amp_x *= 0.8;
        main.traj.amp_y *= 0.8;
    }

    const int n_dist =
        static_cast<int>(rng.uniform_int(min_distractors, std::max(min_distractors, max_distractors)));
    for (int d = 0; d < n_dist; ++d) {
        ObjectSpec obj;
        obj.shape = rng.uniform() < 0.5 ? ObjectSpec::Shape::Rectangle : ObjectSpec::Shape::Ellipse;
        obj.half_w = rng.uniform(0.07, 0.14) * width;
        obj.half_h = rng.uniform(0.07, 0.14) * height;
        obj.texture.seed = rng.next_u64();
        // cool-tinted family, distinct from the main object
        obj.texture.base = {rng.uniform(0.2, 0.4), rng.uniform(0.35, 0.6), rng.uniform(0.45, 0.75)};
        obj.texture.amp = rng.uniform(0.25, 0.45);
        obj.texture.scale = rng.uniform(3.0, 6.0);
        obj.traj.x0 = rng.uniform(obj.half_w + 1.0, width - obj.half_w - 2.0);
        obj.traj.y0 = rng.uniform(obj.half_h + 1.0, height - obj.half_h - 2.0);
        if (rng.uniform() < 0.5) {
            // slow mover: gentle oscillation plus a small drift, a fraction
            // of the main object's pace
            const double ds = rng.uniform(0.15, 0.4);
            const double da = rng.uniform(0.0, 6.283185307179586);
            obj.traj.vx = ds * std::cos(da);
            obj.traj.vy = ds * std::sin(da);
            obj.traj.omega = rng.uniform(0.2, 0.45);
            const double amp = rng.uniform(1.0, 3.0);
            obj.traj.amp_x = amp * rng.uniform(0.2, 0.8);
            obj.traj.amp_y = amp - obj.traj.amp_x;
            obj.traj.phase = rng.uniform(0.0, 6.283185307179586);
            // keep it roughly in frame over the whole clip
            const double tx = obj.traj.x0 + obj.traj.vx * frames;
            const double ty = obj.traj.y0 + obj.traj.vy * frames;
            if (tx < obj.half_w + 1 || tx > width - obj.half_w - 2 || ty < obj.half_h + 1 ||
                ty > height - obj.half_h - 2) {
                obj.traj.vx = -obj.traj.vx;
                obj.traj.vy = -obj.traj.vy;
            }
        }
        spec.distractors.push_back(obj);
    }
    return spec;
}

// -- JSON -----------------------------------------------------------------

namespace {

nlohmann::json texture_to_json(const TextureSpec& t) {
    return {{"seed", t.seed}, {"base", t.base}, {"amp", t.amp}, {"scale", t.scale},
            {"octaves", t.octaves}};
}

TextureSpec texture_from_json(const nlohmann::json& j) {
    TextureSpec t;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.base = j.at("base").get<std::array<double, 3>>();
    t.amp = j.at("amp").get<double>();
    t.scale = j.at("scale").get<double>();
    t.octaves = j.at("octaves").get<int>();
    return t;
}

nlohmann::json object_to_json(const ObjectSpec& o) {
    return {{"shape", o.shape == ObjectSpec::Shape::Rectangle ? "rectangle" : "ellipse"},
            {"half_w", o.half_w},
            {"half_h", o.half_h},
            {"texture", texture_to_json(o.texture)},
            {"trajectory",
             {{"x0", o.traj.x0},
              {"y0", o.traj.y0},
              {"vx", o.traj.vx},
              {"vy", o.traj.vy},
              {"amp_x", o.traj.amp_x},
              {"amp_y", o.traj.amp_y},
              {"omega", o.traj.omega},
              {"phase", o.traj.phase}}}};
}

ObjectSpec object_from_json(const nlohmann::json& j) {
    ObjectSpec o;
    const std::string shape = j.at("shape").get<std::string>();
    if (shape == "rectangle")
        o.shape = ObjectSpec::Shape::Rectangle;
    else if (shape == "ellipse")
        o.shape = ObjectSpec::Shape::Ellipse;
    else
        throw FormatError("scene spec: unknown shape '" + shape + "'");
    o.half_w = j.at("half_w").get<double>();
    o.half_h = j.at("half_h").get<double>();
    o.texture = texture_from_json(j.at("texture"));
    const auto& t = j.at("trajectory");
    o.traj.x0 = t.at("x0").get<double>();
    o.traj.y0 = t.at("y0").get<double>();
    o.traj.vx = t.at("vx").get<double>();
    o.traj.vy = t.at("vy").get<double>();
    o.traj.amp_x = t.at("amp_x").get<double>();
    o.traj.amp_y = t.at("amp_y").get<double>();
    o.traj.omega = t.at("omega").get<double>();
    o.traj.phase = t.at("phase").get<double>();
    return o;
}

}  // namespace

nlohmann::json scene_spec_to_json(const SceneSpec& spec) {
    nlohmann::json dist = nlohmann::json::array();
    for (const auto& d : spec.distractors) dist.push_back(object_to_json(d));
    return {{"width", spec.width},
            {"height", spec.height},
            {"frames", spec.frames},
            {"seed", spec.seed},
            {"background", texture_to_json(spec.background)},
            {"pan_x", spec.pan_x},
            {"pan_y", spec.pan_y},
            {"main_object", object_to_json(spec.main_object)},
            {"distractors", dist},
            {"corrupt_proposals", spec.corrupt_proposals}};
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    SceneSpec spec;
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.frames = j.at("frames").get<int>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.background = texture_from_json(j.at("background"));
    spec.pan_x = j.at("pan_x").get<double>();
    spec.pan_y = j.at("pan_y").get<double>();
    spec.main_object = object_from_json(j.at("main_object"));
    for (const auto& d : j.at("distractors")) spec.distractors.push_back(object_from_json(d));
    spec.corrupt_proposals = j.at("corrupt_proposals").get<bool>();
    return spec;
}

}  // namespace sseg
