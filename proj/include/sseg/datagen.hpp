#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sseg/image_io.hpp"

#include <nlohmann/json.hpp>

namespace sseg {

// Synthetic video scenes: one main textured object (rectangle or ellipse)
// following a constant or sinusoidal trajectory over a value-noise
// background, optional static/slow distractor objects, optional global
// camera pan. Flow is the analytic displacement field, so flow/mask/frame
// triplets are warp-consistent by construction.

struct Trajectory {
    double x0 = 0, y0 = 0;       // start center, pixels
    double vx = 0, vy = 0;       // constant velocity, px/frame
    double amp_x = 0, amp_y = 0; // sinusoidal amplitude, px (0 = constant velocity)
    double omega = 0, phase = 0;

    std::array<double, 2> position(double t) const {
        return {x0 + vx * t + amp_x * std::sin(omega * t + phase),
                y0 + vy * t + amp_y * std::sin(omega * t + phase)};
    }
};

struct TextureSpec {
    std::uint64_t seed = 0;
    std::array<double, 3> base = {0.5, 0.5, 0.5};  // base RGB in [0,1]
    double amp = 0.3;                              // noise amplitude
    double scale = 8.0;                            // base lattice period, px
    int octaves = 3;
};

struct ObjectSpec {
    enum class Shape { Rectangle, Ellipse };
    Shape shape = Shape::Rectangle;
    double half_w = 8, half_h = 6;
    TextureSpec texture;
    Trajectory traj;
};

struct SceneSpec {
    int width = 64, height = 64;
    int frames = 40;
    std::uint64_t seed = 0;
    TextureSpec background;
    double pan_x = 0, pan_y = 0;  // camera pan, px/frame
    ObjectSpec main_object;
    std::vector<ObjectSpec> distractors;
    bool corrupt_proposals = false;
};

nlohmann::json scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);

struct ProposalRecord {
    int frame = 0;
    MaskImage mask;
    float objectness = 0;
    std::array<int, 4> box = {0, 0, 0, 0};  // x0,y0,x1,y1 inclusive pixel coords
};

struct GeneratedSequence {
    SceneSpec spec;
    std::vector<ImageU8> frames;
    std::vector<MaskImage> masks;   // main object only
    std::vector<FlowImage> flows;   // frame t -> t+1, one per frame
    std::vector<ProposalRecord> proposals;
};

/// Renders the scene. Object screen positions and the camera-pan offset are
/// rounded to whole pixels per frame (the camera pan shifts objects and
/// background alike), so every flow vector is the exact integer displacement
/// of the rendered content and flow/mask/frame triplets are warp-consistent
/// up to quantization. Rejects specs whose main object leaves the 2-pixel
/// safety margin at any rendered frame.
GeneratedSequence generate_sequence(const SceneSpec& spec);

/// Randomized scene for the synthetic benchmark; distractor count is drawn
/// from [min_distractors, max_distractors].
struct SceneSampler {
    int width = 64, height = 64, frames = 40;
    int min_distractors = 0, max_distractors = 3;
    bool corrupt_proposals = false;
    bool allow_sinusoidal = true;
    double min_speed = 1.0, max_speed = 2.5;

    SceneSpec sample(std::uint64_t seed) const;
};

/// Tight bounding box of a mask (inclusive coords); empty mask yields none.
std::optional<std::array<int, 4>> tight_box(const MaskImage& mask);

}  // namespace sseg
