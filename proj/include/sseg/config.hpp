#pragma once

#include <string>

#include "sseg/crf.hpp"
#include "sseg/instance.hpp"
#include "sseg/streams.hpp"
#include "sseg/training.hpp"

#include <nlohmann/json.hpp>

namespace sseg {

struct DatagenConfig {
    int sequences = 20;
    int width = 64, height = 64;
    int frames = 40;
    int min_distractors = 0, max_distractors = 3;
    bool corrupt_proposals = false;
    bool allow_sinusoidal = true;
    double min_speed = 1.0, max_speed = 2.5;
};

struct PathsConfig {
    std::string dataset;  // dataset root used by fuse (proposals/frames) and eval (gt masks)
};

/// Whole run configuration. Defaults follow the published hyperparameters
/// where they exist (k=7, clip norm 5, lr 1e-4, T=20, CRF w1=5/w2=3 with
/// scales (30,5,3)); the architecture defaults to the small benchmark size
/// with the full-size variant selectable through the same keys.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    CrfConfig crf;
    TrackerConfig tracker;
    DatagenConfig datagen;
    PathsConfig paths;
};

RunConfig default_config();

/// Strict parse: unknown keys anywhere are rejected.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

nlohmann::json config_to_json(const RunConfig& cfg);

nlohmann::json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace sseg
