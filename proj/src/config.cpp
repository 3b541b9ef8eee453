#include "sseg/config.hpp"

#include <fstream>
#include <set>

namespace sseg {

namespace {

using nlohmann::json;

/// Pulls known keys out of an object and rejects anything left over.
class StrictObject {
public:
    StrictObject(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
        if (!j.is_object()) throw ConfigError(scope_ + ": expected a JSON object");
    }

    ~StrictObject() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown config key '" + scope_ + it.key() + "'");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + scope_ + key + "': " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const json& j_;
    std::string scope_;
    std::set<std::string> seen_;
};

void parse_model(const json& j, ModelConfig& m) {
    StrictObject o(j, "model.");
    o.get("levels", m.levels);
    o.get("hidden", m.hidden);
    o.get("k", m.k);
    o.get("motion_channels", m.motion_channels);
    o.get("streams", m.streams);
    if (const json* app = o.child("appearance")) {
        StrictObject a(*app, "model.appearance.");
        a.get("widths", m.appearance.widths);
        a.get("kernel", m.appearance.kernel);
        a.get("slope", m.appearance.slope);
    }
}

void parse_train(const json& j, TrainConfig& t) {
    StrictObject o(j, "train.");
    o.get("steps", t.steps);
    o.get("T", t.batch_frames);
    o.get("seed", t.seed);
    o.get("crop_fraction", t.crop_fraction);
    o.get("augment", t.augment);
    o.get("lr", t.adam.lr);
    o.get("clip_norm", t.adam.clip_norm);
    o.get("lr_halflife_steps", t.adam.lr_halflife_steps);
}

void parse_crf(const json& j, CrfConfig& c) {
    StrictObject o(j, "crf.");
    o.get("w1", c.w1);
    o.get("w2", c.w2);
    o.get("theta_alpha", c.theta_alpha);
    o.get("theta_beta", c.theta_beta);
    o.get("theta_gamma", c.theta_gamma);
    o.get("iterations", c.iterations);
}

void parse_tracker(const json& j, TrackerConfig& t) {
    StrictObject o(j, "tracker.");
    o.get("gate_iou", t.gate_iou);
    o.get("coast_limit", t.coast_limit);
}

void parse_datagen(const json& j, DatagenConfig& d) {
    StrictObject o(j, "datagen.");
    o.get("sequences", d.sequences);
    o.get("width", d.width);
    o.get("height", d.height);
    o.get("frames", d.frames);
    o.get("min_distractors", d.min_distractors);
    o.get("max_distractors", d.max_distractors);
    o.get("corrupt_proposals", d.corrupt_proposals);
    o.get("allow_sinusoidal", d.allow_sinusoidal);
    o.get("min_speed", d.min_speed);
    o.get("max_speed", d.max_speed);
}

void parse_paths(const json& j, PathsConfig& p) {
    StrictObject o(j, "paths.");
    o.get("dataset", p.dataset);
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(const json& j) {
    RunConfig cfg;
    StrictObject o(j, "");
    if (const json* m = o.child("model")) parse_model(*m, cfg.model);
    if (const json* t = o.child("train")) parse_train(*t, cfg.train);
    if (const json* c = o.child("crf")) parse_crf(*c, cfg.crf);
    if (const json* k = o.child("tracker")) parse_tracker(*k, cfg.tracker);
    if (const json* d = o.child("datagen")) parse_datagen(*d, cfg.datagen);
    if (const json* p = o.child("paths")) parse_paths(*p, cfg.paths);
    validate_model_config(cfg.model);
    if (cfg.crf.theta_alpha <= 0 || cfg.crf.theta_beta <= 0 || cfg.crf.theta_gamma <= 0)
        throw ConfigError("crf scales must be positive");
    if (cfg.crf.iterations < 1) throw ConfigError("crf.iterations must be >= 1");
    if (cfg.train.batch_frames < 1) throw ConfigError("train.T must be >= 1");
    if (cfg.train.crop_fraction <= 0 || cfg.train.crop_fraction > 1)
        throw ConfigError("train.crop_fraction must be in (0, 1]");
    if (cfg.datagen.min_distractors < 0 ||
        cfg.datagen.max_distractors < cfg.datagen.min_distractors)
        throw ConfigError("datagen distractor bounds are inconsistent");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    return {
        {"model", model_config_to_json(cfg.model)},
        {"train",
         {{"steps", cfg.train.steps},
          {"T", cfg.train.batch_frames},
          {"seed", cfg.train.seed},
          {"crop_fraction", cfg.train.crop_fraction},
          {"augment", cfg.train.augment},
          {"lr", cfg.train.adam.lr},
          {"clip_norm", cfg.train.adam.clip_norm},
          {"lr_halflife_steps", cfg.train.adam.lr_halflife_steps}}},
        {"crf",
         {{"w1", cfg.crf.w1},
          {"w2", cfg.crf.w2},
          {"theta_alpha", cfg.crf.theta_alpha},
          {"theta_beta", cfg.crf.theta_beta},
          {"theta_gamma", cfg.crf.theta_gamma},
          {"iterations", cfg.crf.iterations}}},
        {"tracker", {{"gate_iou", cfg.tracker.gate_iou}, {"coast_limit", cfg.tracker.coast_limit}}},
        {"datagen",
         {{"sequences", cfg.datagen.sequences},
          {"width", cfg.datagen.width},
          {"height", cfg.datagen.height},
          {"frames", cfg.datagen.frames},
          {"min_distractors", cfg.datagen.min_distractors},
          {"max_distractors", cfg.datagen.max_distractors},
          {"corrupt_proposals", cfg.datagen.corrupt_proposals},
          {"allow_sinusoidal", cfg.datagen.allow_sinusoidal},
          {"min_speed", cfg.datagen.min_speed},
          {"max_speed", cfg.datagen.max_speed}}},
        {"paths", {{"dataset", cfg.paths.dataset}}},
    };
}

nlohmann::json model_config_to_json(const ModelConfig& m) {
    return {{"levels", m.levels},
            {"hidden", m.hidden},
            {"k", m.k},
            {"motion_channels", m.motion_channels},
            {"streams", m.streams},
            {"appearance",
             {{"widths", m.appearance.widths},
              {"kernel", m.appearance.kernel},
              {"slope", m.appearance.slope}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    parse_model(j, m);
    validate_model_config(m);
    return m;
}

}  // namespace sseg
