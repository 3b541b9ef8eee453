#include "sseg/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sseg/checkpoint.hpp"
#include "sseg/datagen.hpp"
#include "sseg/metrics.hpp"

namespace sseg {

namespace fs = std::filesystem;

std::string frame_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", index);
    return buf;
}

std::vector<std::string> list_sequence_dirs(const std::string& root) {
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

SequenceTensors load_sequence_tensors(const std::string& root, const std::string& name) {
    const fs::path seq = fs::path(root) / name;
    SequenceTensors out;
    out.name = name;
    for (int t = 0;; ++t) {
        const fs::path frame = seq / "frames" / (frame_name(t) + ".ppm");
        if (!fs::exists(frame)) break;
        const fs::path flow = seq / "flows" / (frame_name(t) + ".flo");
        const fs::path mask = seq / "masks" / (frame_name(t) + ".pgm");
        if (!fs::exists(flow)) throw IoError("missing flow file: " + flow.string());
        if (!fs::exists(mask)) throw IoError("missing mask file: " + mask.string());
        out.rgb.push_back(rgb_to_tensor(ppm_read(frame.string())));
        out.flow.push_back(flow_to_tensor(flo_read(flow.string())));
        out.mask.push_back(mask_to_tensor(mask_read(mask.string())));
    }
    if (out.rgb.empty()) throw IoError("no frames found under " + (seq / "frames").string());
    return out;
}

void gen_data(const RunConfig& cfg, const std::string& out_dir, std::uint64_t seed) {
    SceneSampler sampler;
    sampler.width = cfg.datagen.width;
    sampler.height = cfg.datagen.height;
    sampler.frames = cfg.datagen.frames;
    sampler.min_distractors = cfg.datagen.min_distractors;
    sampler.max_distractors = cfg.datagen.max_distractors;
    sampler.corrupt_proposals = cfg.datagen.corrupt_proposals;
    sampler.allow_sinusoidal = cfg.datagen.allow_sinusoidal;
    sampler.min_speed = cfg.datagen.min_speed;
    sampler.max_speed = cfg.datagen.max_speed;

    for (int i = 0; i < cfg.datagen.sequences; ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "seq%03d", i);
        const fs::path seq_dir = fs::path(out_dir) / name;
        fs::create_directories(seq_dir / "frames");
        fs::create_directories(seq_dir / "flows");
        fs::create_directories(seq_dir / "masks");
        fs::create_directories(seq_dir / "proposals");

        const SceneSpec spec = sampler.sample(Rng::derive(seed, static_cast<std::uint64_t>(i)));
        const GeneratedSequence gen = generate_sequence(spec);

        std::vector<ProposalFileEntry> entries;
        std::vector<int> per_frame_counter(static_cast<size_t>(spec.frames), 0);
        for (const auto& prop : gen.proposals) {
            char pname[32];
            std::snprintf(pname, sizeof(pname), "%05d_%02d.pgm", prop.frame,
                          per_frame_counter[static_cast<size_t>(prop.frame)]++);
            const std::string rel = std::string("proposals/") + pname;
            mask_write((seq_dir / rel).string(), prop.mask);
            ProposalFileEntry e;
            e.frame = prop.frame;
            e.mask_path = rel;
            e.objectness = prop.objectness;
            e.box = prop.box;
            entries.push_back(std::move(e));
        }
        proposals_write((seq_dir / "proposals.jsonl").string(), entries);

        for (int t = 0; t < spec.frames; ++t) {
            ppm_write((seq_dir / "frames" / (frame_name(t) + ".ppm")).string(),
                      gen.frames[static_cast<size_t>(t)]);
            flo_write((seq_dir / "flows" / (frame_name(t) + ".flo")).string(),
                      gen.flows[static_cast<size_t>(t)]);
            mask_write((seq_dir / "masks" / (frame_name(t) + ".pgm")).string(),
                       gen.masks[static_cast<size_t>(t)]);
        }
        std::ofstream spec_os(seq_dir / "spec.json");
        spec_os << scene_spec_to_json(spec).dump(2) << "\n";
        if (!spec_os) throw IoError("failed writing " + (seq_dir / "spec.json").string());
    }
}

void train_cmd(const RunConfig& cfg, const std::string& dataset_dir, const std::string& out_dir,
               std::uint64_t seed) {
    std::vector<SequenceTensors> dataset;
    for (const auto& name : list_sequence_dirs(dataset_dir))
        dataset.push_back(load_sequence_tensors(dataset_dir, name));
    if (dataset.empty()) throw IoError("no sequences under " + dataset_dir);

    ParamStore params = init_model_params<float>(cfg.model, seed);

    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "loss.csv");
    if (!csv) throw IoError("cannot open " + (fs::path(out_dir) / "loss.csv").string());
    csv << "step,loss,lr,grad_norm\n";

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;
    train_model(cfg.model, params, dataset, train_cfg, [&csv](const TrainStepRow& row) {
        char line[128];
        std::snprintf(line, sizeof(line), "%lld,%.6f,%.8g,%.6f\n",
                      static_cast<long long>(row.step), row.loss, row.lr, row.grad_norm);
        csv << line;
    });
    csv.flush();
    if (!csv) throw IoError("failed writing loss.csv");

    save_checkpoint((fs::path(out_dir) / "checkpoint.sseg").string(), params,
                    model_config_to_json(cfg.model));
}

void infer_cmd(const RunConfig& cfg, const std::string& checkpoint_path,
               const std::string& dataset_dir, const std::string& out_dir) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const ModelConfig model = model_config_from_json(ckpt.meta);

    for (const auto& name : list_sequence_dirs(dataset_dir)) {
        const SequenceTensors seq = load_sequence_tensors(dataset_dir, name);
        const std::vector<Tensor> probs =
            infer_sequence(model, ckpt.params, seq, cfg.train.batch_frames);
        const fs::path seq_out = fs::path(out_dir) / name;
        fs::create_directories(seq_out);
        for (size_t t = 0; t < probs.size(); ++t)
            prob_write((seq_out / (frame_name(static_cast<int>(t)) + ".pgm")).string(),
                       tensor_to_prob(probs[t]));
    }
}

namespace {

MaskImage threshold_map(const ProbImage& p) {
    MaskImage m;
    m.w = p.w;
    m.h = p.h;
    m.v.resize(p.v.size());
    for (size_t i = 0; i < p.v.size(); ++i) m.v[i] = p.v[i] >= 0.5f ? 1 : 0;
    return m;
}

ImageU8 overlay_mask(const ImageU8& frame, const MaskImage& mask) {
    ImageU8 out = frame;
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            if (mask.at(x, y)) {
                std::uint8_t* p = out.px(x, y);
                p[0] = static_cast<std::uint8_t>(p[0] / 2);
                p[1] = static_cast<std::uint8_t>((p[1] + 255) / 2);
                p[2] = static_cast<std::uint8_t>(p[2] / 2);
            }
    return out;
}

std::vector<std::string> list_frame_pgms(const fs::path& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm")
            names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

void fuse_cmd(const RunConfig& cfg, const std::string& maps_dir, const std::string& out_dir,
              bool use_crf) {
    if (cfg.paths.dataset.empty())
        throw ConfigError("fuse requires paths.dataset in the config (proposals and frames)");

    for (const auto& name : list_sequence_dirs(maps_dir)) {
        const fs::path seq_maps = fs::path(maps_dir) / name;
        const fs::path seq_data = fs::path(cfg.paths.dataset) / name;
        const auto frames = list_frame_pgms(seq_maps);
        if (frames.empty()) throw IoError("no probability maps under " + seq_maps.string());

        const auto proposals = load_proposals_by_frame((seq_data / "proposals.jsonl").string(),
                                                       static_cast<int>(frames.size()));

        const fs::path seq_out = fs::path(out_dir) / name;
        fs::create_directories(seq_out / "overlay");

        FuseState track_state;
        for (size_t t = 0; t < frames.size(); ++t) {
            const ProbImage pixel = prob_read((seq_maps / (frames[t] + ".pgm")).string());
            const FuseResult fused =
                select_and_fuse(pixel, proposals[t], track_state, cfg.tracker);

            const ImageU8 frame_rgb =
                ppm_read((seq_data / "frames" / (frames[t] + ".ppm")).string());
            MaskImage mask = use_crf ? meanfield_refine(fused.fused, frame_rgb, cfg.crf)
                                     : threshold_map(fused.fused);
            mask_write((seq_out / (frames[t] + ".pgm")).string(), mask);
            ppm_write((seq_out / "overlay" / (frames[t] + ".ppm")).string(),
                      overlay_mask(frame_rgb, mask));
        }
    }
}

EvalSummary eval_cmd(const RunConfig& cfg, const std::string& pred_dir,
                     const std::string& out_dir) {
    if (cfg.paths.dataset.empty())
        throw ConfigError("eval requires paths.dataset in the config (ground-truth masks)");

    EvalSummary summary;
    nlohmann::json seq_reports = nlohmann::json::array();
    const auto names = list_sequence_dirs(pred_dir);
    if (names.empty()) throw IoError("no sequences under " + pred_dir);
    for (const auto& name : names) {
        const SequenceScore score =
            evaluate_sequence((fs::path(pred_dir) / name).string(),
                              (fs::path(cfg.paths.dataset) / name / "masks").string());
        nlohmann::json rep = sequence_score_to_json(score);
        rep["name"] = name;
        seq_reports.push_back(std::move(rep));
        summary.j_mean += score.j_mean;
        summary.f_mean += score.f_mean;
    }
    summary.j_mean /= static_cast<double>(names.size());
    summary.f_mean /= static_cast<double>(names.size());
    summary.jf_mean = (summary.j_mean + summary.f_mean) / 2.0;

    summary.report = {{"sequences", seq_reports},
                      {"J_mean", summary.j_mean},
                      {"F_mean", summary.f_mean},
                      {"JF_mean", summary.jf_mean}};

    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "report.json");
    os << summary.report.dump(2) << "\n";
    if (!os) throw IoError("failed writing " + (fs::path(out_dir) / "report.json").string());
    return summary;
}

}  // namespace sseg
