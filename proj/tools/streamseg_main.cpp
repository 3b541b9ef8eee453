#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "sseg/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string in_dir;
    std::string out_dir;
    std::string checkpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool crf = false;
};

sseg::RunConfig load(const CommonArgs& args) {
    return args.config_path.empty() ? sseg::default_config()
                                    : sseg::load_config(args.config_path);
}

std::uint64_t effective_seed(const CommonArgs& args, const sseg::RunConfig& cfg) {
    return args.seed_set ? args.seed : cfg.train.seed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised video object segmentation pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&args](CLI::App* cmd, bool needs_in, bool needs_out) {
        cmd->add_option("--config", args.config_path, "JSON run configuration");
        auto* in = cmd->add_option("--in", args.in_dir, "input directory");
        auto* out = cmd->add_option("--out", args.out_dir, "output directory");
        if (needs_in) in->required();
        if (needs_out) out->required();
        cmd->add_option("--seed", args.seed, "seed override")->each([&args](const std::string&) {
            args.seed_set = true;
        });
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(gen, false, true);
    CLI::App* train = app.add_subcommand("train", "train the pixel-level model");
    add_common(train, true, true);
    CLI::App* infer = app.add_subcommand("infer", "write per-frame probability maps");
    add_common(infer, true, true);
    infer->add_option("--checkpoint", args.checkpoint, "model checkpoint")->required();
    CLI::App* fuse = app.add_subcommand("fuse", "instance-aware fusion of probability maps");
    add_common(fuse, true, true);
    fuse->add_flag("--crf", args.crf, "refine masks with the dense CRF");
    CLI::App* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
    add_common(eval, true, true);

    CLI11_PARSE(app, argc, argv);

    try {
        const sseg::RunConfig cfg = load(args);
        if (gen->parsed()) {
            sseg::gen_data(cfg, args.out_dir, effective_seed(args, cfg));
        } else if (train->parsed()) {
            sseg::train_cmd(cfg, args.in_dir, args.out_dir, effective_seed(args, cfg));
        } else if (infer->parsed()) {
            sseg::infer_cmd(cfg, args.checkpoint, args.in_dir, args.out_dir);
        } else if (fuse->parsed()) {
            sseg::fuse_cmd(cfg, args.in_dir, args.out_dir, args.crf);
        } else if (eval->parsed()) {
            const sseg::EvalSummary s = sseg::eval_cmd(cfg, args.in_dir, args.out_dir);
            std::printf("J_mean %.4f F_mean %.4f JF_mean %.4f\n", s.j_mean, s.f_mean, s.jf_mean);
        }
    } catch (const sseg::Error& e) {
        std::fprintf(stderr, "%s\n", e.line().c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
