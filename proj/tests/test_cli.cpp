#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "sseg/config.hpp"
#include "sseg/pipeline.hpp"

#include <nlohmann/json.hpp>

// Exercises the installed binary end to end. The binary path comes from the
// STREAMSEG_BIN compile definition set by the build.

using namespace sseg;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "sseg_cli_test";

struct RunResult {
    int exit_code;
    std::string stderr_text;
};

RunResult run_cli(const std::string& args) {
    const std::string err_file = (kWork / "stderr.txt").string();
    const std::string cmd = std::string(STREAMSEG_BIN) + " " + args + " 2>" + err_file;
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = raw == -1 ? -1 : WEXITSTATUS(raw);
    std::ifstream is(err_file);
    r.stderr_text.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    return r;
}

std::string write_config() {
    nlohmann::json j = {
        {"model",
         {{"levels", 3},
          {"hidden", {2, 4, 2}},
          {"k", 3},
          {"motion_channels", 2},
          {"appearance", {{"widths", {2, 4, 4, 2}}}}}},
        {"train", {{"steps", 4}, {"T", 4}, {"seed", 21}}},
        {"datagen",
         {{"sequences", 2}, {"width", 24}, {"height", 24}, {"frames", 6},
          {"min_distractors", 1}, {"max_distractors", 1}}},
        {"paths", {{"dataset", (kWork / "data").string()}}},
    };
    const std::string path = (kWork / "cfg.json").string();
    std::ofstream(path) << j.dump(2);
    return path;
}

std::vector<std::string> dir_files(const fs::path& p) {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file()) names.push_back(e.path().lexically_relative(p).string());
    std::sort(names.begin(), names.end());
    return names;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cli: full pipeline emits every declared artifact") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const std::string cfg = write_config();

    REQUIRE(run_cli("gen-data --config " + cfg + " --out " + (kWork / "data").string() +
                    " --seed 5").exit_code == 0);
    for (const char* seq : {"seq000", "seq001"}) {
        const fs::path s = kWork / "data" / seq;
        CHECK(fs::exists(s / "frames" / "00000.ppm"));
        CHECK(fs::exists(s / "flows" / "00005.flo"));
        CHECK(fs::exists(s / "masks" / "00003.pgm"));
        CHECK(fs::exists(s / "proposals.jsonl"));
        CHECK(fs::exists(s / "spec.json"));
    }

    REQUIRE(run_cli("train --config " + cfg + " --in " + (kWork / "data").string() + " --out " +
                    (kWork / "run").string()).exit_code == 0);
    CHECK(fs::exists(kWork / "run" / "checkpoint.sseg"));
    CHECK(fs::exists(kWork / "run" / "loss.csv"));
    {
        std::ifstream csv(kWork / "run" / "loss.csv");
        std::string header;
        std::getline(csv, header);
        CHECK(header == "step,loss,lr,grad_norm");
        int rows = 0;
        for (std::string line; std::getline(csv, line);) ++rows;
        CHECK(rows == 4);
    }

    REQUIRE(run_cli("infer --config " + cfg + " --checkpoint " +
                    (kWork / "run" / "checkpoint.sseg").string() + " --in " +
                    (kWork / "data").string() + " --out " + (kWork / "maps").string())
                .exit_code == 0);
    CHECK(fs::exists(kWork / "maps" / "seq000" / "00005.pgm"));

    REQUIRE(run_cli("fuse --config " + cfg + " --in " + (kWork / "maps").string() + " --out " +
                    (kWork / "fused").string()).exit_code == 0);
    CHECK(fs::exists(kWork / "fused" / "seq000" / "00000.pgm"));
    CHECK(fs::exists(kWork / "fused" / "seq000" / "overlay" / "00000.ppm"));

    REQUIRE(run_cli("eval --config " + cfg + " --in " + (kWork / "fused").string() + " --out " +
                    (kWork / "eval").string()).exit_code == 0);
    const auto report = nlohmann::json::parse(slurp(kWork / "eval" / "report.json"));
    CHECK(report.contains("J_mean"));
    CHECK(report.contains("F_mean"));
    CHECK(report.contains("JF_mean"));
    CHECK(report["sequences"].size() == 2);
}

TEST_CASE("cli: eval on identical directories reports J_mean 1.0") {
    // copy ground truth as predictions
    const fs::path pred = kWork / "pred_gt";
    fs::remove_all(pred);
    for (const char* seq : {"seq000", "seq001"}) {
        fs::create_directories(pred / seq);
        for (const auto& e : fs::directory_iterator(kWork / "data" / seq / "masks"))
            fs::copy_file(e.path(), pred / seq / e.path().filename());
    }
    const std::string cfg = (kWork / "cfg.json").string();
    REQUIRE(run_cli("eval --config " + cfg + " --in " + pred.string() + " --out " +
                    (kWork / "eval_gt").string()).exit_code == 0);
    const auto report = nlohmann::json::parse(slurp(kWork / "eval_gt" / "report.json"));
    CHECK(report["J_mean"].get<double>() == 1.0);
    CHECK(report["F_mean"].get<double>() == 1.0);
}

TEST_CASE("cli: fuse without --crf equals the instance module composition") {
    const RunConfig cfg = load_config((kWork / "cfg.json").string());
    for (const char* seq : {"seq000", "seq001"}) {
        FuseState state;
        const int frames = 6;
        const auto proposals = load_proposals_by_frame(
            (kWork / "data" / seq / "proposals.jsonl").string(), frames);
        for (int t = 0; t < frames; ++t) {
            const ProbImage pixel =
                prob_read((kWork / "maps" / seq / (frame_name(t) + ".pgm")).string());
            const FuseResult expect = select_and_fuse(pixel, proposals[static_cast<size_t>(t)],
                                                      state, cfg.tracker);
            MaskImage expect_mask;
            expect_mask.w = expect.fused.w;
            expect_mask.h = expect.fused.h;
            expect_mask.v.resize(expect.fused.v.size());
            for (size_t i = 0; i < expect.fused.v.size(); ++i)
                expect_mask.v[i] = expect.fused.v[i] >= 0.5f ? 1 : 0;
            const MaskImage got =
                mask_read((kWork / "fused" / seq / (frame_name(t) + ".pgm")).string());
            CHECK(got.v == expect_mask.v);
        }
    }
}

TEST_CASE("cli: commands are idempotent for identical inputs") {
    const std::string cfg = (kWork / "cfg.json").string();
    REQUIRE(run_cli("fuse --config " + cfg + " --in " + (kWork / "maps").string() + " --out " +
                    (kWork / "fused2").string()).exit_code == 0);
    const auto a = dir_files(kWork / "fused");
    const auto b = dir_files(kWork / "fused2");
    REQUIRE(a == b);
    for (const auto& rel : a) CHECK(slurp(kWork / "fused" / rel) == slurp(kWork / "fused2" / rel));

    // two same-seed trainings produce byte-identical checkpoints
    REQUIRE(run_cli("train --config " + cfg + " --in " + (kWork / "data").string() + " --out " +
                    (kWork / "run2").string()).exit_code == 0);
    CHECK(slurp(kWork / "run" / "checkpoint.sseg") == slurp(kWork / "run2" / "checkpoint.sseg"));
    CHECK(slurp(kWork / "run" / "loss.csv") == slurp(kWork / "run2" / "loss.csv"));
}

TEST_CASE("cli: failures exit 1 with a single machine-parsable line") {
    auto check_error = [](const RunResult& r, const std::string& kind) {
        CHECK(r.exit_code == 1);
        CAPTURE(r.stderr_text);
        CHECK(r.stderr_text.find(kind + ":") == 0);
        CHECK(std::count(r.stderr_text.begin(), r.stderr_text.end(), '\n') == 1);
    };
    check_error(run_cli("eval --config /nonexistent.json --in x --out y"), "io_error");

    const fs::path bad_cfg = kWork / "bad.json";
    std::ofstream(bad_cfg) << R"({"model": {"levles": 3}})";
    check_error(run_cli("gen-data --config " + bad_cfg.string() + " --out " +
                        (kWork / "never").string()),
                "config_error");

    std::ofstream(bad_cfg) << R"({"train": {"T": 0}})";
    check_error(run_cli("gen-data --config " + bad_cfg.string() + " --out " +
                        (kWork / "never").string()),
                "config_error");

    check_error(run_cli("infer --config " + (kWork / "cfg.json").string() +
                        " --checkpoint /nonexistent.sseg --in " + (kWork / "data").string() +
                        " --out " + (kWork / "never").string()),
                "io_error");
}
