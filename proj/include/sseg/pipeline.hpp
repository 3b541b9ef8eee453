#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sseg/config.hpp"

namespace sseg {

// Filesystem layout of a dataset:
//   <root>/<seq>/frames/%05d.ppm    RGB frames
//   <root>/<seq>/flows/%05d.flo     flow t -> t+1, one per frame
//   <root>/<seq>/masks/%05d.pgm     binary ground-truth masks
//   <root>/<seq>/proposals.jsonl    instance proposals (masks in proposals/)
//   <root>/<seq>/spec.json          generator scene spec

std::string frame_name(int index);  // "%05d"

std::vector<std::string> list_sequence_dirs(const std::string& root);

SequenceTensors load_sequence_tensors(const std::string& root, const std::string& name);

/// Generates `cfg.datagen.sequences` scenes under out_dir (seq000, ...).
void gen_data(const RunConfig& cfg, const std::string& out_dir, std::uint64_t seed);

/// Trains on every sequence under dataset_dir; writes checkpoint.sseg and
/// loss.csv (columns step,loss,lr,grad_norm) into out_dir.
void train_cmd(const RunConfig& cfg, const std::string& dataset_dir, const std::string& out_dir,
               std::uint64_t seed);

/// Writes per-frame 16-bit probability PGMs to <out>/<seq>/%05d.pgm.
void infer_cmd(const RunConfig& cfg, const std::string& checkpoint_path,
               const std::string& dataset_dir, const std::string& out_dir);

/// Instance-aware fusion with Kalman gating over the maps under maps_dir
/// (produced by infer); proposals and frames come from cfg.paths.dataset.
/// Writes binary masks to <out>/<seq>/%05d.pgm and overlays to
/// <out>/<seq>/overlay/%05d.ppm. With use_crf, masks are refined by the
/// dense CRF before writing.
void fuse_cmd(const RunConfig& cfg, const std::string& maps_dir, const std::string& out_dir,
              bool use_crf);

struct EvalSummary {
    double j_mean = 0, f_mean = 0, jf_mean = 0;
    nlohmann::json report;
};

/// Evaluates predictions under pred_dir (one subdir per sequence) against
/// <cfg.paths.dataset>/<seq>/masks; writes report.json into out_dir.
EvalSummary eval_cmd(const RunConfig& cfg, const std::string& pred_dir,
                     const std::string& out_dir);

}  // namespace sseg
