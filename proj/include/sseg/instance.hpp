#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sseg/image_io.hpp"

#include <Eigen/Dense>

namespace sseg {

// Instance-aware segmentation: proposals are scored against the pixel-level
// probability map, the best one boosts the map (and halves it elsewhere),
// and a constant-velocity Kalman tracker gates which proposals are eligible.

/// Binary instance mask with detector confidence. The box is the tight
/// bounding box of the mask, inclusive pixel coordinates (x0, y0, x1, y1).
struct InstanceProposal {
    MaskImage mask;
    float objectness = 0;
    std::array<int, 4> box = {0, 0, 0, 0};
};

/// IoU of a proposal mask against the soft pixel map:
/// sum(M_obj * M_pixel) / sum(max(M_obj, Bin(M_pixel))) with a 0.5
/// binarization threshold; 0 when the denominator is empty.
double compute_iou(const InstanceProposal& proposal, const ProbImage& pixel);

/// Score^i = IoU^i * objectness^i.
std::vector<double> score_proposals(const std::vector<InstanceProposal>& proposals,
                                    const ProbImage& pixel);

/// Boosts the map inside the selected mask by the interior mean (clipped to
/// 1) and halves it elsewhere.
ProbImage boost_mask(const ProbImage& pixel, const InstanceProposal& selected);

/// Rectangle IoU on inclusive-coordinate boxes (width = x1 - x0 + 1).
double box_iou(const std::array<double, 4>& a, const std::array<double, 4>& b);

// ---------------------------------------------------------------------------
// constant-velocity Kalman box tracker

/// State [cx, cy, s, r, vcx, vcy, vs]: box center, area, aspect ratio and
/// their velocities; the aspect ratio is constant in the motion model.
class KalmanBoxTracker {
public:
    explicit KalmanBoxTracker(const std::array<double, 4>& box);

    /// Advances one frame and returns the predicted box.
    std::array<double, 4> predict();

    void update(const std::array<double, 4>& box);

    std::array<double, 4> current_box() const;

    /// Frames since the last update (after predict without update).
    int misses() const { return misses_; }
    void count_miss() { ++misses_; }

    const Eigen::Matrix<double, 7, 7>& covariance() const { return P_; }
    const Eigen::Matrix<double, 7, 1>& state() const { return x_; }

private:
    Eigen::Matrix<double, 7, 1> x_;
    Eigen::Matrix<double, 7, 7> P_;
    int misses_ = 0;

    void check_covariance(const char* where) const;
};

std::array<double, 4> box_to_measurement(const std::array<double, 4>& box);  // cx,cy,s,r
std::array<double, 4> measurement_to_box(const std::array<double, 4>& z);

// ---------------------------------------------------------------------------
// per-frame selection + fusion

struct TrackerConfig {
    double gate_iou = 0.1;  // minimum box IoU against the predicted box
    int coast_limit = 10;   // drop the track after this many missed frames
};

/// Sequential per-sequence state: the (optional) active track.
struct FuseState {
    std::optional<KalmanBoxTracker> track;
};

struct FuseResult {
    ProbImage fused;
    int chosen = -1;  // proposal index, -1 when the gated set was empty
};

/// Gates proposals by predicted-box IoU (all pass when no track exists),
/// picks the best score (ties to the lowest index), boosts the map and
/// updates the track. An empty gated set leaves the map unchanged and
/// coasts the track one frame; a track that missed more than coast_limit
/// consecutive frames is dropped.
FuseResult select_and_fuse(const ProbImage& pixel, const std::vector<InstanceProposal>& proposals,
                           FuseState& state, const TrackerConfig& cfg);

// ---------------------------------------------------------------------------
// proposals interchange: JSON Lines, one proposal per line with the mask in
// a PGM next to the file:
//   {"frame": 3, "mask": "proposals/00003_00.pgm", "objectness": 0.9,
//    "box": [x0, y0, x1, y1]}

struct ProposalFileEntry {
    int frame = 0;
    std::string mask_path;  // relative to the jsonl directory
    float objectness = 0;
    std::array<int, 4> box = {0, 0, 0, 0};
};

void proposals_write(const std::string& jsonl_path, const std::vector<ProposalFileEntry>& entries);
std::vector<ProposalFileEntry> proposals_read(const std::string& jsonl_path);

/// Loads and groups proposals by frame index (masks read from disk).
std::vector<std::vector<InstanceProposal>> load_proposals_by_frame(const std::string& jsonl_path,
                                                                   int frame_count);

}  // namespace sseg
