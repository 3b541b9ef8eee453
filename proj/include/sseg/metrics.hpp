#pragma once

#include <string>
#include <vector>

#include "sseg/image_io.hpp"

#include <nlohmann/json.hpp>

namespace sseg {

// DAVIS-style evaluation: region similarity J (mask IoU) and contour
// accuracy F (boundary F-measure within a distance tolerance).

/// Intersection over union of the two masks; 1 when both are empty.
double region_j(const MaskImage& pred, const MaskImage& gt);

/// Boundary pixels: foreground pixels with a 4-neighbor background pixel
/// (outside the image counts as background).
MaskImage boundary_map(const MaskImage& mask);

/// Default tolerance: round(0.8% of the image diagonal), at least 1 px.
int boundary_tolerance(int w, int h);

/// F = 2PR/(P+R) of boundary-pixel matching within `tolerance_px` (Euclidean,
/// dilation-based). Pass tolerance_px <= 0 for the default. 1 when both
/// boundaries are empty, 0 when exactly one is.
double boundary_f(const MaskImage& pred, const MaskImage& gt, int tolerance_px = 0);

struct FrameScore {
    std::string name;
    double j = 0, f = 0;
};

struct SequenceScore {
    std::vector<FrameScore> per_frame;
    double j_mean = 0, f_mean = 0, jf_mean = 0;
};

/// Per-frame J/F plus means; the first and last frames are excluded from the
/// means (kept in per_frame) whenever more than two frames exist.
SequenceScore score_sequence(const std::vector<MaskImage>& pred, const std::vector<MaskImage>& gt,
                             const std::vector<std::string>& names);

/// Directory version: pairs *.pgm files by name. Predictions stored as
/// 16-bit probability maps are binarized at 0.5. Missing frames on either
/// side are reported by name.
SequenceScore evaluate_sequence(const std::string& pred_dir, const std::string& gt_dir);

nlohmann::json sequence_score_to_json(const SequenceScore& score);

}  // namespace sseg
