#include "sseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

namespace sseg {

namespace {

void check_resolution(const char* op, const MaskImage& a, const MaskImage& b) {
    if (a.w != b.w || a.h != b.h)
        throw ShapeError(std::string(op) + ": resolutions " + std::to_string(a.w) + "x" +
                         std::to_string(a.h) + " and " + std::to_string(b.w) + "x" +
                         std::to_string(b.h) + " differ");
}

}  // namespace

double region_j(const MaskImage& pred, const MaskImage& gt) {
    check_resolution("region_j", pred, gt);
    std::int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
        inter += p && g;
        uni += p || g;
    }
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

MaskImage boundary_map(const MaskImage& mask) {
    MaskImage b;
    b.w = mask.w;
    b.h = mask.h;
    b.v.assign(mask.v.size(), 0);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            if (!mask.at(x, y)) continue;
            const bool edge = x == 0 || x == mask.w - 1 || y == 0 || y == mask.h - 1;
            if (edge || !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
                !mask.at(x, y + 1))
                b.at(x, y) = 1;
        }
    return b;
}

int boundary_tolerance(int w, int h) {
    const double diag = std::sqrt(static_cast<double>(w) * w + static_cast<double>(h) * h);
    return std::max(1, static_cast<int>(std::lround(0.008 * diag)));
}

namespace {

/// Dilation by a Euclidean disk of radius tol.
MaskImage dilate_disk(const MaskImage& src, int tol) {
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -tol; dy <= tol; ++dy)
        for (int dx = -tol; dx <= tol; ++dx)
            if (dx * dx + dy * dy <= tol * tol) offsets.emplace_back(dx, dy);
    MaskImage out;
    out.w = src.w;
    out.h = src.h;
    out.v.assign(src.v.size(), 0);
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x) {
            if (!src.at(x, y)) continue;
            for (auto [dx, dy] : offsets) {
                const int nx = x + dx, ny = y + dy;
                if (nx >= 0 && nx < src.w && ny >= 0 && ny < src.h) out.at(nx, ny) = 1;
            }
        }
    return out;
}

}  // namespace

double boundary_f(const MaskImage& pred, const MaskImage& gt, int tolerance_px) {
    check_resolution("boundary_f", pred, gt);
    const int tol = tolerance_px > 0 ? tolerance_px : boundary_tolerance(pred.w, pred.h);
    const MaskImage pb = boundary_map(pred);
    const MaskImage gb = boundary_map(gt);
    const std::int64_t np = pb.area(), ng = gb.area();
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;

    const MaskImage gd = dilate_disk(gb, tol);
    const MaskImage pd = dilate_disk(pb, tol);
    std::int64_t p_match = 0, g_match = 0;
    for (size_t i = 0; i < pb.v.size(); ++i) {
        p_match += pb.v[i] && gd.v[i];
        g_match += gb.v[i] && pd.v[i];
    }
    const double precision = static_cast<double>(p_match) / static_cast<double>(np);
    const double recall = static_cast<double>(g_match) / static_cast<double>(ng);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

SequenceScore score_sequence(const std::vector<MaskImage>& pred, const std::vector<MaskImage>& gt,
                             const std::vector<std::string>& names) {
    if (pred.size() != gt.size())
        throw ShapeError("score_sequence: frame counts differ (" + std::to_string(pred.size()) +
                         " vs " + std::to_string(gt.size()) + ")");
    if (pred.empty()) throw SpecError("score_sequence: empty sequence");

    SequenceScore score;
    for (size_t i = 0; i < pred.size(); ++i) {
        FrameScore fs;
        fs.name = i < names.size() ? names[i] : std::to_string(i);
        fs.j = region_j(pred[i], gt[i]);
        fs.f = boundary_f(pred[i], gt[i]);
        score.per_frame.push_back(fs);
    }
    // DAVIS convention: first and last frames are excluded from the means
    size_t lo = 0, hi = score.per_frame.size();
    if (hi > 2) {
        lo = 1;
        hi -= 1;
    }
    double js = 0, fsum = 0;
    for (size_t i = lo; i < hi; ++i) {
        js += score.per_frame[i].j;
        fsum += score.per_frame[i].f;
    }
    const double count = static_cast<double>(hi - lo);
    score.j_mean = js / count;
    score.f_mean = fsum / count;
    score.jf_mean = (score.j_mean + score.f_mean) / 2.0;
    return score;
}

SequenceScore evaluate_sequence(const std::string& pred_dir, const std::string& gt_dir) {
    namespace fs = std::filesystem;
    auto list_pgms = [](const std::string& dir) {
        std::map<std::string, fs::path> files;
        if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".pgm")
                files[e.path().stem().string()] = e.path();
        return files;
    };
    const auto preds = list_pgms(pred_dir);
    const auto gts = list_pgms(gt_dir);

    std::string missing;
    for (const auto& [name, p] : gts)
        if (!preds.count(name)) missing += (missing.empty() ? "" : ", ") + name;
    for (const auto& [name, p] : preds)
        if (!gts.count(name)) missing += (missing.empty() ? "" : ", ") + name;
    if (!missing.empty())
        throw IoError("evaluate_sequence: unmatched frames: " + missing);
    if (gts.empty()) throw IoError("evaluate_sequence: no frames in " + gt_dir);

    std::vector<MaskImage> pred, gt;
    std::vector<std::string> names;
    for (const auto& [name, gpath] : gts) {
        const auto& ppath = preds.at(name);
        if (pgm_is_16bit(ppath.string())) {
            const ProbImage prob = prob_read(ppath.string());
            MaskImage m;
            m.w = prob.w;
            m.h = prob.h;
            m.v.resize(prob.v.size());
            for (size_t i = 0; i < prob.v.size(); ++i) m.v[i] = prob.v[i] >= 0.5f ? 1 : 0;
            pred.push_back(std::move(m));
        } else {
            pred.push_back(mask_read(ppath.string()));
        }
        gt.push_back(mask_read(gpath.string()));
        names.push_back(name);
    }
    return score_sequence(pred, gt, names);
}

nlohmann::json sequence_score_to_json(const SequenceScore& score) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : score.per_frame)
        frames.push_back({{"frame", f.name}, {"J", f.j}, {"F", f.f}});
    return {{"per_frame", frames},
            {"J_mean", score.j_mean},
            {"F_mean", score.f_mean},
            {"JF_mean", score.jf_mean}};
}

}  // namespace sseg
