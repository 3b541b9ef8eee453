#include "sseg/instance.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sseg {

double compute_iou(const InstanceProposal& proposal, const ProbImage& pixel) {
    if (proposal.mask.w != pixel.w || proposal.mask.h != pixel.h)
        throw ShapeError("compute_iou: proposal " + std::to_string(proposal.mask.w) + "x" +
                         std::to_string(proposal.mask.h) + " vs map " + std::to_string(pixel.w) +
                         "x" + std::to_string(pixel.h));
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < pixel.v.size(); ++i) {
        const double m = proposal.mask.v[i] ? 1.0 : 0.0;
        const double p = pixel.v[i];
        num += m * p;
        den += std::max(m, p >= 0.5f ? 1.0 : 0.0);
    }
    return den > 0.0 ? num / den : 0.0;
}

std::vector<double> score_proposals(const std::vector<InstanceProposal>& proposals,
                                    const ProbImage& pixel) {
    std::vector<double> scores;
    scores.reserve(proposals.size());
    for (const auto& p : proposals) scores.push_back(compute_iou(p, pixel) * p.objectness);
    return scores;
}

ProbImage boost_mask(const ProbImage& pixel, const InstanceProposal& selected) {
    if (selected.mask.w != pixel.w || selected.mask.h != pixel.h)
        throw ShapeError("boost_mask: mask resolution does not match map");
    const std::int64_t area = selected.mask.area();
    if (area == 0) throw SpecError("boost_mask: selected mask is empty");

    double interior = 0.0;
    for (size_t i = 0; i < pixel.v.size(); ++i)
        if (selected.mask.v[i]) interior += pixel.v[i];
    const double mu = interior / static_cast<double>(area);

    ProbImage out = pixel;
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = selected.mask.v[i]
                       ? static_cast<float>(std::min(static_cast<double>(pixel.v[i]) + mu, 1.0))
                       : pixel.v[i] * 0.5f;
    return out;
}

double box_iou(const std::array<double, 4>& a, const std::array<double, 4>& b) {
    const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]) + 1.0;
    const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]) + 1.0;
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double area_a = (a[2] - a[0] + 1.0) * (a[3] - a[1] + 1.0);
    const double area_b = (b[2] - b[0] + 1.0) * (b[3] - b[1] + 1.0);
    return inter / (area_a + area_b - inter);
}

// ---------------------------------------------------------------------------
// Kalman tracker

namespace {

using Mat7 = Eigen::Matrix<double, 7, 7>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat47 = Eigen::Matrix<double, 4, 7>;

Mat7 transition_matrix() {
    Mat7 f = Mat7::Identity();
    f(0, 4) = 1.0;  // cx += vcx
    f(1, 5) = 1.0;  // cy += vcy
    f(2, 6) = 1.0;  // s  += vs
    return f;
}

Mat47 measurement_matrix() {
    Mat47 h = Mat47::Zero();
    for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
    return h;
}

Mat7 process_noise() {
    Vec7 d;
    d << 1.0, 1.0, 1.0, 1e-2, 1e-1, 1e-1, 1e-4;
    return d.asDiagonal();
}

Mat4 measurement_noise() {
    Vec4 d;
    d << 1.0, 1.0, 10.0, 1e-2;
    return d.asDiagonal();
}

}  // namespace

std::array<double, 4> box_to_measurement(const std::array<double, 4>& box) {
    const double w = box[2] - box[0] + 1.0;
    const double h = box[3] - box[1] + 1.0;
    return {box[0] + w / 2.0 - 0.5, box[1] + h / 2.0 - 0.5, w * h, w / h};
}

std::array<double, 4> measurement_to_box(const std::array<double, 4>& z) {
    const double w = std::sqrt(std::max(z[2] * z[3], 1e-12));
    const double h = z[2] / w;
    return {z[0] - w / 2.0 + 0.5, z[1] - h / 2.0 + 0.5, z[0] + w / 2.0 - 0.5,
            z[1] + h / 2.0 - 0.5};
}

KalmanBoxTracker::KalmanBoxTracker(const std::array<double, 4>& box) {
    const auto z = box_to_measurement(box);
    x_.setZero();
    for (int i = 0; i < 4; ++i) x_(i) = z[static_cast<size_t>(i)];
    Vec7 p0;
    // measured components start at the measurement noise scale; velocities
    // are uninformed
    p0 << 1.0, 1.0, 10.0, 1e-2, 1e3, 1e3, 1e3;
    P_ = p0.asDiagonal();
}

void KalmanBoxTracker::check_covariance(const char* where) const {
    if (!P_.allFinite() || (P_ - P_.transpose()).cwiseAbs().maxCoeff() > 1e-6)
        throw NumericError(std::string(where) + ": covariance not symmetric/finite");
    Eigen::LDLT<Mat7> ldlt(P_);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < -1e-9).any())
        throw NumericError(std::string(where) + ": covariance not positive semi-definite");
}

std::array<double, 4> KalmanBoxTracker::predict() {
    check_covariance("kalman_predict");
    // keep the area positive under constant-velocity extrapolation
    if (x_(2) + x_(6) <= 0.0) x_(6) = 0.0;
    const Mat7 f = transition_matrix();
    x_ = f * x_;
    P_ = f * P_ * f.transpose() + process_noise();
    P_ = ((P_ + P_.transpose()) / 2.0).eval();
    return current_box();
}

void KalmanBoxTracker::update(const std::array<double, 4>& box) {
    check_covariance("kalman_update");
    const auto zz = box_to_measurement(box);
    Vec4 z;
    for (int i = 0; i < 4; ++i) z(i) = zz[static_cast<size_t>(i)];
    const Mat47 h = measurement_matrix();
    const Vec4 y = z - h * x_;
    const Mat4 s = h * P_ * h.transpose() + measurement_noise();
    const Eigen::Matrix<double, 7, 4> k = P_ * h.transpose() * s.inverse();
    x_ = x_ + k * y;
    P_ = ((Mat7::Identity() - k * h) * P_).eval();
    P_ = ((P_ + P_.transpose()) / 2.0).eval();
    misses_ = 0;
}

std::array<double, 4> KalmanBoxTracker::current_box() const {
    return measurement_to_box({x_(0), x_(1), x_(2), x_(3)});
}

// ---------------------------------------------------------------------------

FuseResult select_and_fuse(const ProbImage& pixel, const std::vector<InstanceProposal>& proposals,
                           FuseState& state, const TrackerConfig& cfg) {
    FuseResult result;
    result.fused = pixel;

    std::optional<std::array<double, 4>> predicted;
    if (state.track) predicted = state.track->predict();

    // gate by predicted box; everything passes when no track exists
    const auto scores = score_proposals(proposals, pixel);
    int best = -1;
    for (size_t i = 0; i < proposals.size(); ++i) {
        if (predicted) {
            const std::array<double, 4> pb = {
                static_cast<double>(proposals[i].box[0]), static_cast<double>(proposals[i].box[1]),
                static_cast<double>(proposals[i].box[2]), static_cast<double>(proposals[i].box[3])};
            if (box_iou(pb, *predicted) < cfg.gate_iou) continue;
        }
        if (best < 0 || scores[i] > scores[static_cast<size_t>(best)]) best = static_cast<int>(i);
    }

    if (best < 0) {
        // coast: the prediction already advanced the track
        if (state.track) {
            state.track->count_miss();
            if (state.track->misses() > cfg.coast_limit) state.track.reset();
        }
        return result;
    }

    const auto& chosen = proposals[static_cast<size_t>(best)];
    result.chosen = best;
    result.fused = boost_mask(pixel, chosen);
    const std::array<double, 4> cb = {static_cast<double>(chosen.box[0]),
                                      static_cast<double>(chosen.box[1]),
                                      static_cast<double>(chosen.box[2]),
                                      static_cast<double>(chosen.box[3])};
    if (state.track)
        state.track->update(cb);
    else
        state.track.emplace(cb);
    return result;
}

// ---------------------------------------------------------------------------
// proposals JSONL

void proposals_write(const std::string& jsonl_path,
                     const std::vector<ProposalFileEntry>& entries) {
    std::ofstream os(jsonl_path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + jsonl_path);
    for (const auto& e : entries) {
        nlohmann::json j = {{"frame", e.frame},
                            {"mask", e.mask_path},
                            {"objectness", e.objectness},
                            {"box", e.box}};
        os << j.dump() << "\n";
    }
    if (!os) throw IoError("failed writing: " + jsonl_path);
}

std::vector<ProposalFileEntry> proposals_read(const std::string& jsonl_path) {
    std::ifstream is(jsonl_path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + jsonl_path);
    std::vector<ProposalFileEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(jsonl_path + ":" + std::to_string(lineno) +
                              ": invalid JSON: " + e.what());
        }
        try {
            ProposalFileEntry entry;
            entry.frame = j.at("frame").get<int>();
            entry.mask_path = j.at("mask").get<std::string>();
            entry.objectness = j.at("objectness").get<float>();
            entry.box = j.at("box").get<std::array<int, 4>>();
            entries.push_back(std::move(entry));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(jsonl_path + ":" + std::to_string(lineno) +
                              ": missing or malformed field: " + e.what());
        }
    }
    return entries;
}

std::vector<std::vector<InstanceProposal>> load_proposals_by_frame(const std::string& jsonl_path,
                                                                   int frame_count) {
    const auto entries = proposals_read(jsonl_path);
    const auto dir = std::filesystem::path(jsonl_path).parent_path();
    std::vector<std::vector<InstanceProposal>> by_frame(static_cast<size_t>(frame_count));
    for (const auto& e : entries) {
        if (e.frame < 0 || e.frame >= frame_count)
            throw FormatError(jsonl_path + ": proposal frame " + std::to_string(e.frame) +
                              " out of range [0," + std::to_string(frame_count) + ")");
        InstanceProposal p;
        p.mask = mask_read((dir / e.mask_path).string());
        p.objectness = e.objectness;
        p.box = e.box;
        by_frame[static_cast<size_t>(e.frame)].push_back(std::move(p));
    }
    return by_frame;
}

}  // namespace sseg
