#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sseg/error.hpp"
#include "sseg/tensor.hpp"

namespace sseg {

/// Interleaved 8-bit RGB image (PPM P6 on disk).
struct ImageU8 {
    int w = 0, h = 0;
    std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

    std::uint8_t* px(int x, int y) { return &rgb[(static_cast<size_t>(y) * w + x) * 3]; }
    const std::uint8_t* px(int x, int y) const {
        return &rgb[(static_cast<size_t>(y) * w + x) * 3];
    }
};

/// Binary mask, one byte per pixel, values 0/1 (PGM P5 maxval 255 on disk,
/// stored as 0/255).
struct MaskImage {
    int w = 0, h = 0;
    std::vector<std::uint8_t> v;

    std::uint8_t& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
    std::uint8_t at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
    std::int64_t area() const {
        std::int64_t a = 0;
        for (auto b : v) a += b;
        return a;
    }
};

/// Probability map in [0,1] (PGM P5 maxval 65535 big-endian on disk,
/// quantized to value/65535 with round-half-up).
struct ProbImage {
    int w = 0, h = 0;
    std::vector<float> v;

    float& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
    float at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
};

/// Dense flow field, interleaved (u, v) displacement in pixels, frame t -> t+1
/// (Middlebury .flo on disk).
struct FlowImage {
    int w = 0, h = 0;
    std::vector<float> uv;  // 2 floats per pixel

    float& u(int x, int y) { return uv[(static_cast<size_t>(y) * w + x) * 2]; }
    float& v(int x, int y) { return uv[(static_cast<size_t>(y) * w + x) * 2 + 1]; }
    float u(int x, int y) const { return uv[(static_cast<size_t>(y) * w + x) * 2]; }
    float v(int x, int y) const { return uv[(static_cast<size_t>(y) * w + x) * 2 + 1]; }
};

void ppm_write(const std::string& path, const ImageU8& img);
ImageU8 ppm_read(const std::string& path);

void mask_write(const std::string& path, const MaskImage& mask);
MaskImage mask_read(const std::string& path);

void prob_write(const std::string& path, const ProbImage& prob);
ProbImage prob_read(const std::string& path);

/// True when the PGM at `path` is 16-bit (a probability map rather than a
/// binary mask).
bool pgm_is_16bit(const std::string& path);

void flo_write(const std::string& path, const FlowImage& flow);
FlowImage flo_read(const std::string& path);

// -- preprocessing ----------------------------------------------------------

/// RGB bytes to [1,3,H,W] in [-1,1]: value / 127.5 - 1.
Tensor rgb_to_tensor(const ImageU8& img);

/// Flow to [1,2,H,W] scaled so the per-frame maximum magnitude is 1
/// (identity when the field is all zero).
Tensor flow_to_tensor(const FlowImage& flow);

Tensor mask_to_tensor(const MaskImage& mask);

ProbImage tensor_to_prob(const Tensor& t);  // [1,1,H,W] -> map

}  // namespace sseg
