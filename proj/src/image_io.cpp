#include "sseg/image_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace sseg {

namespace {

// PNM header token reader: skips whitespace and # comments
int read_pnm_int(std::istream& is, const std::string& path) {
    int c = is.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = is.get();
        c = is.get();
    }
    if (c == EOF || !std::isdigit(c))
        throw FormatError(path + ": malformed PNM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = is.get();
    }
    return value;
}

struct PnmHeader {
    int w, h, maxval;
};

PnmHeader read_pnm_header(std::istream& is, const std::string& path, const char* magic) {
    char m[2];
    if (!is.read(m, 2) || m[0] != magic[0] || m[1] != magic[1])
        throw FormatError(path + ": expected " + magic + " header");
    PnmHeader hd;
    hd.w = read_pnm_int(is, path);
    hd.h = read_pnm_int(is, path);
    hd.maxval = read_pnm_int(is, path);
    if (hd.w <= 0 || hd.h <= 0)
        throw FormatError(path + ": inconsistent dimensions " + std::to_string(hd.w) + "x" +
                          std::to_string(hd.h));
    return hd;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return is;
}

}  // namespace

void ppm_write(const std::string& path, const ImageU8& img) {
    auto os = open_out(path);
    os << "P6\n" << img.w << " " << img.h << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.rgb.data()),
             static_cast<std::streamsize>(img.rgb.size()));
    if (!os) throw IoError("failed writing: " + path);
}

ImageU8 ppm_read(const std::string& path) {
    auto is = open_in(path);
    const PnmHeader hd = read_pnm_header(is, path, "P6");
    if (hd.maxval != 255) throw FormatError(path + ": PPM maxval must be 255");
    ImageU8 img;
    img.w = hd.w;
    img.h = hd.h;
    img.rgb.resize(static_cast<size_t>(hd.w) * hd.h * 3);
    if (!is.read(reinterpret_cast<char*>(img.rgb.data()),
                 static_cast<std::streamsize>(img.rgb.size())))
        throw FormatError(path + ": truncated PPM payload");
    return img;
}

void mask_write(const std::string& path, const MaskImage& mask) {
    auto os = open_out(path);
    os << "P5\n" << mask.w << " " << mask.h << "\n255\n";
    std::vector<std::uint8_t> bytes(mask.v.size());
    for (size_t i = 0; i < mask.v.size(); ++i) bytes[i] = mask.v[i] ? 255 : 0;
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing: " + path);
}

MaskImage mask_read(const std::string& path) {
    auto is = open_in(path);
    const PnmHeader hd = read_pnm_header(is, path, "P5");
    if (hd.maxval != 255)
        throw FormatError(path + ": binary mask PGM must have maxval 255, got " +
                          std::to_string(hd.maxval));
    std::vector<std::uint8_t> bytes(static_cast<size_t>(hd.w) * hd.h);
    if (!is.read(reinterpret_cast<char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size())))
        throw FormatError(path + ": truncated PGM payload");
    MaskImage mask;
    mask.w = hd.w;
    mask.h = hd.h;
    mask.v.resize(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) {
        if (bytes[i] != 0 && bytes[i] != 255)
            throw FormatError(path + ": binary mask contains value " +
                              std::to_string(bytes[i]) + ", expected 0 or 255");
        mask.v[i] = bytes[i] ? 1 : 0;
    }
    return mask;
}

void prob_write(const std::string& path, const ProbImage& prob) {
    auto os = open_out(path);
    os << "P5\n" << prob.w << " " << prob.h << "\n65535\n";
    std::vector<std::uint8_t> bytes(prob.v.size() * 2);
    for (size_t i = 0; i < prob.v.size(); ++i) {
        const double p = std::clamp(static_cast<double>(prob.v[i]), 0.0, 1.0);
        const auto q = static_cast<std::uint32_t>(std::floor(p * 65535.0 + 0.5));
        bytes[i * 2] = static_cast<std::uint8_t>(q >> 8);  // big-endian
        bytes[i * 2 + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing: " + path);
}

ProbImage prob_read(const std::string& path) {
    auto is = open_in(path);
    const PnmHeader hd = read_pnm_header(is, path, "P5");
    ProbImage prob;
    prob.w = hd.w;
    prob.h = hd.h;
    prob.v.resize(static_cast<size_t>(hd.w) * hd.h);
    if (hd.maxval == 65535) {
        std::vector<std::uint8_t> bytes(prob.v.size() * 2);
        if (!is.read(reinterpret_cast<char*>(bytes.data()),
                     static_cast<std::streamsize>(bytes.size())))
            throw FormatError(path + ": truncated PGM payload");
        for (size_t i = 0; i < prob.v.size(); ++i) {
            const std::uint32_t q =
                (static_cast<std::uint32_t>(bytes[i * 2]) << 8) | bytes[i * 2 + 1];
            prob.v[i] = static_cast<float>(q) / 65535.0f;
        }
    } else if (hd.maxval == 255) {
        // a stored binary mask also reads as a probability map
        std::vector<std::uint8_t> bytes(prob.v.size());
        if (!is.read(reinterpret_cast<char*>(bytes.data()),
                     static_cast<std::streamsize>(bytes.size())))
            throw FormatError(path + ": truncated PGM payload");
        for (size_t i = 0; i < prob.v.size(); ++i)
            prob.v[i] = static_cast<float>(bytes[i]) / 255.0f;
    } else {
        throw FormatError(path + ": PGM maxval must be 255 or 65535, got " +
                          std::to_string(hd.maxval));
    }
    return prob;
}

bool pgm_is_16bit(const std::string& path) {
    auto is = open_in(path);
    const PnmHeader hd = read_pnm_header(is, path, "P5");
    if (hd.maxval != 255 && hd.maxval != 65535)
        throw FormatError(path + ": PGM maxval must be 255 or 65535, got " +
                          std::to_string(hd.maxval));
    return hd.maxval == 65535;
}

// -- .flo -------------------------------------------------------------------

namespace {

constexpr float kFloMagic = 202021.25f;

void write_le32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_le32(std::istream& is, const std::string& path, const char* what) {
    unsigned char b[4];
    const std::streamoff off = is.tellg();
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated " + what + " at byte offset " +
                          std::to_string(static_cast<long long>(off)));
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void flo_write(const std::string& path, const FlowImage& flow) {
    auto os = open_out(path);
    std::uint32_t magic_bits;
    std::memcpy(&magic_bits, &kFloMagic, 4);
    write_le32(os, magic_bits);
    write_le32(os, static_cast<std::uint32_t>(flow.w));
    write_le32(os, static_cast<std::uint32_t>(flow.h));
    for (float f : flow.uv) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_le32(os, bits);
    }
    if (!os) throw IoError("failed writing: " + path);
}

FlowImage flo_read(const std::string& path) {
    auto is = open_in(path);
    const std::uint32_t magic_bits = read_le32(is, path, "magic");
    float magic;
    std::memcpy(&magic, &magic_bits, 4);
    if (magic != kFloMagic)
        throw FormatError(path + ": bad flo magic at byte offset 0");
    FlowImage flow;
    flow.w = static_cast<int>(read_le32(is, path, "width"));
    flow.h = static_cast<int>(read_le32(is, path, "height"));
    if (flow.w <= 0 || flow.h <= 0 || static_cast<std::int64_t>(flow.w) * flow.h > (1 << 28))
        throw FormatError(path + ": implausible flo dimensions " + std::to_string(flow.w) + "x" +
                          std::to_string(flow.h));
    flow.uv.resize(static_cast<size_t>(flow.w) * flow.h * 2);
    std::vector<unsigned char> payload(flow.uv.size() * 4);
    is.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (static_cast<size_t>(is.gcount()) != payload.size())
        throw FormatError(path + ": truncated payload at byte offset " +
                          std::to_string(12 + is.gcount()));
    for (size_t i = 0; i < flow.uv.size(); ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(payload[i * 4]) |
                                   (static_cast<std::uint32_t>(payload[i * 4 + 1]) << 8) |
                                   (static_cast<std::uint32_t>(payload[i * 4 + 2]) << 16) |
                                   (static_cast<std::uint32_t>(payload[i * 4 + 3]) << 24);
        std::memcpy(&flow.uv[i], &bits, 4);
    }
    return flow;
}

// -- preprocessing ------------------------------------------------------------

Tensor rgb_to_tensor(const ImageU8& img) {
    Tensor t({1, 3, img.h, img.w});
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const std::uint8_t* p = img.px(x, y);
            for (int c = 0; c < 3; ++c)
                t.at4(0, c, y, x) = static_cast<float>(p[c]) / 127.5f - 1.0f;
        }
    return t;
}

Tensor flow_to_tensor(const FlowImage& flow) {
    Tensor t({1, 2, flow.h, flow.w});
    double max_mag = 0.0;
    for (int y = 0; y < flow.h; ++y)
        for (int x = 0; x < flow.w; ++x) {
            const double u = flow.u(x, y), v = flow.v(x, y);
            max_mag = std::max(max_mag, std::sqrt(u * u + v * v));
        }
    const double scale = max_mag > 0.0 ? 1.0 / max_mag : 1.0;
    for (int y = 0; y < flow.h; ++y)
        for (int x = 0; x < flow.w; ++x) {
            t.at4(0, 0, y, x) = static_cast<float>(flow.u(x, y) * scale);
            t.at4(0, 1, y, x) = static_cast<float>(flow.v(x, y) * scale);
        }
    return t;
}

Tensor mask_to_tensor(const MaskImage& mask) {
    Tensor t({1, 1, mask.h, mask.w});
    for (size_t i = 0; i < mask.v.size(); ++i) t.data[i] = mask.v[i] ? 1.0f : 0.0f;
    return t;
}

ProbImage tensor_to_prob(const Tensor& t) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1)
        throw ShapeError("tensor_to_prob: expected [1,1,H,W], got " + shape_str(t.shape));
    ProbImage p;
    p.h = t.dim(2);
    p.w = t.dim(3);
    p.v.assign(t.data.begin(), t.data.end());
    return p;
}

}  // namespace sseg
