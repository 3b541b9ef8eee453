#include "sseg/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace sseg {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};

void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("checkpoint " + path + ": truncated header length at byte offset " +
                          std::to_string(static_cast<long long>(is.tellg())));
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const nlohmann::json& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);

    nlohmann::json header;
    header["config"] = meta;
    nlohmann::json plist = nlohmann::json::array();
    for (const auto& name : params.names()) {
        const auto& t = params.get(name);
        plist.push_back({{"name", name}, {"shape", t.shape}});
    }
    header["params"] = std::move(plist);
    const std::string hs = header.dump();

    os.write(kMagic, 8);
    write_u32_le(os, static_cast<std::uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    static_assert(sizeof(float) == 4);
    for (const auto& name : params.names()) {
        const auto& t = params.get(name);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);

    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("checkpoint " + path + ": bad magic at byte offset 0");
    const std::uint32_t hlen = read_u32_le(is, path);
    std::string hs(hlen, '\0');
    if (!is.read(hs.data(), hlen))
        throw FormatError("checkpoint " + path + ": truncated header at byte offset 12");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint " + path + ": invalid header JSON: " + e.what());
    }
    if (!header.contains("params") || !header["params"].is_array())
        throw FormatError("checkpoint " + path + ": header missing params list");

    Checkpoint ckpt;
    ckpt.meta = header.value("config", nlohmann::json::object());
    for (const auto& p : header["params"]) {
        const std::string name = p.at("name").get<std::string>();
        const std::vector<int> shape = p.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        const std::streamoff offset = is.tellg();
        if (!is.read(reinterpret_cast<char*>(t.data.data()),
                     static_cast<std::streamsize>(t.data.size() * sizeof(float))))
            throw FormatError("checkpoint " + path + ": truncated payload for '" + name +
                              "' at byte offset " + std::to_string(offset));
        ckpt.params.add(name, std::move(t));
    }
    return ckpt;
}

}  // namespace sseg
