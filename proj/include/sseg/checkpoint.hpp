#pragma once

#include <string>

#include "sseg/param_store.hpp"

#include <nlohmann/json.hpp>

namespace sseg {

// Checkpoint container: 8-byte magic "SSEGCKPT", a little-endian uint32
// byte length, that many bytes of UTF-8 JSON header, then the raw
// little-endian float32 parameter payloads concatenated in header order.
// The header carries {"config": <model json>, "params": [{name, shape}...]}.

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const nlohmann::json& meta);

struct Checkpoint {
    ParamStore params;
    nlohmann::json meta;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace sseg
