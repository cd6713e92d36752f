#pragma once

#include <string>

#include "epd/net.hpp"

namespace epd::ckpt {

// Binary model checkpoint: "EPD1" magic, a little-endian u32 JSON header
// length, the JSON header (version, model config, standardizer, tensor
// table), then each tensor's doubles in column-major order, concatenated in
// header order. Writing is byte-deterministic for identical params.
void save(const std::string& path, const net::ModelParams& params);

// Throws DataError on malformed files (bad magic, truncation, unknown or
// misshaped tensors).
net::ModelParams load(const std::string& path);

// Verifies that the loaded parameters structurally match the requested
// configuration; throws ModelError naming the first mismatching tensor.
void check_compatible(const net::ModelParams& loaded, const net::ModelConfig& requested);

}  // namespace epd::ckpt
