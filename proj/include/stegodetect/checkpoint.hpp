#pragma once

#include <string>

#include "stegodetect/network.hpp"
#include "stegodetect/vocab.hpp"

namespace stegodetect {

// Versioned model snapshot. On-disk layout (all integers little-endian):
//   8-byte magic "TSRNNCK1" (the trailing digit is the format version),
//   u32 metadata length + UTF-8 JSON metadata {config, vocab},
//   per-tensor records in canonical order:
//     u32 name length + name bytes, u32 ndims, u32 per dim, f32 payload,
//   u32 CRC-32 over every preceding byte.
// Payloads are always 32-bit floats regardless of the run precision.
struct Checkpoint {
    ModelConfig config;
    Vocabulary vocab;
    ModelParams<float> params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Validates the checksum and the whole structure before exposing any
// tensor; a corrupt or truncated file never yields a partial model.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stegodetect
