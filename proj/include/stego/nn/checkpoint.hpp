#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stego::nn {

// Versioned binary checkpoint:
//
//   "STEGCKPT" | u32 version | u32 section_count
//   per section: u32 name_len, name | u64 meta_len, meta (JSON text)
//                | u64 param_count, f64[param_count] (little endian)
//                | sha256(name | meta | params)
//   sha256 over every preceding byte
//
// Loading fails on a wrong magic, an unknown version, or any hash mismatch.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointSection {
    std::string name;
    nlohmann::json meta;
    std::vector<double> params;
};

struct Checkpoint {
    std::vector<CheckpointSection> sections;

    bool has(const std::string& name) const;
    const CheckpointSection& section(const std::string& name) const;
    void put(CheckpointSection s);
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

/// Lowercase hex SHA-256 of the raw parameter bytes.
std::string params_hash(std::span<const double> params);

}  // namespace stego::nn
