#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace lieflow {

/// On-disk container: 8-byte magic, u32 format version, length-prefixed
/// UTF-8 JSON metadata, a tensor table (name, dtype tag, shape,
/// little-endian f64 payload in column-major order), and a trailing FNV-1a
/// checksum of everything before it. Loading verifies the checksum before
/// touching any payload, so a truncated or corrupted file never yields
/// partial state.
struct CheckpointData {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;  // insertion order
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const CheckpointData& data);

/// Throws ChecksumError on corruption/truncation and VersionMismatch on a
/// foreign format version.
CheckpointData load_checkpoint(const std::string& path);

}  // namespace lieflow
