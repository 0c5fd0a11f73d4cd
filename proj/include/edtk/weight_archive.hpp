#pragma once

// Binary weight archive, all integers little-endian:
//
//   "EDTK"  u16 version (=1)  u32 entry_count
//   entry_count x { u16 path_len, path bytes, u8 fused, u8 rank, rank x u32 dims,
//                   numel x f32 (channel-major) }
//   u32 CRC-32 (zlib polynomial) of every preceding byte

#include <cstdint>
#include <string>
#include <vector>

#include "edtk/network.hpp"

namespace edtk {

struct ArchiveEntry {
  std::string path;
  bool fused = false;
  Tensor tensor;
};

inline constexpr std::uint16_t kArchiveVersion = 1;

std::vector<std::uint8_t> encode_archive(const std::vector<ArchiveEntry>& entries);
/// Throws ArchiveError on bad magic, version, truncation or CRC mismatch.
std::vector<ArchiveEntry> decode_archive(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> save_weights(const Network& net);

/// Strict load: the archive must hold exactly the network's paths with the same
/// shapes and form. Throws ArchiveError naming the offending path. The network
/// is only modified when every check passes.
void load_weights(Network& net, const std::vector<std::uint8_t>& bytes);

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace edtk
