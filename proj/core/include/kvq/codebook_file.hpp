#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kvq/codebook.hpp"
#include "kvq/grid.hpp"

namespace kvq {

/// On-disk codebook ("KVQ1"), all integers little-endian:
///
///   offset  size  field
///        0     4  magic "KVQ1"
///        4     4  format version (1)
///        8     4  K
///       12     4  d
///       16     4  grid dimensionality (1 or 2)
///       20     8  grid width, grid height (height 1 for 1D)
///       28     4  metric tag (0 euclidean, 1 negative-dot)
///       32     4  reserved, 0
///       36  4K*d  prototypes as float32, index order, row-major
///
/// Weights are narrowed to float32 on save.
inline constexpr std::uint32_t kCodebookFormatVersion = 1;
inline constexpr std::size_t kCodebookHeaderBytes = 36;

struct CodebookFile {
  Codebook codebook;
  GridTopology grid;
};

std::vector<std::uint8_t> encode_codebook(const Codebook& codebook, const GridTopology& grid);
CodebookFile decode_codebook(std::span<const std::uint8_t> bytes);

void save_codebook(const Codebook& codebook, const GridTopology& grid,
                   const std::filesystem::path& path);
CodebookFile load_codebook(const std::filesystem::path& path);

/// Writes bytes to a sibling temporary file, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace kvq
