#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kvq/data.hpp"
#include "kvq/grid.hpp"
#include "kvq/matrix.hpp"

namespace kvq {

/// Binary PPM (P6) of decoded patches laid out on the codebook grid.
///
/// decoded has one row per codebook index holding a P x P RGB patch in
/// (row, column, channel) order. Tiles are separated by 1-pixel black
/// borders, giving a (W*(P+1)+1) x (H*(P+1)+1) image. Grid row y = 0 is the
/// bottom tile row, matching the bottom-left lattice origin. Values are
/// de-normalised, rounded half away from zero and clipped to [0, 255].
std::vector<std::uint8_t> render_codebook_grid(const Matrix& decoded, const GridTopology& grid,
                                               std::size_t patch_size, Normalization normalization);

void write_codebook_grid(const Matrix& decoded, const GridTopology& grid, std::size_t patch_size,
                         Normalization normalization, const std::filesystem::path& path);

}  // namespace kvq
