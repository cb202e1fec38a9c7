#include "kvq/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvq/codebook_file.hpp"
#include "kvq/error.hpp"

namespace kvq {

std::vector<std::uint8_t> render_codebook_grid(const Matrix& decoded, const GridTopology& grid,
                                               std::size_t patch_size,
                                               Normalization normalization) {
  const std::size_t p = patch_size;
  if (p == 0) throw ShapeError("patch size must be positive");
  if (decoded.rows() != grid.size()) {
    throw ShapeError("expected " + std::to_string(grid.size()) + " decoded tiles for a " +
                     std::to_string(grid.width()) + "x" + std::to_string(grid.height()) +
                     " grid, got " + std::to_string(decoded.rows()));
  }
  if (decoded.cols() != patch_dim(p)) {
    throw ShapeError("decoded tiles have " + std::to_string(decoded.cols()) + " values, expected " +
                     std::to_string(patch_dim(p)) + " for " + std::to_string(p) + "x" +
                     std::to_string(p) + " RGB");
  }
  const std::size_t width = grid.width() * (p + 1) + 1;
  const std::size_t height = grid.height() * (p + 1) + 1;
  const std::string header =
      "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";

  std::vector<std::uint8_t> image(width * height * 3, 0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const LatticePoint at = grid.coords(k);
    const std::size_t tile_row = grid.height() - 1 - static_cast<std::size_t>(at.y);
    const std::size_t x0 = 1 + static_cast<std::size_t>(at.x) * (p + 1);
    const std::size_t y0 = 1 + tile_row * (p + 1);
    const auto patch = decoded.row(k);
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < p; ++c) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double v = std::round(denormalize_pixel(patch[(r * p + c) * 3 + ch], normalization));
          const double clipped = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 255.0);
          image[((y0 + r) * width + (x0 + c)) * 3 + ch] = static_cast<std::uint8_t>(clipped);
        }
      }
    }
  }
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.begin(), image.end());
  return out;
}

void write_codebook_grid(const Matrix& decoded, const GridTopology& grid, std::size_t patch_size,
                         Normalization normalization, const std::filesystem::path& path) {
  write_file_atomic(path, render_codebook_grid(decoded, grid, patch_size, normalization));
}

}  // namespace kvq
