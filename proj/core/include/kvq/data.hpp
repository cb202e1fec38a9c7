#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "kvq/matrix.hpp"

namespace kvq {

enum class DataKind { gaussian_mixture, uniform_square, cifar10_binary, raw_vectors };

std::string_view to_string(DataKind kind);
DataKind parse_data_kind(std::string_view text);

enum class Normalization { none, affine };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view text);

/// Pixel byte -> real. affine maps 0 -> -0.5 and 255 -> +0.5.
double normalize_pixel(std::uint8_t value, Normalization n);
/// Inverse of normalize_pixel, before rounding and clipping.
double denormalize_pixel(double value, Normalization n);

// --- CIFAR-10 binary format ------------------------------------------------

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarChannels = 3;
inline constexpr std::size_t kCifarPixels = kCifarChannels * kCifarSide * kCifarSide;  // 3072
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarPixels;                     // 3073

/// One record: label byte, then 3 channel planes of 32x32 (R, G, B), row-major.
struct CifarRecord {
  std::uint8_t label = 0;
  std::array<std::uint8_t, kCifarPixels> pixels{};

  std::uint8_t at(std::size_t channel, std::size_t row, std::size_t col) const {
    return pixels[channel * kCifarSide * kCifarSide + row * kCifarSide + col];
  }
  bool operator==(const CifarRecord&) const = default;
};

/// Reads every record; throws FormatError naming the byte offset of a
/// truncated trailing record.
std::vector<CifarRecord> read_cifar10_file(const std::filesystem::path& path);
void write_cifar10_file(const std::filesystem::path& path, const std::vector<CifarRecord>& records);

/// Smooth random colour fields (background gradient plus soft blobs), for
/// running the image pipeline without the real dataset.
std::vector<CifarRecord> synthetic_cifar10_records(std::size_t count, std::uint64_t seed);

struct PatchOptions {
  std::size_t patch_size = 4;
  std::size_t stride = 4;
  Normalization normalize = Normalization::affine;
};

/// Patch vector length: 3 * P * P.
inline std::size_t patch_dim(std::size_t patch_size) {
  return kCifarChannels * patch_size * patch_size;
}

/// Cuts every record into P x P patches at the given stride. Each patch is
/// flattened pixel-interleaved (row, column, channel), so contiguous chunks
/// hold whole pixels. Labels are dropped.
Matrix extract_patches(const std::vector<CifarRecord>& records, const PatchOptions& options);

/// Reads a CIFAR-10 file, or the split's files from a dataset directory
/// ("train": data_batch_1..5.bin, "test": test_batch.bin), into patches.
Matrix load_cifar10(const std::filesystem::path& path, std::string_view split,
                    const PatchOptions& options);

// --- Seeded sources ----------------------------------------------------------

/// Deterministic batch generator: (seed, stream, index) fixes the contents.
///
/// Synthetic sources draw fresh i.i.d. samples, so the validation stream is
/// held out by construction. Pool sources (CIFAR patches, raw vectors)
/// sample rows with replacement; the last `holdout` rows of the pool are
/// reserved for the validation stream.
class DataSource {
 public:
  static constexpr std::uint64_t kTrainStream = 1;
  static constexpr std::uint64_t kValidationStream = 2;

  /// Unit-variance components centred on a lattice with spacing `separation`.
  static DataSource gaussian_mixture(std::size_t components, std::size_t dim, double separation,
                                     std::uint64_t seed, std::size_t batch_size);
  /// Uniform on [0, 1]^dim.
  static DataSource uniform_square(std::size_t dim, std::uint64_t seed, std::size_t batch_size);
  static DataSource raw_vectors(Matrix pool, std::uint64_t seed, std::size_t batch_size,
                                std::size_t holdout = 0);

  DataKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t batch_size() const noexcept { return batch_size_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// Mixture component means (gaussian-mixture only).
  const Matrix& means() const noexcept { return means_; }
  const Matrix& pool() const noexcept { return pool_; }

  /// Training batch number `index`.
  Matrix batch(std::uint64_t index) const { return sample(kTrainStream, index, batch_size_); }
  /// Held-out sample of n vectors.
  Matrix validation(std::size_t n) const { return sample(kValidationStream, 0, n); }
  Matrix sample(std::uint64_t stream, std::uint64_t index, std::size_t n) const;

  /// Marks pool-backed sources as CIFAR-derived (affects kind() only).
  void set_kind(DataKind kind) noexcept { kind_ = kind; }

 private:
  DataSource() = default;

  DataKind kind_ = DataKind::raw_vectors;
  std::size_t dim_ = 0;
  std::size_t batch_size_ = 0;
  std::uint64_t seed_ = 0;
  Matrix means_;
  Matrix pool_;
  std::size_t holdout_ = 0;
};

}  // namespace kvq
