#include "kvq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "kvq/error.hpp"
#include "kvq/rng.hpp"

namespace kvq {

std::string_view to_string(DataKind kind) {
  switch (kind) {
    case DataKind::gaussian_mixture:
      return "gaussian-mixture";
    case DataKind::uniform_square:
      return "uniform-square";
    case DataKind::cifar10_binary:
      return "cifar10-binary";
    case DataKind::raw_vectors:
      return "raw-vectors";
  }
  return "?";
}

DataKind parse_data_kind(std::string_view text) {
  if (text == "gaussian-mixture") return DataKind::gaussian_mixture;
  if (text == "uniform-square") return DataKind::uniform_square;
  if (text == "cifar10-binary") return DataKind::cifar10_binary;
  if (text == "raw-vectors") return DataKind::raw_vectors;
  throw ConfigError("unknown data source '" + std::string(text) + "'");
}

std::string_view to_string(Normalization n) { return n == Normalization::none ? "none" : "affine"; }

Normalization parse_normalization(std::string_view text) {
  if (text == "none") return Normalization::none;
  if (text == "affine") return Normalization::affine;
  throw ConfigError("unknown normalization '" + std::string(text) + "' (expected none|affine)");
}

double normalize_pixel(std::uint8_t value, Normalization n) {
  const double v = static_cast<double>(value);
  return n == Normalization::affine ? v / 255.0 - 0.5 : v;
}

double denormalize_pixel(double value, Normalization n) {
  return n == Normalization::affine ? (value + 0.5) * 255.0 : value;
}

std::vector<CifarRecord> read_cifar10_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open CIFAR-10 file " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  const std::size_t whole = bytes.size() / kCifarRecordBytes;
  const std::size_t rest = bytes.size() % kCifarRecordBytes;
  if (rest != 0) {
    throw FormatError("truncated CIFAR-10 record at byte offset " +
                      std::to_string(whole * kCifarRecordBytes) + " in " + path.string() +
                      ": expected " + std::to_string(kCifarRecordBytes) + " bytes, found " +
                      std::to_string(rest));
  }
  std::vector<CifarRecord> records(whole);
  for (std::size_t r = 0; r < whole; ++r) {
    const char* src = bytes.data() + r * kCifarRecordBytes;
    records[r].label = static_cast<std::uint8_t>(src[0]);
    std::copy(src + 1, src + kCifarRecordBytes,
              reinterpret_cast<char*>(records[r].pixels.data()));
  }
  return records;
}

void write_cifar10_file(const std::filesystem::path& path,
                        const std::vector<CifarRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write CIFAR-10 file " + path.string());
  for (const CifarRecord& r : records) {
    out.put(static_cast<char>(r.label));
    out.write(reinterpret_cast<const char*>(r.pixels.data()),
              static_cast<std::streamsize>(r.pixels.size()));
  }
  if (!out) throw FormatError("short write to " + path.string());
}

std::vector<CifarRecord> synthetic_cifar10_records(std::size_t count, std::uint64_t seed) {
  Rng rng(seed, 0x63696661);  // "cifa"
  std::vector<CifarRecord> records(count);
  constexpr double side = static_cast<double>(kCifarSide);
  for (CifarRecord& rec : records) {
    rec.label = static_cast<std::uint8_t>(rng.below(10));
    std::array<double, 3> base{};
    std::array<double, 3> tilt{};
    for (std::size_t c = 0; c < 3; ++c) {
      base[c] = 255.0 * rng.uniform();
      tilt[c] = 120.0 * (rng.uniform() - 0.5);
    }
    const double angle = 2.0 * 3.141592653589793 * rng.uniform();
    const double gx = std::cos(angle);
    const double gy = std::sin(angle);

    struct Blob {
      double cx, cy, radius;
      std::array<double, 3> colour;
    };
    std::vector<Blob> blobs(1 + rng.below(3));
    for (Blob& b : blobs) {
      b.cx = side * rng.uniform();
      b.cy = side * rng.uniform();
      b.radius = 3.0 + 7.0 * rng.uniform();
      for (double& c : b.colour) c = 255.0 * rng.uniform();
    }

    for (std::size_t row = 0; row < kCifarSide; ++row) {
      for (std::size_t col = 0; col < kCifarSide; ++col) {
        const double u = (static_cast<double>(col) - side / 2) / side;
        const double v = (static_cast<double>(row) - side / 2) / side;
        std::array<double, 3> px{};
        for (std::size_t c = 0; c < 3; ++c) px[c] = base[c] + tilt[c] * (gx * u + gy * v);
        for (const Blob& b : blobs) {
          const double dx = static_cast<double>(col) - b.cx;
          const double dy = static_cast<double>(row) - b.cy;
          const double weight = std::exp(-(dx * dx + dy * dy) / (b.radius * b.radius));
          for (std::size_t c = 0; c < 3; ++c) px[c] += weight * (b.colour[c] - px[c]);
        }
        for (std::size_t c = 0; c < 3; ++c) {
          const double clipped = std::clamp(std::round(px[c]), 0.0, 255.0);
          rec.pixels[c * kCifarSide * kCifarSide + row * kCifarSide + col] =
              static_cast<std::uint8_t>(clipped);
        }
      }
    }
  }
  return records;
}

Matrix extract_patches(const std::vector<CifarRecord>& records, const PatchOptions& options) {
  const std::size_t p = options.patch_size;
  const std::size_t s = options.stride;
  if (p == 0 || p > kCifarSide) throw ConfigError("patch size must lie in [1, 32]");
  if (s == 0) throw ConfigError("stride must be positive");
  const std::size_t per_axis = (kCifarSide - p) / s + 1;
  Matrix out(records.size() * per_axis * per_axis, patch_dim(p));
  std::size_t r = 0;
  for (const CifarRecord& rec : records) {
    for (std::size_t py = 0; py < per_axis; ++py) {
      for (std::size_t px = 0; px < per_axis; ++px) {
        auto dst = out.row(r++);
        std::size_t i = 0;
        for (std::size_t row = 0; row < p; ++row) {
          for (std::size_t col = 0; col < p; ++col) {
            for (std::size_t c = 0; c < kCifarChannels; ++c) {
              dst[i++] = normalize_pixel(rec.at(c, py * s + row, px * s + col), options.normalize);
            }
          }
        }
      }
    }
  }
  return out;
}

Matrix load_cifar10(const std::filesystem::path& path, std::string_view split,
                    const PatchOptions& options) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    if (split == "train") {
      for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
    } else if (split == "test") {
      files.push_back(path / "test_batch.bin");
    } else {
      throw ConfigError("unknown CIFAR-10 split '" + std::string(split) + "' (expected train|test)");
    }
  } else {
    files.push_back(path);
  }
  std::vector<CifarRecord> records;
  for (const auto& f : files) {
    auto part = read_cifar10_file(f);
    records.insert(records.end(), part.begin(), part.end());
  }
  if (records.empty()) throw FormatError("no CIFAR-10 records found under " + path.string());
  return extract_patches(records, options);
}

DataSource DataSource::gaussian_mixture(std::size_t components, std::size_t dim,
                                        double separation, std::uint64_t seed,
                                        std::size_t batch_size) {
  if (components == 0 || dim == 0) throw ConfigError("gaussian mixture needs M >= 1 and d >= 1");
  if (!(separation > 0.0)) throw ConfigError("gaussian mixture separation must be positive");
  DataSource src;
  src.kind_ = DataKind::gaussian_mixture;
  src.dim_ = dim;
  src.batch_size_ = batch_size;
  src.seed_ = seed;
  // Smallest lattice side m with m^dim >= M; the first M lattice points,
  // centred on the origin, are spaced `separation` apart.
  std::size_t side = 1;
  auto capacity = [&](std::size_t m) {
    std::size_t cap = 1;
    for (std::size_t i = 0; i < dim && cap < components; ++i) cap *= m;
    return cap;
  };
  while (capacity(side) < components) ++side;
  const double centre = 0.5 * static_cast<double>(side - 1);
  src.means_ = Matrix(components, dim);
  for (std::size_t c = 0; c < components; ++c) {
    std::size_t code = c;
    for (std::size_t a = 0; a < dim; ++a) {
      src.means_(c, a) = separation * (static_cast<double>(code % side) - centre);
      code /= side;
    }
  }
  return src;
}

DataSource DataSource::uniform_square(std::size_t dim, std::uint64_t seed, std::size_t batch_size) {
  if (dim == 0) throw ConfigError("uniform-square needs d >= 1");
  DataSource src;
  src.kind_ = DataKind::uniform_square;
  src.dim_ = dim;
  src.batch_size_ = batch_size;
  src.seed_ = seed;
  return src;
}

DataSource DataSource::raw_vectors(Matrix pool, std::uint64_t seed, std::size_t batch_size,
                                   std::size_t holdout) {
  if (pool.rows() == 0) throw ConfigError("raw-vector source needs at least one vector");
  if (holdout >= pool.rows()) throw ConfigError("holdout must leave training vectors");
  for (double v : pool.values()) {
    if (!std::isfinite(v)) throw InputError("non-finite value in raw vectors");
  }
  DataSource src;
  src.kind_ = DataKind::raw_vectors;
  src.dim_ = pool.cols();
  src.batch_size_ = batch_size;
  src.seed_ = seed;
  src.pool_ = std::move(pool);
  src.holdout_ = holdout;
  return src;
}

Matrix DataSource::sample(std::uint64_t stream, std::uint64_t index, std::size_t n) const {
  Rng rng(seed_, stream, index);
  Matrix out(n, dim_);
  switch (kind_) {
    case DataKind::gaussian_mixture:
      for (std::size_t i = 0; i < n; ++i) {
        const auto mean = means_.row(rng.below(means_.rows()));
        auto row = out.row(i);
        for (std::size_t c = 0; c < dim_; ++c) row[c] = mean[c] + rng.normal();
      }
      break;
    case DataKind::uniform_square:
      for (double& v : out.values()) v = rng.uniform();
      break;
    case DataKind::cifar10_binary:
    case DataKind::raw_vectors: {
      const std::size_t train = pool_.rows() - holdout_;
      const bool held = stream == kValidationStream && holdout_ > 0;
      const std::size_t lo = held ? train : 0;
      const std::size_t span = held ? holdout_ : train;
      for (std::size_t i = 0; i < n; ++i) {
        const auto src = pool_.row(lo + rng.below(span));
        std::copy(src.begin(), src.end(), out.row(i).begin());
      }
      break;
    }
  }
  return out;
}

}  // namespace kvq
