#include "kvq/codebook_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "kvq/error.hpp"

namespace kvq {

namespace {

constexpr std::uint8_t kMagic[4] = {'K', 'V', 'Q', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_codebook(const Codebook& codebook, const GridTopology& grid) {
  if (grid.size() != codebook.size()) {
    throw ShapeError("grid has " + std::to_string(grid.size()) + " nodes but codebook has " +
                     std::to_string(codebook.size()) + " prototypes");
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kCodebookHeaderBytes + 4 * codebook.weights().size());
  put_u32(out, kCodebookFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(codebook.size()));
  put_u32(out, static_cast<std::uint32_t>(codebook.dim()));
  put_u32(out, static_cast<std::uint32_t>(grid.dimensionality()));
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(codebook.metric()));
  put_u32(out, 0);
  for (double v : codebook.weights().values()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

CodebookFile decode_codebook(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCodebookHeaderBytes) {
    throw FormatError("codebook file too short for header: expected at least " +
                      std::to_string(kCodebookHeaderBytes) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad codebook magic (expected KVQ1)");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCodebookFormatVersion) {
    throw FormatError("unsupported codebook format version " + std::to_string(version));
  }
  const std::uint32_t k = get_u32(bytes, 8);
  const std::uint32_t d = get_u32(bytes, 12);
  const std::uint32_t dims = get_u32(bytes, 16);
  const std::uint32_t width = get_u32(bytes, 20);
  const std::uint32_t height = get_u32(bytes, 24);
  const std::uint32_t metric = get_u32(bytes, 28);
  const std::uint32_t reserved = get_u32(bytes, 32);
  if (reserved != 0) throw FormatError("reserved codebook header field is nonzero");
  if (metric > 1) throw FormatError("unknown metric tag " + std::to_string(metric));
  if (k == 0 || d == 0) throw FormatError("codebook header declares an empty codebook");

  const std::size_t expected = kCodebookHeaderBytes + 4ull * k * d;
  if (bytes.size() != expected) {
    throw FormatError("codebook size mismatch: header implies " + std::to_string(expected) +
                      " bytes, file has " + std::to_string(bytes.size()));
  }

  GridTopology grid = [&] {
    if (dims == 1) {
      if (height != 1 || width != k) throw FormatError("1D grid extents do not match K");
      return GridTopology::line(width);
    }
    if (dims == 2) {
      if (static_cast<std::uint64_t>(width) * height != k) {
        throw FormatError("2D grid extents do not multiply to K");
      }
      return GridTopology::rect(width, height);
    }
    throw FormatError("unsupported grid dimensionality " + std::to_string(dims));
  }();

  Matrix w(k, d);
  std::size_t offset = kCodebookHeaderBytes;
  for (double& v : w.values()) {
    v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, offset)));
    offset += 4;
  }
  return CodebookFile{Codebook(std::move(w), static_cast<Metric>(metric)), grid};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_codebook(const Codebook& codebook, const GridTopology& grid,
                   const std::filesystem::path& path) {
  write_file_atomic(path, encode_codebook(codebook, grid));
}

CodebookFile load_codebook(const std::filesystem::path& path) {
  return decode_codebook(read_file(path));
}

}  // namespace kvq
