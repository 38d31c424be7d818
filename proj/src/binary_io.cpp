#include "genbench/binary_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "genbench/error.hpp"

namespace genbench {

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

void write_f64(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::vector<std::uint64_t> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    raw[i] = to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<double> read_f64(const std::filesystem::path& path, std::size_t expected_count) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot stat " + path.string() + ": " + ec.message());
  if (size != expected_count * sizeof(double))
    throw Error(ErrorKind::Io, "length mismatch in " + path.string() + ": expected " +
                                   std::to_string(expected_count * sizeof(double)) +
                                   " bytes, found " + std::to_string(size));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::vector<std::uint64_t> raw(expected_count);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (!in) throw Error(ErrorKind::Io, "short read from " + path.string());
  std::vector<double> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i)
    values[i] = std::bit_cast<double>(to_little_endian(raw[i]));
  return values;
}

void write_matrix(const std::filesystem::path& dir, const std::string& stem,
                  const Eigen::MatrixXd& m, const std::string& role) {
  RowMatrix rm = m;
  write_f64(dir / (stem + ".bin"), std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
  KeyValue kv;
  kv.set("schema_version", 1);
  kv.set("role", role);
  kv.set("rows", static_cast<std::int64_t>(m.rows()));
  kv.set("cols", static_cast<std::int64_t>(m.cols()));
  kv.set("layout", "row-major f64le");
  kv.write(dir / (stem + ".manifest"));
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& dir, const std::string& stem,
                            std::string* role) {
  const KeyValue kv = KeyValue::read(dir / (stem + ".manifest"));
  const auto rows = kv.get_int("rows");
  const auto cols = kv.get_int("cols");
  if (rows < 0 || cols < 0) throw Error(ErrorKind::Io, "negative matrix shape in " + stem);
  auto values = read_f64(dir / (stem + ".bin"), static_cast<std::size_t>(rows * cols));
  if (role) *role = kv.get("role");
  RowMatrix rm = Eigen::Map<RowMatrix>(values.data(), rows, cols);
  return rm;
}

void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec))
      throw Error(ErrorKind::Io, dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir, ec)) {
      if (!force)
        throw Error(ErrorKind::Io,
                    dir.string() + " already exists and is not empty (use --force to overwrite)");
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path(), ec);
    }
  }
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace genbench
