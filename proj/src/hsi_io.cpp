#include "hadlrr/hsi_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "hadlrr/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw raster I/O assumes a little-endian host");

namespace hadlrr {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::size_t sample_size(EnviDataType type) {
  switch (type) {
    case EnviDataType::UInt8: return 1;
    case EnviDataType::UInt16: return 2;
    case EnviDataType::Float32: return 4;
    case EnviDataType::Float64: return 8;
  }
  return 0;
}

// Offset of (band, row, col) within a raw file of the given interleave.
std::size_t raw_offset(Interleave il, Index bands, Index rows, Index cols,
                       Index b, Index r, Index c) {
  switch (il) {
    case Interleave::BSQ: return static_cast<std::size_t>((b * rows + r) * cols + c);
    case Interleave::BIL: return static_cast<std::size_t>((r * bands + b) * cols + c);
    case Interleave::BIP: return static_cast<std::size_t>((r * cols + c) * bands + b);
  }
  return 0;
}

std::map<std::string, std::string> parse_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open header '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  std::map<std::string, std::string> fields;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    if (first) {
      first = false;
      if (line != "ENVI") throw DataError("header: missing 'ENVI' magic line");
      continue;
    }
    if (line.empty() || line[0] == ';') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    // Brace-delimited values may span several lines.
    if (!value.empty() && value.front() == '{' &&
        value.find('}') == std::string::npos) {
      auto close = text.find('}', pos);
      if (close == std::string::npos)
        throw DataError("header: unterminated '{' in field '" + key + "'");
      value += " " + text.substr(pos, close - pos + 1);
      eol = text.find('\n', close);
      pos = eol == std::string::npos ? text.size() : eol + 1;
    }
    if (fields.contains(key) && fields[key] != value)
      throw DataError("header: contradictory values for field '" + key + "'");
    fields[key] = value;
  }
  return fields;
}

long long header_int(const std::map<std::string, std::string>& fields,
                     const std::string& key, std::optional<long long> fallback) {
  auto it = fields.find(key);
  if (it == fields.end()) {
    if (fallback) return *fallback;
    throw DataError("header: missing field '" + key + "'");
  }
  long long v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0)
    throw DataError("header: field '" + key + "' is not a nonnegative integer: '" +
                    s + "'");
  return v;
}

std::vector<double> parse_brace_list(const std::string& value) {
  std::string inner = value;
  inner.erase(std::remove(inner.begin(), inner.end(), '{'), inner.end());
  inner.erase(std::remove(inner.begin(), inner.end(), '}'), inner.end());
  std::replace(inner.begin(), inner.end(), ',', ' ');
  std::istringstream is(inner);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  return out;
}

template <typename T>
double read_sample(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

void write_sample(std::ostream& out, double v, EnviDataType type) {
  switch (type) {
    case EnviDataType::UInt8: {
      auto x = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      out.write(reinterpret_cast<const char*>(&x), 1);
      break;
    }
    case EnviDataType::UInt16: {
      auto x = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
      out.write(reinterpret_cast<const char*>(&x), 2);
      break;
    }
    case EnviDataType::Float32: {
      auto x = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&x), 4);
      break;
    }
    case EnviDataType::Float64:
      out.write(reinterpret_cast<const char*>(&v), 8);
      break;
  }
}

bool has_extension(const fs::path& p, std::string_view ext) {
  return lower(p.extension().string()) == ext;
}

}  // namespace

std::string to_string(Interleave interleave) {
  switch (interleave) {
    case Interleave::BSQ: return "bsq";
    case Interleave::BIL: return "bil";
    case Interleave::BIP: return "bip";
  }
  return "bsq";
}

Interleave parse_interleave(const std::string& text) {
  auto t = lower(trim(text));
  if (t == "bsq") return Interleave::BSQ;
  if (t == "bil") return Interleave::BIL;
  if (t == "bip") return Interleave::BIP;
  throw DataError("unsupported interleave '" + text + "'");
}

HsiCube::HsiCube(Index bands, Index rows, Index cols, std::vector<double> data,
                 Interleave source_interleave,
                 std::optional<std::vector<double>> wavelengths)
    : bands_(bands),
      rows_(rows),
      cols_(cols),
      interleave_(source_interleave),
      data_(std::move(data)),
      wavelengths_(std::move(wavelengths)) {
  if (bands <= 0 || rows <= 0 || cols <= 0)
    throw DataError("cube dimensions must be positive");
  if (static_cast<Index>(data_.size()) != bands * rows * cols)
    throw DataError("cube data length " + std::to_string(data_.size()) +
                    " != bands*rows*cols = " + std::to_string(bands * rows * cols));
  if (!std::all_of(data_.begin(), data_.end(),
                   [](double v) { return std::isfinite(v); }))
    throw DataError("cube contains non-finite values");
  if (wavelengths_) {
    const auto& w = *wavelengths_;
    if (static_cast<Index>(w.size()) != bands)
      throw DataError("wavelength count does not match band count");
    if (std::adjacent_find(w.begin(), w.end(), std::greater_equal<>()) != w.end())
      throw DataError("wavelengths must be strictly increasing");
  }
}

Index GroundTruthMask::anomaly_count() const {
  return std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; });
}

Vector GroundTruthMask::as_vector() const {
  Vector v(static_cast<Index>(labels.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return v;
}

DataMatrix cube_to_matrix(const HsiCube& cube) {
  // BSQ storage is exactly a row-major bands x pixels matrix.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> view(cube.data().data(), cube.bands(),
                                  cube.rows() * cube.cols());
  return {Matrix(view), cube.shape()};
}

HsiCube matrix_to_cube(const DataMatrix& x) {
  if (x.shape.pixels() != x.values.cols())
    throw DataError("matrix pixel count does not match its image shape");
  std::vector<double> data(static_cast<std::size_t>(x.values.size()));
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<RowMajor>(data.data(), x.values.rows(), x.values.cols()) = x.values;
  return HsiCube(x.values.rows(), x.shape.rows, x.shape.cols, std::move(data));
}

HsiCube load_envi(const fs::path& header_path, const fs::path& raw_path) {
  auto fields = parse_header(header_path);
  const Index cols = header_int(fields, "samples", std::nullopt);
  const Index rows = header_int(fields, "lines", std::nullopt);
  const Index bands = header_int(fields, "bands", std::nullopt);
  const auto offset = static_cast<std::size_t>(header_int(fields, "header offset", 0));
  if (!fields.contains("interleave")) throw DataError("header: missing field 'interleave'");
  Interleave il;
  try {
    il = parse_interleave(fields["interleave"]);
  } catch (const DataError&) {
    throw DataError("header: unsupported value for field 'interleave': '" +
                    fields["interleave"] + "'");
  }
  const auto code = header_int(fields, "data type", std::nullopt);
  if (code != 1 && code != 4 && code != 5 && code != 12)
    throw DataError("header: unsupported value for field 'data type': " +
                    std::to_string(code));
  const auto type = static_cast<EnviDataType>(code);
  if (header_int(fields, "byte order", 0) != 0)
    throw DataError("header: unsupported value for field 'byte order' (big-endian)");
  if (bands == 0 || rows == 0 || cols == 0)
    throw DataError("header: fields 'samples', 'lines' and 'bands' must be positive");

  std::optional<std::vector<double>> wavelengths;
  if (auto it = fields.find("wavelength"); it != fields.end()) {
    wavelengths = parse_brace_list(it->second);
    if (static_cast<Index>(wavelengths->size()) != bands)
      throw DataError("header: field 'wavelength' has " +
                      std::to_string(wavelengths->size()) + " entries, expected " +
                      std::to_string(bands));
  }

  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw DataError("cannot open raster '" + raw_path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::size_t elem = sample_size(type);
  const std::size_t n = static_cast<std::size_t>(bands * rows * cols);
  if (bytes.size() != offset + n * elem)
    throw DataError("raster size mismatch: file has " + std::to_string(bytes.size()) +
                    " bytes, header (samples*lines*bands*size + header offset) implies " +
                    std::to_string(offset + n * elem));

  std::vector<double> data(n);
  for (Index b = 0; b < bands; ++b)
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        const char* p = bytes.data() + offset + elem * raw_offset(il, bands, rows, cols, b, r, c);
        double v = 0;
        switch (type) {
          case EnviDataType::UInt8: v = read_sample<std::uint8_t>(p); break;
          case EnviDataType::UInt16: v = read_sample<std::uint16_t>(p); break;
          case EnviDataType::Float32: v = read_sample<float>(p); break;
          case EnviDataType::Float64: v = read_sample<double>(p); break;
        }
        data[static_cast<std::size_t>((b * rows + r) * cols + c)] = v;
      }
  return HsiCube(bands, rows, cols, std::move(data), il, std::move(wavelengths));
}

void save_envi(const HsiCube& cube, const fs::path& header_path,
               const fs::path& raw_path, Interleave interleave, EnviDataType type) {
  std::ofstream hdr(header_path);
  if (!hdr) throw DataError("cannot write header '" + header_path.string() + "'");
  hdr << "ENVI\n"
      << "samples = " << cube.cols() << "\n"
      << "lines = " << cube.rows() << "\n"
      << "bands = " << cube.bands() << "\n"
      << "header offset = 0\n"
      << "data type = " << static_cast<int>(type) << "\n"
      << "interleave = " << to_string(interleave) << "\n"
      << "byte order = 0\n";
  if (const auto& w = cube.wavelengths()) {
    hdr << "wavelength = {" << std::setprecision(17);
    for (std::size_t i = 0; i < w->size(); ++i) hdr << (i ? ", " : "") << (*w)[i];
    hdr << "}\n";
  }
  if (!hdr) throw DataError("failed writing header '" + header_path.string() + "'");

  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) throw DataError("cannot write raster '" + raw_path.string() + "'");
  const Index B = cube.bands(), R = cube.rows(), C = cube.cols();
  // Emit samples in file order for the requested interleave.
  auto emit = [&](Index b, Index r, Index c) { write_sample(raw, cube(b, r, c), type); };
  switch (interleave) {
    case Interleave::BSQ:
      for (Index b = 0; b < B; ++b)
        for (Index r = 0; r < R; ++r)
          for (Index c = 0; c < C; ++c) emit(b, r, c);
      break;
    case Interleave::BIL:
      for (Index r = 0; r < R; ++r)
        for (Index b = 0; b < B; ++b)
          for (Index c = 0; c < C; ++c) emit(b, r, c);
      break;
    case Interleave::BIP:
      for (Index r = 0; r < R; ++r)
        for (Index c = 0; c < C; ++c)
          for (Index b = 0; b < B; ++b) emit(b, r, c);
      break;
  }
  if (!raw) throw DataError("failed writing raster '" + raw_path.string() + "'");
}

GroundTruthMask load_mask(const fs::path& path, Index rows, Index cols) {
  GroundTruthMask mask{{rows, cols}, {}};
  if (has_extension(path, ".pgm")) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mask '" + path.string() + "'");
    std::string magic;
    Index w = 0, h = 0;
    int maxval = 0;
    auto next_token = [&](auto& v) {
      in >> std::ws;
      while (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        in >> std::ws;
      }
      in >> v;
    };
    next_token(magic);
    if (magic != "P5") throw DataError("mask: only binary PGM (P5) is supported");
    next_token(w);
    next_token(h);
    next_token(maxval);
    if (!in || maxval != 255) throw DataError("mask: malformed PGM header");
    in.get();
    if (w != cols || h != rows)
      throw DataError("mask: dimension mismatch, file is " + std::to_string(h) + "x" +
                      std::to_string(w) + ", expected " + std::to_string(rows) + "x" +
                      std::to_string(cols));
    std::vector<unsigned char> px(static_cast<std::size_t>(rows * cols));
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (in.gcount() != static_cast<std::streamsize>(px.size()))
      throw DataError("mask: truncated PGM pixel data");
    mask.labels.reserve(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
      if (px[i] != 0 && px[i] != 255)
        throw DataError("mask: non-binary PGM value " + std::to_string(px[i]) +
                        " at pixel " + std::to_string(i));
      mask.labels.push_back(px[i] ? 1 : 0);
    }
    return mask;
  }

  auto [grid, shape] = load_grid_csv(path);
  if (shape.rows != rows || shape.cols != cols)
    throw DataError("mask: dimension mismatch, file is " + std::to_string(shape.rows) +
                    "x" + std::to_string(shape.cols) + ", expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  mask.labels.reserve(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) mask.labels.push_back(grid[i] != 0.0 ? 1 : 0);
  return mask;
}

void save_mask_pgm(const GroundTruthMask& mask, const fs::path& path) {
  Array v(static_cast<Index>(mask.labels.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = mask.labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  save_grid_pgm(v, mask.shape, path);
}

void save_grid_csv(const Array& values, ImageShape shape, const fs::path& path) {
  if (values.size() != shape.pixels())
    throw DataError("grid size does not match its shape");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (Index r = 0; r < shape.rows; ++r) {
    for (Index c = 0; c < shape.cols; ++c)
      out << (c ? "," : "") << values[r * shape.cols + c];
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::pair<Array, ImageShape> load_grid_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<double> values;
  Index rows = 0, cols = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    Index n = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      auto t = trim(cell);
      double v = 0;
      auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || p != t.data() + t.size())
        throw DataError("'" + path.string() + "': bad number '" + t + "' on line " +
                        std::to_string(rows + 1));
      values.push_back(v);
      ++n;
    }
    if (cols >= 0 && n != cols)
      throw DataError("'" + path.string() + "': ragged row " + std::to_string(rows + 1));
    cols = n;
    ++rows;
  }
  if (rows == 0) throw DataError("'" + path.string() + "' is empty");
  return {Eigen::Map<Array>(values.data(), static_cast<Index>(values.size())),
          {rows, cols}};
}

void save_grid_pgm(const Array& values, ImageShape shape, const fs::path& path) {
  if (values.size() != shape.pixels())
    throw DataError("grid size does not match its shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "P5\n" << shape.cols << " " << shape.rows << "\n255\n";
  for (Index i = 0; i < values.size(); ++i) {
    auto px = static_cast<unsigned char>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
    out.put(static_cast<char>(px));
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace hadlrr
