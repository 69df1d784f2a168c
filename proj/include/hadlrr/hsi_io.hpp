#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hadlrr/types.hpp"

namespace hadlrr {

enum class Interleave { BSQ, BIL, BIP };

/// ENVI "data type" codes understood by the reader and writer.
enum class EnviDataType : int {
  UInt8 = 1,
  Float32 = 4,
  Float64 = 5,
  UInt16 = 12,
};

std::string to_string(Interleave interleave);
Interleave parse_interleave(const std::string& text);

/// Hyperspectral raster. Samples are always held band-sequential:
/// value(band, row, col) lives at data[(band * rows + row) * cols + col].
class HsiCube {
 public:
  HsiCube() = default;
  /// Throws DataError if the data length, finiteness or wavelength
  /// invariants are violated.
  HsiCube(Index bands, Index rows, Index cols, std::vector<double> data,
          Interleave source_interleave = Interleave::BSQ,
          std::optional<std::vector<double>> wavelengths = std::nullopt);

  Index bands() const { return bands_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  ImageShape shape() const { return {rows_, cols_}; }
  Interleave source_interleave() const { return interleave_; }
  const std::vector<double>& data() const { return data_; }
  const std::optional<std::vector<double>>& wavelengths() const {
    return wavelengths_;
  }

  double operator()(Index band, Index row, Index col) const {
    return data_[static_cast<std::size_t>((band * rows_ + row) * cols_ + col)];
  }

  bool operator==(const HsiCube&) const = default;

 private:
  Index bands_ = 0;
  Index rows_ = 0;
  Index cols_ = 0;
  Interleave interleave_ = Interleave::BSQ;
  std::vector<double> data_;
  std::optional<std::vector<double>> wavelengths_;
};

/// Binary anomaly labels, row-major, 1 = anomaly.
struct GroundTruthMask {
  ImageShape shape;
  std::vector<std::uint8_t> labels;

  Index anomaly_count() const;
  /// Labels as a 0/1 real vector in pixel order.
  Vector as_vector() const;
};

DataMatrix cube_to_matrix(const HsiCube& cube);
HsiCube matrix_to_cube(const DataMatrix& x);

// ENVI header + raw binary (little-endian only).
HsiCube load_envi(const std::filesystem::path& header_path,
                  const std::filesystem::path& raw_path);
void save_envi(const HsiCube& cube, const std::filesystem::path& header_path,
               const std::filesystem::path& raw_path,
               Interleave interleave = Interleave::BSQ,
               EnviDataType type = EnviDataType::Float64);

/// Loads a mask from CSV (0/1, any nonzero counts as anomaly) or binary
/// PGM (P5, values 0/255). The format is chosen by extension.
GroundTruthMask load_mask(const std::filesystem::path& path, Index rows,
                          Index cols);
void save_mask_pgm(const GroundTruthMask& mask,
                   const std::filesystem::path& path);

/// Writes a rows x cols grid of values as CSV with round-trip precision.
void save_grid_csv(const Array& values, ImageShape shape,
                   const std::filesystem::path& path);
/// Reads a CSV grid (one raster row per line) into a row-major array.
std::pair<Array, ImageShape> load_grid_csv(const std::filesystem::path& path);
/// Writes values in [0,1] as an 8-bit PGM scaled to 0..255.
void save_grid_pgm(const Array& values, ImageShape shape,
                   const std::filesystem::path& path);

struct SyntheticSceneSpec {
  Index bands = 30;
  Index rows = 40;
  Index cols = 40;
  Index background_rank = 3;
  /// Number of anomalous pixel clusters.
  Index n_anomalies = 5;
  /// Fraction of pixels that are anomalous, spread over the clusters.
  double anomaly_fraction = 5.0 / 1600.0;
  double noise_sigma = 0.01;
  /// Norm of each anomaly signature relative to the mean background norm.
  double anomaly_strength = 0.5;
  std::uint64_t seed = 7;

  /// Throws std::invalid_argument for an infeasible spec.
  void validate() const;
  /// Number of anomalous pixels the spec asks for.
  Index anomalous_pixels() const;
};

struct SyntheticScene {
  HsiCube cube;
  GroundTruthMask mask;
  /// bands x rank basis of the planted background subspace (orthonormal).
  Matrix background_basis;
};

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec);

}  // namespace hadlrr
