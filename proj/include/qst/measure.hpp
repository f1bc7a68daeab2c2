#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qst/fock.hpp"

namespace qst {

/// Ordered phase-space sample points. Square layouts are row-major with the
/// imaginary part as the outer (slow) index and endpoints included, so a
/// flattened data vector maps deterministically onto an image.
struct PhaseGrid {
  enum class Layout { Square, Scatter };

  Layout layout = Layout::Scatter;
  std::vector<cxd> points;
  int nx = 0;  // valid for Square
  int ny = 0;
  double lo = 0.0, hi = 0.0;

  int size() const { return static_cast<int>(points.size()); }

  std::string to_json() const;
  static PhaseGrid from_json(const std::string& text);
};

PhaseGrid make_square_grid(double lo = -5.0, double hi = 5.0, int nx = 32,
                           int ny = 32);

// k points uniform in the disk |beta| <= radius, by rejection sampling.
PhaseGrid sample_scatter(int k, double radius, std::uint64_t seed);

enum class MeasurementKind { HusimiProjector, GeneralizedQ, DisplacedParity };

/// One Hermitian operator per grid point. For the projector kinds the rank-1
/// columns are kept alongside the dense matrices; both routes are tested to
/// produce the same statistics.
struct MeasurementSet {
  MeasurementKind kind = MeasurementKind::HusimiProjector;
  int q_photon = 0;  // n for GeneralizedQ
  int cutoff = 0;
  double scale = 1.0;  // 1/pi for HusimiProjector, 1 otherwise
  PhaseGrid grid;
  std::vector<CMatrix> operators;
  // columns(i) = sqrt(scale) * displaced Fock column for projector kinds;
  // empty for DisplacedParity.
  CMatrix columns;

  int size() const { return grid.size(); }
  bool rank1() const { return columns.size() > 0; }

  // Statistics d_i = tr(O_i rho); uses the rank-1 fast path when available.
  std::vector<double> expect_all(const DensityMatrix& rho) const;

  std::string to_json() const;
  static MeasurementSet from_json(const std::string& text);
};

MeasurementSet build_operators(const PhaseGrid& grid, MeasurementKind kind,
                               int cutoff, int q_photon = 0);

/// Observed or generated statistics aligned with a grid.
struct DataVector {
  enum class Normalization { Raw, UnitMax };

  std::vector<double> values;
  Normalization normalization = Normalization::Raw;
  double max_value = 0.0;  // recorded by normalize_unit_max

  int size() const { return static_cast<int>(values.size()); }
};

// Q_n^beta = tr(|n><n| D(-beta) rho D^H(-beta)) for every grid point.
DataVector generalized_q(const DensityMatrix& rho, const PhaseGrid& grid,
                         int n);

// Q(beta) = (1/pi) Q_0^beta
DataVector husimi(const DensityMatrix& rho, const PhaseGrid& grid);

// W(beta) = (2/pi) tr(rho D(beta) P D^H(beta)) evaluated at a padded cutoff
// to suppress the large-displacement truncation artefact.
DataVector wigner(const DensityMatrix& rho, const PhaseGrid& grid,
                  int pad_factor = 2);

DataVector normalize_unit_max(const DataVector& data);
DataVector denormalize(const DataVector& data);

// CSV with header re,im,value; round-trips doubles exactly.
void write_csv(const std::string& path, const PhaseGrid& grid,
               const DataVector& data);
struct GridData {
  PhaseGrid grid;
  DataVector data;
};
GridData read_csv(const std::string& path);

// 8-bit PGM heatmap for a square grid; the affine value mapping is recorded
// in `path`.json.
void write_pgm(const std::string& path, const PhaseGrid& grid,
               const DataVector& data);

std::string format_double(double v);  // 17 significant digits
double parse_double(const std::string& s);

}  // namespace qst
