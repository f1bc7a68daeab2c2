#include "qst/measure.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qst/kernels.hpp"

namespace qst {

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

PhaseGrid make_square_grid(double lo, double hi, int nx, int ny) {
  require(nx >= 2 && ny >= 2, ErrorCode::InvalidArgument,
          "square grid needs nx, ny >= 2");
  require(hi > lo && std::isfinite(lo) && std::isfinite(hi),
          ErrorCode::InvalidArgument, "degenerate grid extent");
  PhaseGrid g;
  g.layout = PhaseGrid::Layout::Square;
  g.nx = nx;
  g.ny = ny;
  g.lo = lo;
  g.hi = hi;
  g.points.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    const double im = lo + (hi - lo) * iy / (ny - 1);
    for (int ix = 0; ix < nx; ++ix) {
      const double re = lo + (hi - lo) * ix / (nx - 1);
      g.points.emplace_back(re, im);
    }
  }
  return g;
}

PhaseGrid sample_scatter(int k, double radius, std::uint64_t seed) {
  require(k >= 1, ErrorCode::InvalidArgument, "need at least one point");
  require(radius > 0.0, ErrorCode::InvalidArgument, "radius must be > 0");
  PhaseGrid g;
  g.layout = PhaseGrid::Layout::Scatter;
  g.points.reserve(k);
  Rng rng(seed);
  while (static_cast<int>(g.points.size()) < k) {
    const double x = rng.uniform(-radius, radius);
    const double y = rng.uniform(-radius, radius);
    if (x * x + y * y <= radius * radius) g.points.emplace_back(x, y);
  }
  return g;
}

std::string PhaseGrid::to_json() const {
  nlohmann::json j;
  if (layout == Layout::Square) {
    j["layout"] = "square";
    j["nx"] = nx;
    j["ny"] = ny;
    j["lo"] = lo;
    j["hi"] = hi;
  } else {
    j["layout"] = "scatter";
    std::vector<double> re, im;
    re.reserve(points.size());
    im.reserve(points.size());
    for (const auto& p : points) {
      re.push_back(p.real());
      im.push_back(p.imag());
    }
    j["re"] = re;
    j["im"] = im;
  }
  return j.dump();
}

PhaseGrid PhaseGrid::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad grid JSON: ") + e.what());
  }
  const std::string layout = j.value("layout", "");
  if (layout == "square") {
    return make_square_grid(j.value("lo", -5.0), j.value("hi", 5.0),
                            j.value("nx", 32), j.value("ny", 32));
  }
  require(layout == "scatter", ErrorCode::ConfigError,
          "grid layout must be square or scatter");
  PhaseGrid g;
  g.layout = Layout::Scatter;
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  require(re.size() == im.size(), ErrorCode::ConfigError,
          "grid re/im length mismatch");
  for (std::size_t i = 0; i < re.size(); ++i)
    g.points.emplace_back(re[i].get<double>(), im[i].get<double>());
  return g;
}

// ---------------------------------------------------------------------------
// Measurement sets
// ---------------------------------------------------------------------------

MeasurementSet build_operators(const PhaseGrid& grid, MeasurementKind kind,
                               int cutoff, int q_photon) {
  require(cutoff >= 2, ErrorCode::InvalidDimension, "cutoff must be >= 2");
  require(q_photon >= 0 && q_photon < cutoff, ErrorCode::InvalidArgument,
          "generalized-Q photon index out of range");
  MeasurementSet set;
  set.kind = kind;
  set.q_photon = kind == MeasurementKind::HusimiProjector ? 0 : q_photon;
  set.cutoff = cutoff;
  set.scale = kind == MeasurementKind::HusimiProjector ? 1.0 / kPi : 1.0;
  set.grid = grid;
  const int n = grid.size();
  set.operators.resize(n);

  if (kind == MeasurementKind::DisplacedParity) {
    const CMatrix p = parity(cutoff);
    kernels::parallel_for(n, [&](std::size_t i) {
      const CMatrix d = displacement(grid.points[i], cutoff);
      set.operators[i] = d * p * d.adjoint();
    });
    return set;
  }

  set.columns.resize(cutoff, n);
  const double root_scale = std::sqrt(set.scale);
  kernels::parallel_for(n, [&](std::size_t i) {
    const CVector u =
        displaced_fock_column(grid.points[i], set.q_photon, cutoff);
    set.columns.col(i) = root_scale * u;
    set.operators[i] = set.scale * (u * u.adjoint());
  });
  return set;
}

std::vector<double> MeasurementSet::expect_all(const DensityMatrix& rho) const {
  require(rho.dim() == cutoff, ErrorCode::DimensionMismatch,
          "state dimension does not match measurement set");
  std::vector<double> out(static_cast<std::size_t>(size()));
  if (rank1()) {
    kernels::expect_rank1_batch(rho.matrix(), columns, 1.0, out.data());
  } else {
    kernels::parallel_for(out.size(), [&](std::size_t i) {
      out[i] = (operators[i] * rho.matrix()).trace().real();
    });
  }
  return out;
}

std::string MeasurementSet::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case MeasurementKind::HusimiProjector: j["kind"] = "husimi"; break;
    case MeasurementKind::GeneralizedQ: j["kind"] = "generalized_q"; break;
    case MeasurementKind::DisplacedParity: j["kind"] = "displaced_parity"; break;
  }
  j["n"] = q_photon;
  j["cutoff"] = cutoff;
  j["grid"] = nlohmann::json::parse(grid.to_json());
  return j.dump();
}

MeasurementSet MeasurementSet::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError,
         std::string("bad measurement JSON: ") + e.what());
  }
  const std::string kind = j.value("kind", "");
  MeasurementKind k;
  if (kind == "husimi")
    k = MeasurementKind::HusimiProjector;
  else if (kind == "generalized_q")
    k = MeasurementKind::GeneralizedQ;
  else if (kind == "displaced_parity")
    k = MeasurementKind::DisplacedParity;
  else
    fail(ErrorCode::ConfigError, "unknown measurement kind '" + kind + "'");
  PhaseGrid grid = PhaseGrid::from_json(j.at("grid").dump());
  return build_operators(grid, k, j.at("cutoff").get<int>(), j.value("n", 0));
}

// ---------------------------------------------------------------------------
// Quasi-probability data
// ---------------------------------------------------------------------------

DataVector generalized_q(const DensityMatrix& rho, const PhaseGrid& grid,
                         int n) {
  require(n >= 0 && n < rho.dim(), ErrorCode::InvalidArgument,
          "generalized-Q photon index out of range");
  DataVector d;
  d.values.resize(grid.points.size());
  CMatrix columns(rho.dim(), grid.size());
  kernels::parallel_for(grid.points.size(), [&](std::size_t i) {
    columns.col(i) = displaced_fock_column(grid.points[i], n, rho.dim());
  });
  kernels::expect_rank1_batch(rho.matrix(), columns, 1.0, d.values.data());
  return d;
}

DataVector husimi(const DensityMatrix& rho, const PhaseGrid& grid) {
  DataVector d = generalized_q(rho, grid, 0);
  for (double& v : d.values) v /= kPi;
  return d;
}

DataVector wigner(const DensityMatrix& rho, const PhaseGrid& grid,
                  int pad_factor) {
  require(pad_factor >= 1, ErrorCode::InvalidArgument, "pad factor >= 1");
  const int dim = rho.dim() * pad_factor;
  const DensityMatrix padded = embed(rho, dim);
  const CMatrix p = parity(dim);
  DataVector d;
  d.values.resize(grid.points.size());
  kernels::parallel_for(grid.points.size(), [&](std::size_t i) {
    const CMatrix disp = displacement(grid.points[i], dim);
    const cxd val = (padded.matrix() * disp * p * disp.adjoint()).trace();
    d.values[i] = 2.0 / kPi * val.real();
  });
  return d;
}

DataVector normalize_unit_max(const DataVector& data) {
  double max = 0.0;
  for (double v : data.values) max = std::max(max, v);
  require(max > 0.0, ErrorCode::DegenerateNormalization,
          "cannot unit-max normalize data with no positive entry");
  DataVector out;
  out.values.reserve(data.values.size());
  for (double v : data.values) out.values.push_back(v / max);
  out.normalization = DataVector::Normalization::UnitMax;
  out.max_value = max;
  return out;
}

DataVector denormalize(const DataVector& data) {
  if (data.normalization == DataVector::Normalization::Raw) return data;
  DataVector out;
  out.values.reserve(data.values.size());
  for (double v : data.values) out.values.push_back(v * data.max_value);
  out.normalization = DataVector::Normalization::Raw;
  out.max_value = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{}, ErrorCode::IoError,
          "bad floating point value '" + s + "'");
  return v;
}

void write_csv(const std::string& path, const PhaseGrid& grid,
               const DataVector& data) {
  require(grid.size() == data.size(), ErrorCode::DimensionMismatch,
          "grid / data length mismatch");
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out << "re,im,value\n";
  for (int i = 0; i < grid.size(); ++i) {
    out << format_double(grid.points[i].real()) << ','
        << format_double(grid.points[i].imag()) << ','
        << format_double(data.values[i]) << '\n';
  }
  require(out.good(), ErrorCode::IoError, "write failed for " + path);
}

GridData read_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::IoError,
          "empty CSV " + path);
  GridData gd;
  gd.grid.layout = PhaseGrid::Layout::Scatter;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string re, im, value;
    require(std::getline(ss, re, ',') && std::getline(ss, im, ',') &&
                std::getline(ss, value, ','),
            ErrorCode::IoError, "bad CSV row '" + line + "'");
    gd.grid.points.emplace_back(parse_double(re), parse_double(im));
    gd.data.values.push_back(parse_double(value));
  }
  return gd;
}

void write_pgm(const std::string& path, const PhaseGrid& grid,
               const DataVector& data) {
  require(grid.layout == PhaseGrid::Layout::Square, ErrorCode::InvalidArgument,
          "PGM export needs a square grid");
  require(grid.size() == data.size(), ErrorCode::DimensionMismatch,
          "grid / data length mismatch");
  double lo = data.values[0], hi = data.values[0];
  for (double v : data.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out << "P5\n" << grid.nx << ' ' << grid.ny << "\n255\n";
  for (int iy = grid.ny - 1; iy >= 0; --iy) {  // top row = largest Im
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double v = data.values[iy * grid.nx + ix];
      const int byte =
          std::clamp(static_cast<int>(std::lround((v - lo) / span * 255.0)), 0,
                     255);
      out.put(static_cast<char>(byte));
    }
  }
  require(out.good(), ErrorCode::IoError, "write failed for " + path);

  nlohmann::json side;
  side["min"] = lo;
  side["max"] = hi;
  side["mapping"] = "byte = round((value - min) / (max - min) * 255)";
  side["rows"] = "top row has the largest Im(beta)";
  std::ofstream sj(path + ".json");
  require(sj.good(), ErrorCode::IoError, "cannot open " + path + ".json");
  sj << side.dump(2) << '\n';
}

}  // namespace qst
