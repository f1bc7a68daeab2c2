#pragma once

#include <cstdint>
#include <string>

#include "qst/fock.hpp"

// Constructors for the eight optical state families. Parameter ranges follow
// the documented data-generation recipe: fock n in [1,16], coherent
// |alpha| in [1e-6,3], thermal n_th in [0,16], binomial S in [1,10] with
// 2 <= N <= cutoff/(S+1)-1, cat S in {0,1,2} with |alpha| in [1,3],
// gkp Delta in [0.2,0.5], random density in (0,1].

namespace qst {

enum class StateFamily {
  Fock,
  Coherent,
  Thermal,
  Num,
  Binomial,
  Cat,
  Gkp,
  Random,
};

std::string family_name(StateFamily f);
StateFamily family_from_name(const std::string& name);

/// Family tag plus the family-specific parameters; serializes to the dataset
/// manifest entry for the sample it produced.
struct StateSpec {
  StateFamily family = StateFamily::Fock;
  int cutoff = 32;
  // fock / num / binomial / cat / gkp
  int n = 0;
  int mu = 0;
  int S = 0;
  int N = 0;
  // coherent / cat
  cxd alpha{0.0, 0.0};
  // thermal
  double n_th = 0.0;
  // gkp
  double delta = 0.3;
  int grid_extent = 20;
  // random
  double density = 0.8;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static StateSpec from_json(const std::string& text);

  DensityMatrix build() const;
};

DensityMatrix make_fock(int n, int cutoff);
DensityMatrix make_coherent(cxd alpha, int cutoff);
DensityMatrix make_thermal(double n_th, int cutoff);

// The n-bar = 1.562 bosonic code; mu selects the logical 0/1 state.
DensityMatrix make_num_1562(int mu, int cutoff);

// (1/sqrt(2^{N+1})) sum_m (-1)^{mu m} sqrt(C(N+1, m)) |(S+1) m>
DensityMatrix make_binomial(int S, int N, int mu, int cutoff);

// Normalized Pi_{(S+1)mu} |alpha> with Pi_r projecting on Fock indices
// 2m(S+1) + r.
DensityMatrix make_cat(cxd alpha, int S, int mu, int cutoff);

// Finite-energy grid state: sum over the square grid K(mu), each coherent
// component weighted by exp(-Delta^2 |a|^2) exp(-i Re(a) Im(a)).
DensityMatrix make_gkp_finite(double delta, int mu, int grid_extent,
                              int cutoff);

// Masked lower-triangular Ginibre factor, then T^H T / tr.
DensityMatrix make_random_density(double density, int cutoff,
                                  std::uint64_t seed);

// tr(a^dag a rho)
double mean_photon(const DensityMatrix& rho);

}  // namespace qst
