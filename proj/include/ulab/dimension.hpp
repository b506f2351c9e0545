#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ulab/quotient.hpp"

namespace ulab {

using CubeIndex = std::array<std::int64_t, 3>;

// Finite subset of B_r(0, b0) (max norm) with dyadic cubes of side 2^{-Mk}
// indexed for k0 <= k <= k1.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::vector<Traceless> points, double b0, int M = 4, int k0 = 0, int k1 = -1);

  const std::vector<Traceless>& points() const { return pts_; }
  std::size_t size() const { return pts_.size(); }
  const Traceless& operator[](std::size_t i) const { return pts_[i]; }
  double b0() const { return b0_; }
  int M() const { return M_; }
  int k0() const { return k0_; }
  int k1() const { return k1_; }

  // members of each nonempty cube at level k (k0 <= k <= k1)
  const std::map<CubeIndex, std::vector<std::size_t>>& cubes(int k) const;
  bool index_consistent() const;

  std::string to_json() const;
  static PointCloud from_json(const std::string& text);

 private:
  std::vector<Traceless> pts_;
  double b0_ = 1;
  int M_ = 4, k0_ = 0, k1_ = -1;
  std::vector<std::map<CubeIndex, std::vector<std::size_t>>> index_;
};

CubeIndex cube_of(const Traceless& w, int M, int k);

// eng_{Theta,R}(w): self term excluded, R nearest others removed; b0^{-alpha}
// when #Theta <= R or nothing remains.
double energy(const std::vector<Traceless>& cloud, double b0, int R, double alpha, std::size_t w);
inline double energy(const PointCloud& cloud, int R, double alpha, std::size_t w) {
  return energy(cloud.points(), cloud.b0(), R, alpha, w);
}
double max_energy(const std::vector<Traceless>& cloud, double b0, int R, double alpha);

// Seeded self-similar cloud: `maps` random similitudes of ratio `ratio`
// iterated `depth` times, scaled into B_r(0, b0).
PointCloud fractal_cloud(std::uint64_t seed, int maps, double ratio, int depth, double b0, int M = 4, int k0 = 0,
                         int k1 = -1);

// ---------------------------------------------------------------- regularization

struct RegularizeOptions {
  double m0 = 1;                 // moderate exponent in the condition on M
  double kappa = 0.01;           // used only for the condition-on-M warning
  double level_k0_threshold = 0; // lower bound on #F_i cap Q / #F_i at level k0
  int max_shifts = 4096;
};

using Shift = std::array<std::uint64_t, 3>;  // fraction of the coarsest cube side, 64-bit fixed point

struct RegularPart {
  std::vector<std::size_t> members;
  Shift shift{};
  std::vector<int> tau;  // tau[k - (k0 - 10)]
  double level_k0_min_fraction = 1;
  bool level_k0_ok = true;
};

struct Regularization {
  int M = 0, k0 = 0, k1 = 0;
  double beta = 0;
  std::vector<std::size_t> discard;
  std::vector<RegularPart> parts;
  int shifts_tried = 0;
};

Regularization regularize(const PointCloud& cloud, int M, int k0, int k1, double beta,
                          const RegularizeOptions& opt = {});
// Exact replay of the band, discard and part-size conditions.  Empty string when valid.
std::string verify_regularization(const PointCloud& cloud, const Regularization& reg);
// Cube index of w at level k with the dyadic grid translated by the shift.
std::array<__int128, 3> shifted_cube(const Traceless& w, int M, int kc, int k, const Shift& shift);

// ---------------------------------------------------------------- cones

struct SheetWeight {
  double rho_min = 1, rho_max = 1;  // bounds of the density on E
  double lipschitz = 0;
};

struct ConeSet {
  CosetPoint y;
  PointCloud F;
  BoxSpec box;  // E = B^{s,H}_beta {u_r : |r| <= eta}
  double beta = 0, eta = 0;
  std::vector<SheetWeight> weights;
  double lambda = 1;  // normalizing density constant
  double adm = 1;     // admissibility constant
};

// Enforces eta^2 = beta, F in B_r(0, beta), inj(y) >= 2 eta (InjectivityViolation).
ConeSet cone_build(const CosetPoint& y, const PointCloud& F, double beta, double eta,
                   std::vector<SheetWeight> weights = {});

// z = prd(h.s, h.tau, h.r) exp(w_sheet) y
struct ConePoint {
  std::size_t sheet = 0;
  PrdCoords h;
};
GroupElement cone_element(const ConeSet& cone, const Mat2& h, const ConePoint& z);  // h z, unreduced

struct TransversalSet {
  std::vector<Traceless> vectors;  // sorted by norm, zero first
  double inj = 0;                  // inj(hz)
};
TransversalSet transversal_set(const ConeSet& cone, const Mat2& h, const ConePoint& z, double b);

struct FPsi {
  double f = 0, psi = 0;
  std::size_t count = 0;
  double inj = 0;
};
FPsi margulis_fpsi(const ConeSet& cone, const Mat2& h, const ConePoint& z, double b, int R, double alpha);
// f and psi from an explicit transversal set.
FPsi fpsi_of(const TransversalSet& I, double b, int R, double alpha);

struct StepReport {
  std::vector<ConeSet> offspring;
  std::size_t dropped = 0;  // offspring with inj(base) < beta^{1/2}
  double f_before = 0, psi_before = 0, f_after = 0, psi_after = 0;
  double energy_before = 0, energy_after = 0;  // mean per-point truncated energy
  double contraction = 0;                      // f_after / f_before
  bool at_floor = false;                       // every offspring sheet is isolated at energy scale
  bool sheet_counts_ok = true;                 // #F' >= 0.5 beta^9 #F for every offspring
  std::string to_json() const;
};

StepReport dimension_step(const ConeSet& cone, double ell, double r, double b, int R, double alpha, std::size_t N,
                          std::uint64_t seed);

}  // namespace ulab
