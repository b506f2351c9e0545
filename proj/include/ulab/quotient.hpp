#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ulab/algebra.hpp"

namespace ulab {

// Chart constant c in inj(x) = min(0.01, c * lambda_1(x)).
inline constexpr double kInjChart = 0.1;
inline constexpr double kInjCap = 0.01;

struct CosetPoint {
  GroupElement rep;
  double inj = 0;  // always filled by make_point / translate
  Model model() const { return rep.model(); }
};

struct Reduction {
  GroupElement rep;
  GroupElement gamma;  // integer entries; rep = g * gamma
};

Reduction reduce(const GroupElement& g);
// reduce(left * g) with the product and the reduction carried out in
// 113-bit precision; used after long flows where entries reach e^{30}.
Reduction reduce_product(const GroupElement& left, const GroupElement& g);

double shortest_vector(const GroupElement& rep);  // over both factor lattices
double injectivity_radius(const GroupElement& rep);
inline double injectivity_radius(const CosetPoint& x) { return x.inj; }

CosetPoint make_point(const GroupElement& g);
CosetPoint act(const GroupElement& left, const CosetPoint& x);  // left * x
CosetPoint identity_coset(Model m = Model::ProductRR);

CosetPoint haar_sample(std::uint64_t seed);

// Lattice vectors v = basis * (m, n) with 0 < |v| <= rmax (Euclidean), basis
// assumed reduced.
void for_each_lattice_vector(const Mat2& basis, double rmax, const std::function<void(double, double)>& fn);

// min over gamma in SL2(Z) of |g gamma c^{-1} - I|, searched near g^{-1} c.
double factor_distance(const Mat2& g, const Mat2& c);

struct PeriodicOrbit {
  std::array<std::int64_t, 4> q{1, 0, 0, 1};  // primitive integer matrix (a, b, c, d)
  std::int64_t det = 1;
  int height = 1;
  double vol_proxy = 1;
  std::vector<std::array<std::int64_t, 3>> hnf;  // (a, b, d) with a d = det, 0 <= b < d, primitive

  static PeriodicOrbit from_matrix(std::array<std::int64_t, 4> q);
  Mat2 conjugator() const;  // q / sqrt(det), in SL2(R)
  GroupElement point(const Mat2& h) const { return GroupElement::product(h * conjugator(), h); }
};

PeriodicOrbit diagonal_orbit();
std::vector<PeriodicOrbit> periodic_catalog(int max_height);

struct OrbitCandidate {
  Mat2 A;        // g1 (P / sqrt n) g2^{-1}; x lies on Y iff A = I for some P
  double dist;   // |A - I|
};
void for_each_orbit_candidate(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm,
                              const std::function<void(const OrbitCandidate&)>& fn);

double dist_to_orbit(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm);
// All w in r with |w| < radius and exp(w) x in Y found by the candidate search (zero included).
std::vector<Traceless> orbit_offsets(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm, double radius);
std::vector<Traceless> transversal_returns(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm);

std::string catalog_to_json(const std::vector<PeriodicOrbit>& cat);
std::vector<PeriodicOrbit> catalog_from_json(const std::string& text);

}  // namespace ulab
