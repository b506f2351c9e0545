#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ulab/quotient.hpp"

namespace ulab {

// Offsets below this are treated as exact identifications (w = 0).
inline constexpr double kExactIdentification = 1e-9;

// One H-element c = g2 gamma2 g2^{-1} with |c|_max <= search_norm, paired with
// the best gamma1.  A = c g1 gamma1 g1^{-1}; exp(w) x = c x with E(w) = A.
struct Identification {
  Mat2 c;
  Mat2 A;
  double dist = 0;  // |A - I|_max; infinite when no gamma1 rounds to SL2(Z)
};

// All c in g2 SL2(Z) g2^{-1} with |c|_max <= search_norm, excluding +-I, for
// the reduced representative of x.  BudgetExceeded above 200000 elements.
std::vector<Identification> short_identifications(const CosetPoint& x, double search_norm);

// sum of |w|^{-alpha} over nonzero w in r with |w| < inj(z) and exp(w) z = c z
// for some c in the search window; inj(z)^{-alpha} when there are none.
double closing_f(const CosetPoint& z, double alpha, double search_norm);

struct ClosingOptions {
  double alpha = 1.0 / 3;
  double c_bad = 5;         // search when good_fraction < 1 - c_bad beta^{1/4}
  int max_height = 3;       // periodic catalog height for the nearby search
  int z_samples = 4;        // z = a_t u_{j/(m-1)} y
  double stab_tol = 1e-3;   // |A - I| for a stabilizer candidate of x1
  bool force_search = false;
};

struct ClosingRow {
  double r = 0;
  double inj = 0;
  bool inj_ok = false;
  bool injective_on_Et = false;
  double f_t_value = 0;  // max over the z sample
  bool good = false;
};

struct DetectedOrbit {
  PeriodicOrbit orbit;
  double distance = 0;
};

struct ClosingScanReport {
  double t = 0, D = 0, beta = 0, alpha = 0;
  double threshold = 0;  // 1 - c_bad beta^{1/4}
  std::vector<ClosingRow> rows;
  double good_fraction = 0;
  bool searched = false;
  std::optional<DetectedOrbit> detected;
  std::size_t stabilizer_candidates = 0;
  bool noncommuting_pair = false;

  std::string to_json() const;
  std::string to_csv() const;  // r,inj,inj_ok,injective_on_Et,f_t_value,good
};

// For r on the grid (j + 1/2) / r_count, y = a_{8t} u_r x1:
//   inj(y) >= beta^{1/2}, no exact identification of y in the window, and
//   closing_f(z) <= e^{D t} for the z sample.
ClosingScanReport closing_scan(const CosetPoint& x1, double t, double D, double beta, std::size_t r_count,
                               double search_norm = 4, const ClosingOptions& opts = {});

}  // namespace ulab
