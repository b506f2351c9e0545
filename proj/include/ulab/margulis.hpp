#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ulab/flow.hpp"
#include "ulab/quotient.hpp"

namespace ulab {

struct SigmaAverageResult {
  double d = 0;
  Traceless w;
  double value = 0;       // (1/3) int_{-1}^{2} |Ad(a_d u_r) w|^{-1/3} dr
  double quad_error = 0;  // |I_h - I_{h/2}| between the two mesh levels
};

inline constexpr double kQuadTolerance = 1e-5;

// Graded Gauss-Legendre quadrature split at every root and kink of the
// integrand.  QuadratureFailure when the error estimate exceeds 1e-5.
SigmaAverageResult sigma_contraction(const Traceless& w, double d, int quad_n = 256);

// sum over I_Y(x) of |w|^{-1/3}, or inj(x)^{-1/3} when I_Y(x) is empty.
double f_Y_eval(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm = 4);

struct SweepStep {
  Estimate f;      // E f_Y(h_k ... h_1 x)
  Estimate floor;  // E inj(h_k ... h_1 x)^{-1/3}
};

// h_i = a_d u_{r_i}, r_i uniform on [-1, 2]; one entry per k = 1..ell.
std::vector<SweepStep> contraction_sweep(const CosetPoint& x, const PeriodicOrbit& Y, double d, int ell, std::size_t N,
                                         std::uint64_t seed, double search_norm = 4);

// d(T) = log T - b_bar.
inline constexpr double kDefaultBBar = 1;

// Stratified estimate of (1 / (r_hi - r_lo)) int f_Y(a_{d(T)} u_r x) dr.
Estimate averaged_return(const CosetPoint& x, const PeriodicOrbit& Y, double logT, std::size_t N, std::uint64_t seed,
                         double r_lo = 0, double r_hi = 1, double b_bar = kDefaultBBar, double search_norm = 4);

}  // namespace ulab
