#include "ulab/margulis.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "ulab/error.hpp"
#include "ulab/parallel.hpp"
#include "ulab/rng.hpp"

namespace ulab {

namespace {

constexpr double kLo = -1, kHi = 2;
constexpr int kGrading = 30;  // geometric levels toward each breakpoint

void push_roots(double a, double b, double c, std::vector<double>& out) {
  auto keep = [&](double r) {
    if (std::isfinite(r) && r > kLo && r < kHi) out.push_back(r);
  };
  if (a == 0) {
    if (b != 0) keep(-c / b);
    return;
  }
  double disc = b * b - 4 * a * c;
  if (disc < 0) return;
  double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  if (q != 0) {
    keep(q / a);
    keep(c / q);
  } else {
    keep(0);
  }
}

struct Integrand {
  double x, y, z, ed, emd;
  double operator()(double r) const {
    double n = std::max({std::abs(x + z * r), ed * std::abs(y - 2 * x * r - z * r * r), emd * std::abs(z)});
    return std::pow(n, -1.0 / 3);
  }
};

// Each piece between breakpoints is graded geometrically toward both ends and
// split into `cells` uniform cells in the middle.
double integrate(const Integrand& f, const std::vector<double>& bp, int cells, int refine) {
  using GL = boost::math::quadrature::gauss<double, 20>;
  double total = 0;
  for (std::size_t p = 0; p + 1 < bp.size(); ++p) {
    double a = bp[p], b = bp[p + 1];
    if (b - a <= 0) continue;
    std::vector<double> nodes{a};
    double h = (b - a) / 4;
    for (int k = kGrading; k >= 1; --k) nodes.push_back(a + h * std::ldexp(1.0, -k));
    for (int k = 0; k <= cells; ++k) nodes.push_back(a + h + 2 * h * k / cells);
    for (int k = 1; k <= kGrading; ++k) nodes.push_back(b - h * std::ldexp(1.0, -k));
    nodes.push_back(b);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      double lo = nodes[i], hi = nodes[i + 1];
      for (int s = 0; s < refine; ++s) {
        double u = lo + (hi - lo) * s / refine, v = lo + (hi - lo) * (s + 1) / refine;
        if (v > u) total += GL::integrate(f, u, v);
      }
    }
  }
  return total;
}

}  // namespace

SigmaAverageResult sigma_contraction(const Traceless& w, double d, int quad_n) {
  require(w.norm() > 0, "sigma_contraction needs w != 0");
  require(quad_n >= 64, "sigma_contraction needs quad_n >= 64");
  require(d >= 0 && d <= kMaxFlowTime, "sigma_contraction needs d in [0, 60]");
  const double x = w.x11, y = w.x12, z = w.x21;
  const double ed = std::exp(d), emd = std::exp(-d);
  Integrand f{x, y, z, ed, emd};

  // roots of q(r) = y - 2 x r - z r^2 and of x + z r, and every crossing of
  // the three terms of the max
  std::vector<double> bp{kLo, kHi};
  push_roots(-z, -2 * x, y, bp);
  push_roots(0, z, x, bp);
  for (double s : {1.0, -1.0}) {
    push_roots(-z, -2 * x - s * emd * z, y - s * emd * x, bp);
    push_roots(-z, -2 * x, y - s * emd * emd * std::abs(z), bp);
    push_roots(0, z, x - s * emd * std::abs(z), bp);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  int cells = std::max(1, quad_n / 64);
  double coarse = integrate(f, bp, cells, 1) / 3;
  double fine = integrate(f, bp, cells, 2) / 3;
  SigmaAverageResult out{d, w, fine, std::abs(fine - coarse)};
  if (!(out.quad_error <= kQuadTolerance))
    throw Error(ErrorCode::QuadratureFailure, "sigma_contraction error estimate " + std::to_string(out.quad_error));
  return out;
}

double f_Y_eval(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm) {
  auto I = transversal_returns(x, Y, search_norm);
  if (I.empty()) return std::pow(x.inj, -1.0 / 3);
  double s = 0;
  for (const auto& w : I) s += std::pow(w.norm(), -1.0 / 3);
  return s;
}

std::vector<SweepStep> contraction_sweep(const CosetPoint& x, const PeriodicOrbit& Y, double d, int ell, std::size_t N,
                                         std::uint64_t seed, double search_norm) {
  require(d >= 4 && d <= kMaxFlowTime, "contraction_sweep needs 4 <= d <= 60");
  require(ell >= 1 && ell <= 8, "contraction_sweep needs 1 <= ell <= 8");
  require(N >= 2, "contraction_sweep needs N >= 2");
  std::vector<std::vector<double>> f(static_cast<std::size_t>(ell), std::vector<double>(N));
  auto fl = f;
  const std::uint64_t key = stream_key(seed, "contraction_sweep");
  parallel_for(N, [&](std::size_t i) {
    Draws dr(key, i);
    CosetPoint p = x;
    for (int k = 0; k < ell; ++k) {
      p = translate(p, d, dr.uniform(kLo, kHi));
      f[std::size_t(k)][i] = f_Y_eval(p, Y, search_norm);
      fl[std::size_t(k)][i] = std::pow(p.inj, -1.0 / 3);
    }
  });
  std::vector<SweepStep> out;
  for (int k = 0; k < ell; ++k)
    out.push_back({sample_estimate(f[std::size_t(k)]), sample_estimate(fl[std::size_t(k)])});
  return out;
}

Estimate averaged_return(const CosetPoint& x, const PeriodicOrbit& Y, double logT, std::size_t N, std::uint64_t seed,
                         double r_lo, double r_hi, double b_bar, double search_norm) {
  require(logT >= 8, "averaged_return needs log T >= 8");
  require(r_hi > r_lo && N >= 2 && b_bar >= 0, "averaged_return parameters");
  const double d = logT - b_bar;
  std::vector<double> v(N);
  parallel_for(N, [&](std::size_t i) {
    double r = r_lo + (r_hi - r_lo) * stratified(i, N, seed, "averaged_return");
    v[i] = f_Y_eval(translate(x, d, r), Y, search_norm);
  });
  return stratified_estimate(v);
}

}  // namespace ulab
