#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ulab/dimension.hpp"

namespace ulab {

// A parameter r is exceptional when more than this share of the cloud
// violates the fiber bound.
inline constexpr double kExceptionalShare = 0.1;

// Fitted constants in front of the fiber bounds, frozen after calibration on
// seeded non-adversarial clouds (see calibrate_linear_c_fit).
inline constexpr double kLinearCFit = 0.35;
inline constexpr double kNonlinearCFit = 1;

struct ProjectionRow {
  double r = 0;
  std::size_t max_fiber = 0;      // largest fiber count over the cloud, self included
  double violating_fraction = 0;  // share of points whose fiber exceeds the bound
  double projected_energy = 0;    // truncated energy of the projected cloud (subsampled max)
  bool exceptional = false;
};

struct ProjectionScanReport {
  std::vector<ProjectionRow> rows;
  std::vector<double> exceptional_set;
  double exceptional_fraction = 0;
  double upsilon = 0;  // energy certificate (linear) or ball-regularity constant (nonlinear)
  double bound = 0;    // fiber bound: a count (linear) or a mass (nonlinear)
  double b = 0;
  int R1 = 0;

  std::string to_json() const;
  std::string to_csv() const;  // r,max_fiber,violating_fraction,projected_energy,exceptional
};

// Uniform mass of the points whose xi_r curve passes within b of value.
double multiplicity(const PointCloud& cloud, double b, double r, double value);

// For each value, #{j : |v_j - v_i| <= b}, self included.
std::vector<std::size_t> fiber_counts(const std::vector<double>& values, double b);

// Equispaced r_j = (j + 1/2) / r_count.
std::vector<double> r_grid(std::size_t r_count);

ProjectionScanReport linear_scan(const PointCloud& cloud, int R, double alpha, double eps, double b, std::size_t r_count,
                                 double c_fit = kLinearCFit);

// max over points w and b in {b0 2^{-j} > b1} and b = b1 of theta(B(w, b)) (b0 / b)^alpha,
// theta the uniform probability on the cloud.
double ball_regularity(const PointCloud& cloud, double alpha, double b0, double b1);

// zeta_r fibers at scale b1, bound c_fit * ball_regularity * (b1 / b0)^{alpha - 7 eps}.
ProjectionScanReport nonlinear_scan(const PointCloud& cloud, double alpha, double eps, double b0, double b1,
                                    std::size_t r_count, double c_fit = kNonlinearCFit);

// 3^depth points t * dir / |dir| with t in a three-branch Cantor set of ratio
// 3^{-1/alpha} (dimension alpha) inside [0, 0.99 b0).
PointCloud cantor_cloud(int depth, double alpha, double b0, Traceless dir = {0, 1, 0});
// xi_{r0}(w*) = 0 for w* = (1, 2 r0, 0).
Traceless planted_kernel_direction(double r0);

// margin times the largest (1 - kExceptionalShare)-quantile of fiber / (Upsilon^{1+7eps} b^alpha)
// over the clouds and the r-grid.
double calibrate_linear_c_fit(const std::vector<PointCloud>& clouds, int R, double alpha, double eps, double b_ratio,
                              std::size_t r_count, double margin);
// Seeded calibration clouds: random three-map self-similar clouds of dimension alpha.
std::vector<PointCloud> calibration_clouds(double alpha, double b0, int count);

}  // namespace ulab
