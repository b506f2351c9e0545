#include "ulab/projection.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "ulab/error.hpp"
#include "ulab/parallel.hpp"

namespace ulab {

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::size_t k = std::min(v.size() - 1, std::size_t(q * double(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(k), v.end());
  return v[k];
}

// Truncated 1D energy at x among values (self excluded, R1 nearest dropped).
double energy_1d(const std::vector<double>& sorted, std::size_t i, int R1, double alpha, double floor) {
  const std::size_t n = sorted.size();
  if (n <= std::size_t(R1) + 1) return floor;
  // the R1 nearest others form a contiguous window around i
  std::size_t lo = i, hi = i;
  for (int k = 0; k < R1; ++k) {
    bool left = lo > 0, right = hi + 1 < n;
    if (left && (!right || sorted[i] - sorted[lo - 1] <= sorted[hi + 1] - sorted[i]))
      --lo;
    else
      ++hi;
  }
  double s = 0;
  for (std::size_t j = 0; j < n; ++j)
    if (j < lo || j > hi) s += std::pow(std::max(std::abs(sorted[j] - sorted[i]), 1e-300), -alpha);
  return s;
}

constexpr std::size_t kEnergySample = 64;

double projected_energy(std::vector<double> values, int R1, double alpha, double floor) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t step = std::max<std::size_t>(1, n / kEnergySample);
  double best = 0;
  for (std::size_t i = 0; i < n; i += step) best = std::max(best, energy_1d(values, i, R1, alpha, floor));
  return best;
}

void finish(ProjectionScanReport& rep) {
  for (const auto& row : rep.rows)
    if (row.exceptional) rep.exceptional_set.push_back(row.r);
  rep.exceptional_fraction = rep.rows.empty() ? 0 : double(rep.exceptional_set.size()) / double(rep.rows.size());
}

}  // namespace

std::string ProjectionScanReport::to_json() const {
  nlohmann::json j;
  j["exceptional_fraction"] = exceptional_fraction;
  j["exceptional_set"] = exceptional_set;
  j["upsilon"] = upsilon;
  j["bound"] = bound;
  j["b"] = b;
  j["R1"] = R1;
  j["r_count"] = rows.size();
  return j.dump();
}

std::string ProjectionScanReport::to_csv() const {
  std::string out = "r,max_fiber,violating_fraction,projected_energy,exceptional\n";
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g,%d\n", row.r, row.max_fiber, row.violating_fraction,
                  row.projected_energy, row.exceptional ? 1 : 0);
    out += buf;
  }
  return out;
}

double multiplicity(const PointCloud& cloud, double b, double r, double value) {
  require(b > 0, "multiplicity needs b > 0");
  require(r >= 0 && r <= 1, "multiplicity needs r in [0, 1]");
  if (cloud.size() == 0) return 0;
  std::size_t hits = 0;
  for (const auto& w : cloud.points()) hits += std::abs(value - xi_project(r, w)) <= b;
  return double(hits) / double(cloud.size());
}

std::vector<std::size_t> fiber_counts(const std::vector<double>& values, double b) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), values[i] - b);
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), values[i] + b);
    out[i] = std::size_t(hi - lo);
  }
  return out;
}

std::vector<double> r_grid(std::size_t r_count) {
  std::vector<double> r(r_count);
  for (std::size_t j = 0; j < r_count; ++j) r[j] = (double(j) + 0.5) / double(r_count);
  return r;
}

ProjectionScanReport linear_scan(const PointCloud& cloud, int R, double alpha, double eps, double b, std::size_t r_count,
                                 double c_fit) {
  require(cloud.size() > 0 && r_count > 0, "linear_scan needs a nonempty cloud and r-grid");
  require(R >= 0 && alpha > 0 && alpha <= 1 && eps > 0 && b > 0 && c_fit > 0, "linear_scan parameters");
  ProjectionScanReport rep;
  rep.b = b;
  rep.upsilon = max_energy(cloud.points(), cloud.b0(), R, alpha);
  if (!std::isfinite(rep.upsilon))
    throw Error(ErrorCode::CertificateMissing, "cloud energy is not finite at R = " + std::to_string(R));
  require(b >= std::pow(rep.upsilon, -1 / alpha), "linear_scan needs b >= Upsilon^{-1/alpha}");
  rep.bound = c_fit * std::pow(rep.upsilon, 1 + 7 * eps) * std::pow(b, alpha);
  double r1 = double(R) + c_fit * std::pow(rep.upsilon, 7 * eps);
  rep.R1 = int(std::min(r1, 1e9));
  const bool small = cloud.size() <= std::size_t(R) + 1;
  const double floor = std::pow(cloud.b0(), -alpha);
  auto grid = r_grid(r_count);
  rep.rows.resize(r_count);
  parallel_for(r_count, [&](std::size_t j) {
    auto& row = rep.rows[j];
    row.r = grid[j];
    std::vector<double> v(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) v[i] = xi_project(row.r, cloud[i]);
    auto fib = fiber_counts(v, b);
    std::size_t bad = 0;
    for (auto c : fib) {
      row.max_fiber = std::max(row.max_fiber, c);
      bad += double(c) > rep.bound;
    }
    row.violating_fraction = double(bad) / double(cloud.size());
    row.exceptional = !small && row.violating_fraction > kExceptionalShare;
    row.projected_energy = projected_energy(std::move(v), rep.R1, alpha, floor);
  });
  finish(rep);
  return rep;
}

double ball_regularity(const PointCloud& cloud, double alpha, double b0, double b1) {
  require(cloud.size() > 0, "ball_regularity needs a nonempty cloud");
  require(b0 > 0 && b1 > 0 && b1 <= b0 && alpha > 0, "ball_regularity parameters");
  const auto& p = cloud.points();
  const std::size_t n = p.size();
  std::vector<double> scales;
  for (double b = b0; b > b1; b /= 2) scales.push_back(b);
  scales.push_back(b1);
  std::vector<double> worst(n, 0);
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) d[j] = (p[j] - p[i]).norm();
    std::sort(d.begin(), d.end());
    for (double b : scales) {
      double mass = double(std::upper_bound(d.begin(), d.end(), b) - d.begin()) / double(n);
      worst[i] = std::max(worst[i], mass * std::pow(b0 / b, alpha));
    }
  });
  double u = *std::max_element(worst.begin(), worst.end());
  if (!std::isfinite(u)) throw Error(ErrorCode::CertificateMissing, "ball-regularity constant is not finite");
  return u;
}

ProjectionScanReport nonlinear_scan(const PointCloud& cloud, double alpha, double eps, double b0, double b1,
                                    std::size_t r_count, double c_fit) {
  require(cloud.size() > 0 && r_count > 0, "nonlinear_scan needs a nonempty cloud and r-grid");
  require(alpha > 0 && alpha <= 1 && eps > 0 && c_fit > 0, "nonlinear_scan parameters");
  ProjectionScanReport rep;
  rep.b = b1;
  rep.upsilon = ball_regularity(cloud, alpha, b0, b1);
  rep.bound = c_fit * rep.upsilon * std::pow(b1 / b0, alpha - 7 * eps);
  const double n = double(cloud.size());
  const double floor = std::pow(b0, -alpha);
  auto grid = r_grid(r_count);
  rep.rows.resize(r_count);
  parallel_for(r_count, [&](std::size_t j) {
    auto& row = rep.rows[j];
    row.r = grid[j];
    std::vector<double> v(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) v[i] = zeta_project(row.r, cloud[i]);
    auto fib = fiber_counts(v, b1);
    std::size_t bad = 0;
    for (auto c : fib) {
      row.max_fiber = std::max(row.max_fiber, c);
      bad += double(c) / n > rep.bound;
    }
    row.violating_fraction = double(bad) / n;
    row.exceptional = row.violating_fraction > kExceptionalShare;
    row.projected_energy = projected_energy(std::move(v), 0, alpha, floor);
  });
  finish(rep);
  return rep;
}

PointCloud cantor_cloud(int depth, double alpha, double b0, Traceless dir) {
  require(depth >= 1 && depth <= 10, "cantor_cloud depth must lie in [1, 10]");
  require(alpha > 0 && alpha < 1, "cantor_cloud needs alpha in (0, 1)");
  require(dir.norm() > 0, "cantor_cloud needs a nonzero direction");
  const double rho = std::pow(3.0, -1 / alpha);
  const double offsets[3] = {0, (1 - rho) / 2, 1 - rho};
  std::vector<double> t{0};
  double scale = 1;
  for (int k = 0; k < depth; ++k) {
    std::vector<double> next;
    for (double x : t)
      for (double o : offsets) next.push_back(x + scale * o);
    t = std::move(next);
    scale *= rho;
  }
  Traceless unit = dir * (1 / dir.norm());
  std::vector<Traceless> pts;
  for (double x : t) pts.push_back(unit * (0.99 * b0 * x));
  return PointCloud(std::move(pts), b0);
}

Traceless planted_kernel_direction(double r0) { return {1, 2 * r0, 0}; }

double calibrate_linear_c_fit(const std::vector<PointCloud>& clouds, int R, double alpha, double eps, double b_ratio,
                              std::size_t r_count, double margin) {
  double worst = 0;
  for (const auto& cloud : clouds) {
    double b = cloud.b0() * b_ratio;
    double ups = max_energy(cloud.points(), cloud.b0(), R, alpha);
    double unit = std::pow(ups, 1 + 7 * eps) * std::pow(b, alpha);
    auto grid = r_grid(r_count);
    std::vector<double> q(r_count);
    parallel_for(r_count, [&](std::size_t j) {
      std::vector<double> v(cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i) v[i] = xi_project(grid[j], cloud[i]);
      auto fib = fiber_counts(v, b);
      std::vector<double> ratio(fib.size());
      for (std::size_t i = 0; i < fib.size(); ++i) ratio[i] = double(fib[i]) / unit;
      q[j] = quantile(std::move(ratio), 1 - kExceptionalShare);
    });
    worst = std::max(worst, *std::max_element(q.begin(), q.end()));
  }
  return margin * worst;
}

std::vector<PointCloud> calibration_clouds(double alpha, double b0, int count) {
  std::vector<PointCloud> out;
  const double ratio = std::pow(3.0, -1 / alpha);
  for (int i = 0; i < count; ++i) out.push_back(fractal_cloud(std::uint64_t(1000 + i), 3, ratio, 7, b0));
  return out;
}

}  // namespace ulab
