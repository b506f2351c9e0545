#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ulab/error.hpp"
#include "ulab/projection.hpp"
#include "ulab/rng.hpp"

using namespace ulab;

namespace {

const double kAlpha = std::log(2.0) / std::log(3.0);

double xi_poly(double r, const Traceless& w) { return -w.x21 * r * r - 2 * w.x11 * r + w.x12; }

std::vector<Traceless> random_points(Draws& d, std::size_t n, double radius) {
  std::vector<Traceless> p;
  for (std::size_t i = 0; i < n; ++i)
    p.push_back({d.uniform(-radius, radius), d.uniform(-radius, radius), d.uniform(-radius, radius)});
  return p;
}

}  // namespace

TEST_CASE("multiplicity") {
  Traceless w{0.1, -0.2, 0.3};
  PointCloud one({w}, 1);
  CHECK(multiplicity(one, 1e-3, 0.4, xi_poly(0.4, w)) == 1.0);
  PointCloud two({{0, 0.1, 0}, {0, -0.1, 0}}, 1);
  CHECK(multiplicity(two, 0.05, 0.7, 0.1) == 0.5);
  CHECK(multiplicity(two, 0.05, 0.7, -0.1) == 0.5);

  Draws d(stream_key(2, "multiplicity"), 0);
  PointCloud cloud(random_points(d, 200, 0.4), 0.5);
  for (int q = 0; q < 100; ++q) {
    double r = d.uniform(), v = d.uniform(-0.5, 0.5), b = d.uniform(0.01, 0.2);
    int hits = 0;
    for (const auto& p : cloud.points()) hits += std::abs(v - xi_poly(r, p)) <= b;
    CHECK(multiplicity(cloud, b, r, v) == double(hits) / 200);
  }
}

TEST_CASE("fiber counts") {
  Draws d(stream_key(3, "fibers"), 0);
  std::vector<double> v(300);
  for (auto& x : v) x = d.uniform(-1, 1);
  for (double b : {0.001, 0.01, 0.1}) {
    auto f = fiber_counts(v, b);
    auto f2 = fiber_counts(v, 2 * b);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t brute = 0;
      for (double y : v) brute += std::abs(y - v[i]) <= b;
      CHECK(f[i] == brute);
      CHECK(f2[i] >= f[i]);
    }
  }
  // symmetry: j in the fiber of i iff i in the fiber of j, so the incidence
  // count equals the number of close ordered pairs
  PointCloud cloud(random_points(d, 150, 0.3), 0.5);
  double r = 0.37, b = 0.02;
  std::vector<double> proj;
  for (const auto& w : cloud.points()) proj.push_back(xi_project(r, w));
  auto f = fiber_counts(proj, b);
  std::size_t total = 0, pairs = 0;
  double mass = 0;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    total += f[i];
    mass += multiplicity(cloud, b, r, proj[i]);
    for (std::size_t j = 0; j < proj.size(); ++j) pairs += std::abs(proj[i] - proj[j]) <= b;
  }
  CHECK(total == pairs);
  CHECK(double(total) == doctest::Approx(150 * mass).epsilon(1e-12));
}

TEST_CASE("planted kernel gives maximal fibers") {
  // {xi_{r0} = 0} is spanned by (1, 2 r0, 0) and (0, r0^2, 1)
  double r0 = (40 + 0.5) / 128;
  Draws d(stream_key(4, "kernel"), 0);
  std::vector<Traceless> pts;
  for (int i = 0; i < 60; ++i) {
    double a = d.uniform(-1e-3, 1e-3), c = d.uniform(-1e-3, 1e-3);
    pts.push_back(Traceless{a, 2 * r0 * a, 0} + Traceless{0, r0 * r0 * c, c});
  }
  PointCloud cloud(pts, 0.01);
  auto rep = linear_scan(cloud, 0, 0.5, 0.01, 1e-6, 128);
  CHECK(rep.rows[40].max_fiber == 60);
  for (std::size_t j = 0; j < 128; ++j)
    if (j != 40) CHECK(rep.rows[j].max_fiber < 60);
}

TEST_CASE("linear scan") {
  SUBCASE("small cloud branch") {
    PointCloud c({{0, 0.001, 0}, {0, 0.002, 0}}, 0.01);
    auto rep = linear_scan(c, 1, 0.5, 0.01, 0.05, 32);
    CHECK(rep.exceptional_set.empty());
    CHECK(rep.exceptional_fraction == 0);
  }
  SUBCASE("scale precondition") {
    PointCloud c({{0, 0.001, 0}, {0, 0.002, 0}, {0, 0.004, 0}}, 0.01);
    CHECK_THROWS_AS(linear_scan(c, 0, 0.5, 0.01, 1e-12, 8), Error);
  }
  SUBCASE("Cantor cloud on the w12 axis") {
    auto c = cantor_cloud(6, kAlpha, 0.01);
    CHECK(c.size() == 729);
    auto rep = linear_scan(c, 0, kAlpha, 0.01, 0.01 / 27, 64);
    CHECK(rep.exceptional_fraction <= 0.1);
    CHECK(rep.rows.size() == 64);
    CHECK(rep.exceptional_fraction == double(rep.exceptional_set.size()) / 64);
    auto csv = rep.to_csv();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 65);
  }
  SUBCASE("planted kernel direction") {
    auto c = cantor_cloud(7, kAlpha, 0.01, planted_kernel_direction(0.3));
    auto rep = linear_scan(c, 0, kAlpha, 0.01, 0.01 / 27, 128);
    CHECK(!rep.exceptional_set.empty());
    for (double r : rep.exceptional_set) CHECK(std::abs(r - 0.3) <= 0.05);
  }
}

TEST_CASE("frozen fit constant reproduces") {
  auto clouds = calibration_clouds(kAlpha, 0.01, 4);
  double c = calibrate_linear_c_fit(clouds, 0, kAlpha, 0.01, 1.0 / 27, 128, 1.0);
  CHECK(c <= kLinearCFit);
  CHECK(c >= 0.9 * kLinearCFit);
}

TEST_CASE("nonlinear scan") {
  SUBCASE("single point") {
    PointCloud c({{1e-4, 2e-4, -1e-4}}, 0.005);
    auto rep = nonlinear_scan(c, kAlpha, 0.01, 0.005, 0.005 / 27, 32);
    CHECK(rep.exceptional_set.empty());
  }
  SUBCASE("ball regularity by brute force") {
    auto c = cantor_cloud(4, kAlpha, 0.005);
    double best = 0;
    std::vector<double> scales{0.005, 0.0025, 0.00125, 0.000625, 0.0003125, 0.005 / 27};
    for (double b : scales)
      for (const auto& w : c.points()) {
        double m = 0;
        for (const auto& v : c.points()) m += (v - w).norm() <= b;
        best = std::max(best, m / double(c.size()) * std::pow(0.005 / b, kAlpha));
      }
    CHECK(ball_regularity(c, kAlpha, 0.005, 0.005 / 27) == doctest::Approx(best).epsilon(1e-12));
  }
  SUBCASE("Cantor cloud") {
    auto c = cantor_cloud(6, kAlpha, 0.005);
    auto rep = nonlinear_scan(c, kAlpha, 0.01, 0.005, 0.005 / 27, 64);
    CHECK(rep.exceptional_fraction <= 0.1);
  }
  SUBCASE("agrees with the linear family at small scale") {
    double b0 = 1e-3;
    auto c = fractal_cloud(21, 3, std::pow(3.0, -1 / kAlpha), 6, b0);
    auto lin = linear_scan(c, 0, kAlpha, 0.01, b0 / 27, 128);
    auto non = nonlinear_scan(c, kAlpha, 0.01, b0, b0 / 27, 128);
    int close = 0;
    for (std::size_t j = 0; j < 128; ++j) {
      double a = double(lin.rows[j].max_fiber), b = double(non.rows[j].max_fiber);
      close += std::abs(a - b) <= 0.1 * std::max(a, b);
    }
    CHECK(close >= 0.95 * 128);
  }
}
