#include <cmath>
#include <vector>

#include "doctest.h"
#include "ulab/error.hpp"
#include "ulab/margulis.hpp"
#include "ulab/rng.hpp"

using namespace ulab;

namespace {

// Composite midpoint rule on n cells with the norm taken from the adjoint action.
double sigma_oracle(const Traceless& w, double d, int n) {
  Mat2 a = one_param(OneParam::a, d).first();
  double s = 0, h = 3.0 / n;
  for (int i = 0; i < n; ++i) {
    double r = -1 + (i + 0.5) * h;
    Mat2 g = a * one_param(OneParam::u, r).first();
    s += std::pow(adjoint_r(g, w).norm(), -1.0 / 3);
  }
  return s * h / 3;
}

Traceless unit(Draws& d) {
  Traceless w{d.uniform(-1, 1), d.uniform(-1, 1), d.uniform(-1, 1)};
  return w * (1 / w.norm());
}

CosetPoint planted(const Traceless& w) {
  auto Y = diagonal_orbit();
  return act(exp_r(w), make_point(Y.point(Mat2::identity())));
}

}  // namespace

TEST_CASE("sigma average root vector") {
  for (double d : {2.0, 6.0, 10.0}) {
    auto s = sigma_contraction({0, 0.5, 0}, d);
    CHECK(s.value == doctest::Approx(std::exp(-d / 3) * std::pow(0.5, -1.0 / 3)).epsilon(1e-12));
    CHECK(s.quad_error <= 1e-6);
  }
}

TEST_CASE("sigma average against a fine midpoint rule") {
  auto s = sigma_contraction({0, 0, 1}, 6);
  double oracle = sigma_oracle({0, 0, 1}, 6, 1000000);
  CHECK(s.value == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(s.value <= 10 * std::exp(-2.0));
  Draws d(stream_key(1, "sigma-oracle"), 0);
  for (int i = 0; i < 5; ++i) {
    auto w = unit(d);
    CHECK(sigma_contraction(w, 4).value == doctest::Approx(sigma_oracle(w, 4, 200000)).epsilon(1e-5));
  }
}

TEST_CASE("sigma average homogeneity and rate") {
  Draws d(stream_key(2, "sigma-rate"), 0);
  for (int i = 0; i < 50; ++i) {
    auto w = unit(d);
    double c = 0.01 + 10 * d.uniform();
    CHECK(sigma_contraction(w * c, 5).value == doctest::Approx(std::pow(c, -1.0 / 3) * sigma_contraction(w, 5).value).epsilon(1e-8));
    for (double dd : {3.0, 4.0}) {
      double ratio = sigma_contraction(w, 2 * dd).value / sigma_contraction(w, dd).value;
      CHECK(ratio <= std::exp(-dd / 3) * 1.2);
    }
  }
  double worst = 0;
  for (double dd : {2.0, 4.0, 6.0, 8.0, 10.0})
    for (int i = 0; i < 200; ++i) worst = std::max(worst, std::exp(dd / 3) * sigma_contraction(unit(d), dd).value);
  CHECK(worst <= 10);
  CHECK_THROWS_AS(sigma_contraction({0, 0, 0}, 2), Error);
  CHECK_THROWS_AS(sigma_contraction({0, 1, 0}, 2, 16), Error);
}

TEST_CASE("f_Y evaluation") {
  auto Y = diagonal_orbit();
  auto far = generic_point();
  CHECK(f_Y_eval(far, Y) == doctest::Approx(std::pow(far.inj, -1.0 / 3)));
  CHECK(f_Y_eval(far, Y) >= std::pow(0.01, -1.0 / 3) - 1e-12);
  auto x = planted({0.3e-3, 1e-3, -0.2e-3});
  CHECK(f_Y_eval(x, Y) >= 10 - 1e-9);
  // a different representative of the same coset
  GroupElement gamma = GroupElement::product(Mat2{2, 1, 1, 1}, Mat2{1, 3, 0, 1});
  auto x2 = make_point(x.rep * gamma);
  CHECK(f_Y_eval(x2, Y) == doctest::Approx(f_Y_eval(x, Y)).epsilon(1e-6));
}

TEST_CASE("f_Y is comparable to the distance to Y") {
  auto Y = diagonal_orbit();
  Draws d(stream_key(3, "fY-dist"), 0);
  for (int i = 0; i < 20; ++i) {
    double scale = std::pow(10.0, -3 - 6 * d.uniform());
    auto x = planted(unit(d) * scale);
    double dist = dist_to_orbit(x, Y, 4);
    double ratio = f_Y_eval(x, Y) * std::cbrt(dist);
    CHECK(ratio >= 0.5);
    CHECK(ratio <= 2 * Y.vol_proxy);
  }
}

TEST_CASE("contraction sweep") {
  auto Y = diagonal_orbit();
  auto x = planted(Traceless{0.3, 1, -0.5} * 1e-12);
  double f0 = f_Y_eval(x, Y);
  auto sweep = contraction_sweep(x, Y, 6, 8, 200, 3);
  REQUIRE(sweep.size() == 8);
  double prev = f0;
  bool floor = false;
  for (const auto& s : sweep) {
    if (!floor) CHECK(s.f.value <= 0.5 * prev);
    floor = floor || s.f.value <= 2 * s.floor.value;
    prev = s.f.value;
  }
  CHECK(floor);
  CHECK(sweep.back().f.value >= sweep.back().floor.value - 1e-12);
  auto again = contraction_sweep(x, Y, 6, 8, 200, 3);
  for (std::size_t k = 0; k < 8; ++k) CHECK(again[k].f.value == sweep[k].f.value);
  CHECK_THROWS_AS(contraction_sweep(x, Y, 3, 2, 10, 1), Error);
  CHECK_THROWS_AS(contraction_sweep(x, Y, 6, 9, 10, 1), Error);
}

TEST_CASE("far start plateaus") {
  auto Y = diagonal_orbit();
  auto sweep = contraction_sweep(generic_point(), Y, 6, 6, 200, 4);
  for (const auto& s : sweep) CHECK(s.f.value <= 3 * std::pow(0.01, -1.0 / 3));
}

TEST_CASE("averaged returns") {
  auto Y = diagonal_orbit();
  auto x = generic_point();
  std::vector<double> est;
  for (double logT : {8.0, 10.0, 12.0}) {
    auto e = averaged_return(x, Y, logT, 400, 5);
    CHECK(e.value >= std::pow(0.01, -1.0 / 3) - 1e-9);
    est.push_back(e.value);
  }
  double lo = *std::min_element(est.begin(), est.end()), hi = *std::max_element(est.begin(), est.end());
  CHECK(hi <= 1.5 * lo);

  // [0, 1] lies in [-1, 2], so the short average is at most 3 times the long one
  auto shrt = averaged_return(x, Y, 10, 400, 6, 0, 1);
  auto lng = averaged_return(x, Y, 10, 1200, 6, -1, 2);
  CHECK(shrt.value <= 3 * lng.value + 3 * (shrt.std_error + lng.std_error));

  // a start at distance T^{-2} keeps returning: the average grows like T^{1/3}
  std::vector<double> lt, le;
  for (double logT : {8.0, 10.0, 12.0}) {
    auto p = planted(Traceless{0.3, 1, -0.5} * std::exp(-2 * logT));
    lt.push_back(logT);
    le.push_back(std::log(averaged_return(p, Y, logT, 400, 7).value));
  }
  CHECK(fit_slope(lt, le) == doctest::Approx(1.0 / 3).epsilon(0.3));
  CHECK_THROWS_AS(averaged_return(x, Y, 6, 10, 1), Error);
}
