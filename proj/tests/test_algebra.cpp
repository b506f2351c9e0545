#include <cmath>

#include "doctest.h"
#include "ulab/algebra.hpp"
#include "ulab/rng.hpp"

using namespace ulab;

namespace {

Traceless random_traceless(Draws& d, double scale) {
  return {d.uniform(-scale, scale), d.uniform(-scale, scale), d.uniform(-scale, scale)};
}

// Plain matrix exponential by Taylor series with scaling and squaring.
Mat2 series_exp(const Mat2& x) {
  int k = 0;
  double n = max_abs(x);
  while (n > 0.01) {
    n /= 2;
    ++k;
  }
  Mat2 y = x * std::ldexp(1.0, -k);
  Mat2 term = Mat2::identity(), sum = Mat2::identity();
  for (int i = 1; i < 20; ++i) {
    term = term * y * (1.0 / i);
    sum = sum + term;
  }
  for (int i = 0; i < k; ++i) sum = sum * sum;
  return sum;
}

}  // namespace

TEST_CASE("one-parameter subgroups") {
  CHECK(one_param(OneParam::a, 0).dist_to_identity() == 0);
  auto u = one_param(OneParam::u, 1.0);
  CHECK(u.first() == Mat2{1, 1, 0, 1});
  CHECK(u.second() == Mat2{1, 1, 0, 1});
  auto n = one_param(OneParam::n, 0.5, 0.25);
  CHECK(n.first() == Mat2{1, 0.75, 0, 1});
  CHECK(n.second() == Mat2{1, 0.5, 0, 1});
  auto v = one_param(OneParam::v, 0.3);
  CHECK(v.first() == Mat2{1, 0.3, 0, 1});
  CHECK(v.second() == Mat2::identity());
  CHECK_THROWS_AS(one_param(OneParam::n, 0.5), Error);

  // a_t u_r a_{-t} = u_{e^t r}
  for (double t : {-3.0, 0.5, 7.0}) {
    auto lhs = one_param(OneParam::a, t) * one_param(OneParam::u, 0.2) * one_param(OneParam::a, -t);
    auto rhs = one_param(OneParam::u, std::exp(t) * 0.2);
    CHECK((lhs * rhs.inverse()).dist_to_identity() < 1e-12);
  }
}

TEST_CASE("exp and log agree with series oracle") {
  Draws d(11, 0);
  for (int i = 0; i < 200; ++i) {
    Traceless x = random_traceless(d, 1.5);
    Mat2 e = sl2_exp(x);
    CHECK(max_abs(e - series_exp(x.matrix())) < 1e-12 * std::max(1.0, max_abs(e)));
    Traceless small = x * 1e-3;
    CHECK((sl2_log(sl2_exp(small)) - small).norm() < 1e-15);
    CMat2 cx = to_complex(x.matrix()) * cplx(0.3, 0.7);
    CHECK(max_abs(sl2_log(sl2_exp(cx)) - cx) < 1e-12);
  }
  CHECK_THROWS_AS(sl2_log(Mat2{-2, 0, 0, -0.5}), Error);
}

TEST_CASE("adjoint") {
  auto a = one_param(OneParam::a, 1.3);
  auto e12 = LieVector::in_h({0, 1, 0});
  CHECK(std::abs(adjoint(a, e12).h.x12 - std::exp(1.3)) < 1e-12);

  double r = 0.7;
  auto w = adjoint(one_param(OneParam::u, r), LieVector::in_r({1, 0, 0}));
  CHECK(std::abs(w.r.x12 + 2 * r) < 1e-15);
  CHECK(w.h.norm() == 0);

  Draws d(12, 0);
  for (int i = 0; i < 50; ++i) {
    LieVector v{Model::ProductRR, random_traceless(d, 1), random_traceless(d, 1)};
    auto id = adjoint(GroupElement::identity(), v);
    CHECK((id.h - v.h).norm() == 0);
    CHECK((id.r - v.r).norm() == 0);
    // Ad(g) exp(v) = g exp(v) g^{-1}
    Mat2 h = sl2_exp(random_traceless(d, 0.5));
    auto g = GroupElement::diagonal(h);
    auto lhs = exp(adjoint(g, v));
    auto rhs = g * exp(v) * g.inverse();
    CHECK((lhs * rhs.inverse()).dist_to_identity() < 1e-12);
  }
}

TEST_CASE("BCH split ProductRR") {
  Draws d(13, 0);
  auto w = Traceless{0.01, -0.004, 0.006};
  auto sp = bch_split(exp_r(w));
  CHECK(sp.h.dist_to_identity() < 1e-15);
  CHECK((sp.w.r - w).norm() < 1e-15);
  for (int i = 0; i < 1000; ++i) {
    Traceless w1 = random_traceless(d, 0.01), w2 = random_traceless(d, 0.01);
    auto g = exp_r(w1) * exp_r(-w2);
    auto s = bch_split(g);
    CHECK(s.residual <= 1e-10);
    double ratio = s.w.r.norm() / (w1 - w2).norm();
    CHECK(ratio >= 2.0 / 3.0);
    CHECK(ratio <= 1.5);
  }
}

TEST_CASE("BCH split ComplexC: Newton agrees with the conjugation formula") {
  Draws d(14, 0);
  for (int i = 0; i < 200; ++i) {
    Traceless x = random_traceless(d, 0.05), w = random_traceless(d, 0.05);
    LieVector v{Model::ComplexC, x, w};
    auto g = exp(v) * exp(LieVector::in_r(random_traceless(d, 0.02), Model::ComplexC));
    auto s = bch_split(g);
    auto o = bch_split_conjugation(g);
    CHECK(s.residual <= 1e-12);
    CHECK((s.w.r - o.w.r).norm() < 1e-10);
    CHECK_NOTHROW(s.h.h_matrix());
  }
  // Far from identity: either a valid split or NoConvergence.
  auto far = GroupElement::complex({cplx(1.2, 0.4), cplx(0.3, -0.2), cplx(0.1, 0.3), cplx(0, 0)});
  far = far.renormalized();
  try {
    auto s = bch_split(far);
    CHECK(max_abs((s.h * exp(s.w)).cmat() - far.cmat()) <= 1e-10);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoConvergence);
  }
}

TEST_CASE("xi projection") {
  CHECK(std::abs(xi_project(0.3, {1, 0, 0}) + 0.6) < 1e-15);
  CHECK(xi_project(1.0, {0, 1, 2}) == -1.0);
  Draws d(15, 0);
  for (int i = 0; i < 100; ++i) {
    double r = d.uniform();
    Traceless w = random_traceless(d, 1);
    auto ad = adjoint(one_param(OneParam::u, r), LieVector::in_r(w));
    CHECK(std::abs(ad.r.x12 - xi_project(r, w)) <= 1e-12);
  }
}

TEST_CASE("zeta projection") {
  Traceless w{0.003, -0.002, 0};
  CHECK(std::abs(zeta_project(0, w) - w.x12 / (1 + w.x11)) < 1e-16);
  for (double r : {0.0, 0.4, 1.0}) CHECK(zeta_project(r, {}) == 0);

  // Direct factorization u_r f(w) u_{-r} = lower * (1 zeta; 0 1).
  Draws d(16, 0);
  for (int i = 0; i < 100; ++i) {
    Traceless v = random_traceless(d, 0.01);
    double r = d.uniform();
    Mat2 f{1 + v.x11, v.x12, v.x21, (1 + v.x12 * v.x21) / (1 + v.x11)};
    Mat2 m = Mat2{1, r, 0, 1} * f * Mat2{1, -r, 0, 1};
    CHECK(std::abs(m.b / m.a - zeta_project(r, v)) < 1e-14);
    for (double eps : {1e-3, 1e-4}) {
      double err = std::abs(zeta_project(r, v * (eps / 0.01)) - (eps / 0.01) * xi_project(r, v));
      CHECK(err <= 10 * eps * eps);
    }
  }
  CHECK_THROWS_AS(zeta_project(1.0, {-0.5, 0, -0.5}), Error);
}

TEST_CASE("prd coordinates and boxes") {
  auto u = GroupElement::diagonal(Mat2{1, 0.05, 0, 1});
  auto res = box_contains(BoxSpec::BH(0.1), u);
  CHECK(res.inside);
  CHECK(res.coords.s == 0);
  CHECK(res.coords.tau == 0);
  CHECK(res.coords.r == doctest::Approx(0.05));

  auto um = one_param(OneParam::u_minus, 0.01);
  CHECK_FALSE(box_contains(BoxSpec::QH(0.1, 0.01, 2), um).inside);
  CHECK(box_contains(BoxSpec::QH(0.1, 0.01, 2), one_param(OneParam::u_minus, 0.001)).inside);

  Draws d(17, 0);
  for (int i = 0; i < 100; ++i) {
    double s = d.uniform(-1, 1), tau = d.uniform(-2, 2), r = d.uniform(-1, 1);
    auto c = prd_coords(prd(s, tau, r));
    REQUIRE(c.has_value());
    CHECK(std::abs(c->s - s) <= 1e-12);
    CHECK(std::abs(c->tau - tau) <= 1e-12);
    CHECK(std::abs(c->r - r) <= 1e-12);
  }
  CHECK_THROWS_AS(box_contains(BoxSpec::BH(0.1), GroupElement::diagonal(Mat2{0, 1, -1, 0})), Error);
  CHECK_THROWS_AS(box_contains(BoxSpec::BH(0.1), one_param(OneParam::v, 0.01)), Error);

  // Boundary layer: interior point versus a point near the face.
  BoxSpec e = BoxSpec::E(1e-4, 0.01);
  e.boundary_fraction = 0.1;
  auto mid = box_contains(e, GroupElement::diagonal(prd(0, 0, 0)));
  auto edge = box_contains(e, GroupElement::diagonal(prd(0, 0, 0.0095)));
  CHECK(mid.inside);
  CHECK_FALSE(mid.in_boundary);
  CHECK(edge.inside);
  CHECK(edge.in_boundary);

  auto bg = box_contains(BoxSpec::BG(0.01), exp_r({0.001, 0.002, 0}) * GroupElement::diagonal(prd(0.001, 0, 0)));
  CHECK(bg.inside);
}

TEST_CASE("commutation identities for prd coordinates") {
  Draws d(18, 0);
  for (int i = 0; i < 100; ++i) {
    double s0 = d.uniform(-0.3, 0.3), t0 = d.uniform(-1, 1), r0 = d.uniform(-0.3, 0.3);
    double s = d.uniform(-0.3, 0.3), t = d.uniform(-1, 1), r = d.uniform(-0.3, 0.3);
    auto c = prd_coords(prd(s, t, r) * prd(s0, t0, r0));
    REQUIRE(c.has_value());
    double k = 1 + r * s0;
    CHECK(std::abs(c->r - (r / (std::exp(t0) * k) + r0)) <= 1e-10);
    CHECK(std::abs(c->s - (s + s0 / (std::exp(t) * k))) <= 1e-10);
    // With a_t = diag(e^{t/2}, e^{-t/2}) the A-coordinate picks up 2 log(1 + r s0).
    CHECK(std::abs(c->tau - (t + t0 + 2 * std::log(k))) <= 1e-10);
  }
}

TEST_CASE("dist-sheet conjugation bound") {
  Draws d(19, 0);
  double beta = 0.01;
  for (int i = 0; i < 500; ++i) {
    Mat2 h = prd(d.uniform(-2 * beta, 2 * beta), d.uniform(-2 * beta, 2 * beta), d.uniform(-2 * beta, 2 * beta));
    Traceless w = random_traceless(d, beta);
    CHECK(adjoint_r(h, w).norm() <= 2 * w.norm());
  }
}

TEST_CASE("renormalization keeps determinant near one") {
  auto g = one_param(OneParam::a, 0.01) * one_param(OneParam::u, 0.3);
  GroupElement acc = GroupElement::identity();
  for (int i = 0; i < 1000; ++i) acc = acc * g * g.inverse();
  CHECK(std::abs(acc.first().det() - 1) < 1e-9);
  CHECK(acc.dist_to_identity() < 1e-9);
}
