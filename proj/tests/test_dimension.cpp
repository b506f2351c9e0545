#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ulab/dimension.hpp"
#include "ulab/error.hpp"
#include "ulab/rng.hpp"

using namespace ulab;

namespace {

// min over subsets of size n - R of the sum over members other than w.
double energy_oracle(const std::vector<Traceless>& pts, double b0, int R, double alpha, std::size_t w) {
  const std::size_t n = pts.size();
  if (n <= std::size_t(R)) return std::pow(b0, -alpha);
  double best = INFINITY;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::size_t(__builtin_popcount(mask)) != n - std::size_t(R)) continue;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if ((mask >> i & 1) && i != w) s += std::pow((pts[i] - pts[w]).norm(), -alpha);
    best = std::min(best, s);
  }
  return best == 0 ? std::pow(b0, -alpha) : best;
}

std::vector<Traceless> random_points(Draws& d, std::size_t n, double radius) {
  std::vector<Traceless> p;
  for (std::size_t i = 0; i < n; ++i)
    p.push_back({d.uniform(-radius, radius), d.uniform(-radius, radius), d.uniform(-radius, radius)});
  return p;
}

// Cubic grid of side-length `count` with spacing h, starting at corner c.
std::vector<Traceless> grid(double c, double h, int count) {
  std::vector<Traceless> p;
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < count; ++j)
      for (int k = 0; k < count; ++k) p.push_back({c + (i + 0.5) * h, c + (j + 0.5) * h, c + (k + 0.5) * h});
  return p;
}

constexpr double kEta = 0.005;
constexpr double kBeta = kEta * kEta;

Traceless sl2_log_direct(const Mat2& h, const Traceless& w, const Traceless& w0) {
  return sl2_log(h * sl2_exp(w) * sl2_exp(-w0) * h.inverse());
}

}  // namespace

TEST_CASE("energy examples") {
  std::vector<Traceless> two{{0, 0, 0}, {0.1, 0, 0}};
  CHECK(energy(two, 0.5, 2, 0.7, 0) == doctest::Approx(std::pow(0.5, -0.7)));
  double d = 0.01, a = 0.6;
  std::vector<Traceless> line{{0, 0, 0}, {d, 0, 0}, {2 * d, 0, 0}};
  CHECK(energy(line, 1, 0, a, 0) == doctest::Approx(std::pow(d, -a) * (1 + std::pow(2, -a))).epsilon(1e-13));
}

TEST_CASE("energy matches exhaustive subsets") {
  Draws d(stream_key(5, "energy-oracle"), 0);
  for (int c = 0; c < 50; ++c) {
    std::size_t n = 2 + std::size_t(d.uniform() * 11);
    auto pts = random_points(d, n, 0.3);
    double alpha = 0.2 + 0.8 * d.uniform();
    for (int R : {0, 1, 3})
      for (std::size_t w = 0; w < n; ++w)
        CHECK(energy(pts, 0.5, R, alpha, w) == doctest::Approx(energy_oracle(pts, 0.5, R, alpha, w)).epsilon(1e-12));
  }
}

TEST_CASE("energy monotone in R and under refinement") {
  Draws d(stream_key(6, "energy-monotone"), 0);
  for (int c = 0; c < 20; ++c) {
    auto pts = random_points(d, 20, 0.3);
    for (int R = 0; R < 6; ++R) CHECK(energy(pts, 0.5, R + 1, 0.5, 0) <= energy(pts, 0.5, R, 0.5, 0));
    // with a nonempty remainder the truncated sum only grows
    auto more = pts;
    more.push_back({d.uniform(-0.3, 0.3), d.uniform(-0.3, 0.3), 0});
    for (int R : {0, 2, 5}) CHECK(energy(more, 0.5, R, 0.5, 0) >= energy(pts, 0.5, R, 0.5, 0));
  }
}

TEST_CASE("point cloud validation, index and JSON") {
  CHECK_THROWS_AS(PointCloud({{0.6, 0, 0}}, 0.5), Error);
  CHECK_THROWS_AS(PointCloud({{0.1, 0, 0}, {0.1, 0, 0}}, 0.5), Error);
  auto F = fractal_cloud(3, 3, 0.3, 5, 0.25, 3, 0, 2);
  CHECK(F.size() == 243);
  CHECK(F.index_consistent());
  std::size_t total = 0;
  for (const auto& [key, members] : F.cubes(2)) {
    total += members.size();
    for (auto i : members) CHECK(cube_of(F[i], 3, 2) == key);
  }
  CHECK(total == F.size());
  auto G = PointCloud::from_json(F.to_json());
  REQUIRE(G.size() == F.size());
  for (std::size_t i = 0; i < F.size(); ++i) CHECK((G[i] - F[i]).norm() == 0);
  CHECK(G.b0() == F.b0());
  CHECK(G.M() == F.M());
  CHECK(G.k0() == F.k0());
  CHECK(G.k1() == F.k1());
  CHECK(G.index_consistent());
  CHECK_THROWS_AS(PointCloud::from_json("{\"points\": 3}"), Error);
}

TEST_CASE("regularize uniform grids") {
  set_warn_sink([](const std::string&) {});
  SUBCASE("full grid is one part") {
    // level-2 cubes of side 1/16, grid [-1/4, 1/4)^3 at their centres
    PointCloud F(grid(-0.25, 1.0 / 16, 8), 0.5, 2, 1, 2);
    auto reg = regularize(F, 2, 1, 2, 0.1);
    CHECK(verify_regularization(F, reg) == "");
    CHECK(reg.discard.empty());
    REQUIRE(reg.parts.size() == 1);
    CHECK(reg.parts[0].members.size() == F.size());
    // exact log2 counts: 1 point per level-2 cube, 64 per level-1 cube, 64 per coarser cube
    const auto& tau = reg.parts[0].tau;
    CHECK(tau[std::size_t(2 - (1 - 10))] == 0);
    CHECK(tau[std::size_t(1 - (1 - 10))] == 3);
    CHECK(tau[std::size_t(0 - (1 - 10))] == 3);
  }
  SUBCASE("two separated grids") {
    auto pts = grid(-0.75, 1.0 / 16, 4);
    auto b = grid(0.5, 1.0 / 16, 4);
    pts.insert(pts.end(), b.begin(), b.end());
    PointCloud F(pts, 1, 2, 1, 2);
    auto reg = regularize(F, 2, 1, 2, 0.1);
    CHECK(verify_regularization(F, reg) == "");
    CHECK(reg.parts.size() <= 2);
    CHECK(reg.discard.empty());
  }
  set_warn_sink(nullptr);
}

TEST_CASE("regularize fractal clouds") {
  set_warn_sink([](const std::string&) {});
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto F = fractal_cloud(seed, 3, 0.3, 7, std::ldexp(1, -6), 6, 1, 3);
    auto reg = regularize(F, 6, 1, 3, 0.01);
    CHECK(verify_regularization(F, reg) == "");
    CHECK(double(reg.discard.size()) <= std::pow(0.01, 0.25) * double(F.size()));
    for (const auto& p : reg.parts) CHECK(double(p.members.size()) >= 1e-4 * double(F.size()));
  }
  set_warn_sink(nullptr);
}

TEST_CASE("regularize replay detects tampering") {
  set_warn_sink([](const std::string&) {});
  auto F = fractal_cloud(9, 3, 0.3, 6, 0.25, 3, 0, 2);
  auto reg = regularize(F, 3, 0, 2, 0.05);
  REQUIRE(verify_regularization(F, reg) == "");
  auto bad = reg;
  bad.parts[0].tau.back() += 5;
  CHECK(verify_regularization(F, bad) != "");
  bad = reg;
  bad.parts[0].members.pop_back();
  CHECK(verify_regularization(F, bad) != "");
  set_warn_sink(nullptr);
}

TEST_CASE("regularize cannot avoid boundaries") {
  set_warn_sink([](const std::string&) {});
  // points on cube corners of the unshifted grid, and only that grid is tried
  std::vector<Traceless> pts{{0, 0, 0}, {0.25, 0.25, 0}, {-0.25, 0, 0.25}};
  PointCloud F(pts, 0.5, 2, 0, 1);
  RegularizeOptions opt;
  opt.max_shifts = 1;
  try {
    regularize(F, 2, 0, 1, 0.1, opt);
    FAIL("expected CannotRegularize");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CannotRegularize);
  }
  set_warn_sink(nullptr);
}

TEST_CASE("cone_build validation") {
  auto y = identity_coset();
  PointCloud F({{0, 0, 0}, {1e-6, 0, 0}}, kBeta);
  auto c = cone_build(y, F, kBeta, kEta);
  CHECK(c.adm == 1);
  CHECK(c.weights.size() == 2);
  CHECK_THROWS_AS(cone_build(y, F, kBeta, 2 * kEta), Error);
  PointCloud far({{0, 0, 0}, {2e-5, 0, 0}}, 1);
  CHECK_THROWS_AS(cone_build(y, PointCloud({{0, 0, 0}, {3e-5, 0, 0}}, 1), kBeta, kEta), Error);
  CHECK_NOTHROW(cone_build(y, far, kBeta, kEta));
  // inj capped at 0.01 only allows eta <= 0.005
  try {
    cone_build(y, F, 1e-4, 1e-2);
    FAIL("expected InjectivityViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InjectivityViolation);
  }
  CHECK(cone_build(y, F, kBeta, kEta, {{0.5, 2, 0}, {1, 1, 3}}).adm == 3);
}

TEST_CASE("transversal sets") {
  auto y = identity_coset();
  SUBCASE("single sheet") {
    auto c = cone_build(y, PointCloud({{1e-6, -2e-6, 0}}, kBeta), kBeta, kEta);
    auto I = transversal_set(c, Mat2::identity(), {0, {1e-5, -1e-5, 0.003}}, 0.1);
    REQUIRE(I.vectors.size() == 1);
    CHECK(I.vectors[0].norm() == 0);
    auto fp = fpsi_of(I, 0.1, 2, 0.5);
    CHECK(fp.f == fp.psi);
    CHECK(fp.f == doctest::Approx(std::pow(0.1 * I.inj, -0.5)));
  }
  SUBCASE("two sheets") {
    Traceless w0{3e-6, 1e-5, -4e-6};
    auto c = cone_build(y, PointCloud({{0, 0, 0}, w0}, kBeta), kBeta, kEta);
    for (PrdCoords h : {PrdCoords{}, PrdCoords{2e-5, -1e-5, 0.004}, PrdCoords{-2e-5, 2e-5, -0.0045}}) {
      auto I = transversal_set(c, Mat2::identity(), {0, h}, 0.1);
      REQUIRE(I.vectors.size() == 2);
      double ratio = I.vectors[1].norm() / w0.norm();
      CHECK(ratio >= 0.5);
      CHECK(ratio <= 2);
      auto oracle = sl2_log_direct(prd(h.s, h.tau, h.r), w0, {});
      CHECK((I.vectors[1] - oracle).norm() <= 1e-12);
    }
  }
  SUBCASE("off-cone point rejected") {
    auto c = cone_build(y, PointCloud({{0, 0, 0}}, kBeta), kBeta, kEta);
    CHECK_THROWS_AS(transversal_set(c, Mat2::identity(), {0, {0, 0, 0.01}}, 0.1), Error);
    CHECK_THROWS_AS(transversal_set(c, Mat2::identity(), {0, {}}, 0.2), Error);
  }
}

TEST_CASE("transversal count sandwich on random cones") {
  Draws d(stream_key(8, "sandwich"), 0);
  auto y = identity_coset();
  for (int c = 0; c < 20; ++c) {
    auto pts = random_points(d, 30, 0.9 * kBeta);
    PointCloud F(pts, kBeta);
    auto cone = cone_build(y, F, kBeta, kEta);
    std::size_t z = std::size_t(d.uniform() * 30);
    PrdCoords h{d.uniform(-0.9, 0.9) * kBeta, d.uniform(-0.9, 0.9) * kBeta, d.uniform(-0.9, 0.9) * kEta};
    auto I = transversal_set(cone, Mat2::identity(), {z, h}, 0.1);
    CHECK(I.vectors.size() == 30);  // b inj(hz) is far above beta
    for (double delta : {kBeta / 8, kBeta / 4, kBeta / 2, kBeta}) {
      auto in_F = [&](double rad) {
        return std::count_if(pts.begin(), pts.end(), [&](const Traceless& w) { return (w - pts[z]).norm() < rad; });
      };
      auto in_I = std::count_if(I.vectors.begin(), I.vectors.end(), [&](const Traceless& v) { return v.norm() < delta; });
      CHECK(in_F(delta / 2) <= in_I);
      CHECK(in_I <= in_F(2 * delta));
    }
  }
}

TEST_CASE("f and psi against brute force") {
  Draws d(stream_key(9, "fpsi"), 0);
  auto y = identity_coset();
  for (int c = 0; c < 10; ++c) {
    std::size_t n = c < 5 ? 3 : 6;
    auto pts = random_points(d, n, 0.9 * kBeta);
    auto cone = cone_build(y, PointCloud(pts, kBeta), kBeta, kEta);
    PrdCoords h{d.uniform(-0.9, 0.9) * kBeta, d.uniform(-0.9, 0.9) * kBeta, d.uniform(-0.9, 0.9) * kEta};
    Mat2 hh = prd(h.s, h.tau, h.r);
    double alpha = 0.5;
    for (double b : {0.1, 1e-3}) {
      double inj = make_point(cone_element(cone, Mat2::identity(), {0, h})).inj;
      std::vector<Traceless> I{{}};
      for (std::size_t j = 1; j < n; ++j) {
        auto v = sl2_log_direct(hh, pts[j], pts[0]);
        if (v.norm() < b * inj) I.push_back(v);
      }
      for (int R : {0, 1, 2}) {
        auto fp = margulis_fpsi(cone, Mat2::identity(), {0, h}, b, R, alpha);
        double floor = std::pow(b * inj, -alpha);
        CHECK(fp.count == I.size());
        CHECK(fp.psi == doctest::Approx(floor * double(std::max<std::size_t>(1, I.size()))));
        double oracle = energy_oracle(I, b * inj, R, alpha, 0);
        if (I.size() <= std::size_t(R)) oracle = floor;
        CHECK(fp.f == doctest::Approx(oracle).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("psi scaling and the invariance comparison") {
  TransversalSet I{{{}, {1e-6, 0, 0}}, 0.01};
  double a = 0.7;
  CHECK(fpsi_of(I, 0.05, 0, a).psi / fpsi_of(I, 0.025, 0, a).psi == doctest::Approx(std::pow(2, -a)).epsilon(1e-14));

  Draws d(stream_key(10, "psi-compare"), 0);
  auto y = identity_coset();
  for (int c = 0; c < 20; ++c) {
    auto pts = random_points(d, 25, 0.9 * kBeta);
    auto cone = cone_build(y, PointCloud(pts, kBeta), kBeta, kEta);
    std::size_t z = std::size_t(d.uniform() * 25);
    PrdCoords h{d.uniform(-0.9, 0.9) * kBeta, d.uniform(-0.9, 0.9) * kBeta, d.uniform(-0.9, 0.9) * kEta};
    double b = 1e-3 * (0.5 + d.uniform());
    double lhs = 4 * margulis_fpsi(cone, Mat2::identity(), {z, {}}, 2 * b, 0, a).psi;
    double rhs = margulis_fpsi(cone, Mat2::identity(), {z, h}, b, 0, a).psi;
    CHECK(lhs >= rhs);
  }
}

TEST_CASE("dimension step") {
  auto y = identity_coset();
  const double ell = 22, alpha = 0.5, b = 0.1;
  SUBCASE("collinear cloud loses energy") {
    Traceless dir{0.3, 1, 0.5};
    std::vector<Traceless> pts;
    for (int j = 0; j < 64; ++j) pts.push_back(dir * (0.9 * kBeta * (2.0 * j / 63 - 1)));
    auto cone = cone_build(y, PointCloud(pts, kBeta), kBeta, kEta);
    int decreased = 0;
    for (int i = 0; i < 64; ++i) {
      auto rep = dimension_step(cone, ell, (i + 0.5) / 64, b, 1, alpha, 4, 3);
      decreased += rep.energy_after < rep.energy_before;
      CHECK(rep.sheet_counts_ok);
    }
    CHECK(decreased >= 52);
  }
  SUBCASE("single sheet stays at the floor") {
    auto cone = cone_build(y, PointCloud({{0, 0, 0}}, kBeta), kBeta, kEta);
    auto rep = dimension_step(cone, ell, 0.4, b, 0, alpha, 8, 4);
    CHECK(rep.at_floor);
    CHECK(rep.offspring.size() + rep.dropped == 8);
    for (const auto& o : rep.offspring) {
      CHECK(o.F.size() == 1);
      auto fp = margulis_fpsi(o, Mat2::identity(), {0, {}}, b, 0, alpha);
      CHECK(fp.f == fp.psi);
    }
    CHECK(rep.energy_after == doctest::Approx(std::pow(kBeta, -alpha)));
  }
  SUBCASE("offspring sheet counts") {
    Draws d(stream_key(12, "step-counts"), 0);
    for (int c = 0; c < 10; ++c) {
      auto cone = cone_build(y, PointCloud(random_points(d, 12, 0.9 * kBeta), kBeta), kBeta, kEta);
      auto rep = dimension_step(cone, ell, d.uniform(), b, 1, alpha, 4, std::uint64_t(c));
      CHECK(rep.sheet_counts_ok);
      std::size_t sheets = 0;
      for (const auto& o : rep.offspring) sheets += o.F.size();
      CHECK(sheets <= 4 * 12);
    }
  }
  SUBCASE("regime and determinism") {
    auto cone = cone_build(y, PointCloud({{0, 0, 0}, {1e-6, 2e-6, 0}}, kBeta), kBeta, kEta);
    try {
      dimension_step(cone, 10, 0.3, b, 0, alpha, 4, 1);
      FAIL("expected RegimeViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RegimeViolation);
    }
    CHECK(dimension_step(cone, ell, 0.3, b, 0, alpha, 8, 5).to_json() ==
          dimension_step(cone, ell, 0.3, b, 0, alpha, 8, 5).to_json());
  }
}
