#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "ulab/closing.hpp"
#include "ulab/error.hpp"
#include "ulab/flow.hpp"

using namespace ulab;

namespace {

// Every gamma in SL2(Z) with entries bounded by K, brute force.
std::vector<Mat2> sl2z_box(int K) {
  std::vector<Mat2> out;
  for (int a = -K; a <= K; ++a)
    for (int b = -K; b <= K; ++b)
      for (int c = -K; c <= K; ++c)
        for (int d = -K; d <= K; ++d)
          if (a * d - b * c == 1) out.push_back({double(a), double(b), double(c), double(d)});
  return out;
}

bool is_pm_identity(const Mat2& c) {
  return max_abs(c - Mat2::identity()) < 1e-9 || max_abs(c + Mat2::identity()) < 1e-9;
}

std::vector<Mat2> brute_short(const Mat2& g, double S, int K) {
  std::vector<Mat2> out;
  Mat2 gi = g.inverse();
  for (const auto& gam : sl2z_box(K)) {
    Mat2 c = g * gam * gi;
    if (max_abs(c) <= S && !is_pm_identity(c)) out.push_back(c);
  }
  return out;
}

bool contains(const std::vector<Mat2>& v, const Mat2& c) {
  return std::any_of(v.begin(), v.end(), [&](const Mat2& m) { return max_abs(m - c) < 1e-8; });
}

CosetPoint on_diagonal(const Mat2& h) { return make_point(diagonal_orbit().point(h)); }

}  // namespace

TEST_CASE("short elements match a brute-force box search") {
  for (auto x : {identity_coset(), haar_sample(3), haar_sample(11)}) {
    const double S = 3;
    auto got = short_identifications(x, S);
    auto want = brute_short(x.rep.second(), S, 30);
    CHECK(got.size() == want.size());
    for (const auto& id : got) CHECK(contains(want, id.c));
  }
}

TEST_CASE("on a periodic orbit every short element is an exact identification") {
  auto x = on_diagonal(prd(0.2, -0.4, 0.7));
  auto ids = short_identifications(x, 4);
  REQUIRE(!ids.empty());
  for (const auto& id : ids) CHECK(id.dist < kExactIdentification);
  CHECK(closing_f(x, 1.0 / 3, 4) == doctest::Approx(std::pow(x.inj, -1.0 / 3)));
}

TEST_CASE("closing_f against the conjugation formula near the diagonal orbit") {
  // x = (E(w0) g, g): the return through c in Stab(g) is log(c E(w0) c^{-1} E(-w0)).
  Mat2 g = prd(0.1, 0.3, 0.45);
  for (double scale : {1e-6, 1e-4}) {
    Traceless w0 = Traceless{0.3, 1, -0.5} * scale;
    auto x = make_point(exp_r(w0) * diagonal_orbit().point(g));
    const double S = 4, alpha = 1.0 / 3;
    double want = 0;
    bool any = false;
    Mat2 rep = x.rep.second();
    for (const auto& c : brute_short(rep, S, 40)) {
      Traceless w = sl2_log(c * sl2_exp(w0) * c.inverse() * sl2_exp(-w0));
      if (w.norm() <= kExactIdentification || w.norm() >= x.inj) continue;
      want += std::pow(w.norm(), -alpha);
      any = true;
    }
    REQUIRE(any);
    CHECK(closing_f(x, alpha, S) == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("closing_f is invariant under re-reduction") {
  auto x = make_point(exp_r(Traceless{0.2, -0.1, 0.4} * 1e-5) * diagonal_orbit().point(prd(0, 0.5, 0.2)));
  // a window edge off the integer entries that g gamma g^{-1} can take
  const double S = 4.37;
  double f0 = closing_f(x, 0.5, S);
  for (const auto& gam : {Mat2{2, 1, 1, 1}, Mat2{1, -3, 0, 1}, Mat2{5, 2, 2, 1}}) {
    CosetPoint y{x.rep * GroupElement::product(gam, Mat2{1, 0, -2, 1} * gam), x.inj};
    CHECK(closing_f(y, 0.5, S) == doctest::Approx(f0).epsilon(1e-9));
  }
}

TEST_CASE("closing_scan on the diagonal orbit") {
  auto rep = closing_scan(identity_coset(), 1, 2, 1e-4, 32);
  CHECK(rep.good_fraction <= 0.1);
  for (const auto& row : rep.rows) CHECK(!row.injective_on_Et);
  REQUIRE(rep.searched);
  REQUIRE(rep.detected.has_value());
  CHECK(rep.detected->orbit.det == 1);
  CHECK(rep.detected->distance <= 1e-6);
  CHECK(rep.noncommuting_pair);
}

TEST_CASE("closing_scan on generic points") {
  const double beta = 1e-4;
  int tried = 0;
  for (std::uint64_t seed = 1; tried < 6; ++seed) {
    auto x = haar_sample(seed);
    if (x.inj < 0.005) continue;
    ++tried;
    auto rep = closing_scan(x, 4, 1, beta, 64);
    CHECK(rep.good_fraction >= 1 - 5 * std::pow(beta, 0.25));
    for (const auto& row : rep.rows) CHECK(row.injective_on_Et);
  }
}

TEST_CASE("planted near-periodic start is detected within ten offsets") {
  for (double off : {1e-7, 1e-6}) {
    Traceless w0 = Traceless{0.3, 1, -0.5} * (off / Traceless{0.3, 1, -0.5}.norm());
    auto x = make_point(exp_r(w0) * diagonal_orbit().point(prd(0.1, 0.2, 0.3)));
    auto rep = closing_scan(x, 1, 2, 1e-4, 16);
    CHECK(rep.good_fraction < rep.threshold);
    REQUIRE(rep.detected.has_value());
    CHECK(rep.detected->distance <= 10 * off);
    CHECK(rep.detected->distance > 0);
  }
}

TEST_CASE("good fraction is nonincreasing in beta") {
  auto x = haar_sample(2);
  double prev = 2;
  for (double beta : {1e-8, 1e-6, 1e-5, 3e-5, 1e-4, 4e-4}) {
    auto rep = closing_scan(x, 4, 1, beta, 64);
    CHECK(rep.good_fraction <= prev);
    prev = rep.good_fraction;
  }
}

TEST_CASE("closing_scan report shape") {
  auto rep = closing_scan(haar_sample(5), 2, 2, 1e-4, 1);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].r == 0.5);
  auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["r_count"] == 1);
  CHECK(double(j["good_fraction"]) == (rep.rows[0].good ? 1.0 : 0.0));
  std::string csv = rep.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  auto big = closing_scan(haar_sample(4), 3, 1, 1e-4, 20);
  std::size_t good = 0;
  for (const auto& row : big.rows) {
    good += row.good;
    CHECK(row.good == (row.inj_ok && row.injective_on_Et && row.f_t_value <= std::exp(big.D * big.t)));
  }
  CHECK(big.good_fraction == doctest::Approx(double(good) / 20));
}

TEST_CASE("closing_scan errors") {
  auto x = haar_sample(1);
  CHECK_THROWS_AS(closing_scan(x, 7, 1, 1e-4, 4), Error);
  CHECK_THROWS_AS(closing_scan(x, 2, 1, 0, 4), Error);
  CHECK_THROWS_AS(closing_scan(x, 2, 1, 1e-4, 0), Error);
  try {
    short_identifications(x, 2000);
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BudgetExceeded);
  }
}
