#include "ulab/closing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"
#include "ulab/error.hpp"
#include "ulab/flow.hpp"
#include "ulab/parallel.hpp"
#include "ulab/projection.hpp"

namespace ulab {

namespace {

using i64 = std::int64_t;

constexpr std::size_t kBudget = 200000;

i64 ext_gcd(i64 a, i64 b, i64& x, i64& y) {
  if (b == 0) {
    x = a >= 0 ? 1 : -1;
    y = 0;
    return std::abs(a);
  }
  i64 x1, y1;
  i64 g = ext_gcd(b, a % b, x1, y1);
  x = y1;
  y = x1 - (a / b) * y1;
  return g;
}

// c = g gamma g^{-1}, gamma = [[m, p + k m], [n, q + k n]]: the first column
// runs over lattice vectors, k over the line of completions with det 1.
void for_each_short(const Mat2& g_in, double S, const std::function<void(const Mat2&)>& fn) {
  Mat2 g = g_in;
  if (std::hypot(g.b, g.d) < std::hypot(g.a, g.c)) g = g * Mat2{0, -1, 1, 0};
  const Mat2 gi = g.inverse();
  const double rmax = 2 * S * std::hypot(g.a, g.c);
  std::size_t count = 0;
  for_each_lattice_vector(g, rmax, [&](double vx, double vy) {
    i64 m = std::llround(gi.a * vx + gi.b * vy), n = std::llround(gi.c * vx + gi.d * vy);
    i64 x, y;
    if (ext_gcd(m, n, x, y) != 1) return;
    Mat2 c0 = g * Mat2{double(m), double(-y), double(n), double(x)} * gi;
    Mat2 dk = g * Mat2{0, double(m), 0, double(n)} * gi;
    double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
    const double c0e[4] = {c0.a, c0.b, c0.c, c0.d}, de[4] = {dk.a, dk.b, dk.c, dk.d};
    for (int e = 0; e < 4; ++e) {
      if (std::abs(de[e]) < 1e-12) {
        if (std::abs(c0e[e]) > S) return;
        continue;
      }
      double u = (-S - c0e[e]) / de[e], v = (S - c0e[e]) / de[e];
      lo = std::max(lo, std::min(u, v));
      hi = std::min(hi, std::max(u, v));
    }
    if (!(lo <= hi)) return;
    for (i64 k = i64(std::ceil(lo - 1e-9)); k <= i64(std::floor(hi + 1e-9)); ++k) {
      Mat2 c = c0 + dk * double(k);
      if (max_abs(c) > S) continue;
      if (max_abs(c - Mat2::identity()) < 1e-9 || max_abs(c + Mat2::identity()) < 1e-9) continue;
      if (++count > kBudget)
        throw Error(ErrorCode::BudgetExceeded, "short element enumeration exceeded " + std::to_string(kBudget));
      fn(c);
    }
  });
}

double offset_norm(const Mat2& A) {
  try {
    return sl2_log(A).norm();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

std::vector<Identification> short_identifications(const CosetPoint& x, double search_norm) {
  require(x.model() == Model::ProductRR, "short_identifications is implemented for ProductRR");
  require(search_norm >= 1, "search_norm must be >= 1");
  CosetPoint p = make_point(x.rep);
  const Mat2& g1 = p.rep.first();
  const Mat2 g1i = g1.inverse();
  std::vector<Identification> out;
  for_each_short(p.rep.second(), search_norm, [&](const Mat2& c) {
    Mat2 M = g1i * c.inverse() * g1;
    Mat2 gam{std::round(M.a), std::round(M.b), std::round(M.c), std::round(M.d)};
    if (gam.det() != 1) {
      out.push_back({c, Mat2::zero(), std::numeric_limits<double>::infinity()});
      return;
    }
    Mat2 A = c * g1 * gam * g1i;
    out.push_back({c, A, max_abs(A - Mat2::identity())});
  });
  return out;
}

double closing_f(const CosetPoint& z, double alpha, double search_norm) {
  require(alpha > 0 && alpha < 1, "closing_f needs alpha in (0, 1)");
  const double inj = make_point(z.rep).inj;
  double s = 0;
  bool any = false;
  for (const auto& id : short_identifications(z, search_norm)) {
    if (id.dist > 0.5) continue;
    double n = offset_norm(id.A);
    if (n <= kExactIdentification || n >= inj) continue;
    s += std::pow(n, -alpha);
    any = true;
  }
  return any ? s : std::pow(inj, -alpha);
}

std::string ClosingScanReport::to_json() const {
  nlohmann::json j;
  j["t"] = t;
  j["D"] = D;
  j["beta"] = beta;
  j["alpha"] = alpha;
  j["threshold"] = threshold;
  j["r_count"] = rows.size();
  j["good_fraction"] = good_fraction;
  j["searched"] = searched;
  if (detected) {
    const auto& q = detected->orbit.q;
    j["detected"] = {{"q", {q[0], q[1], q[2], q[3]}}, {"height", detected->orbit.height}, {"distance", detected->distance}};
  } else {
    j["detected"] = nullptr;
  }
  j["stabilizer_candidates"] = stabilizer_candidates;
  j["noncommuting_pair"] = noncommuting_pair;
  return j.dump();
}

std::string ClosingScanReport::to_csv() const {
  std::string out = "r,inj,inj_ok,injective_on_Et,f_t_value,good\n";
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%d,%.17g,%d\n", row.r, row.inj, row.inj_ok ? 1 : 0,
                  row.injective_on_Et ? 1 : 0, row.f_t_value, row.good ? 1 : 0);
    out += buf;
  }
  return out;
}

ClosingScanReport closing_scan(const CosetPoint& x1, double t, double D, double beta, std::size_t r_count,
                               double search_norm, const ClosingOptions& opts) {
  require(x1.model() == Model::ProductRR, "closing_scan is implemented for ProductRR");
  require(t > 0 && t <= 6, "closing_scan needs 0 < t <= 6");
  require(beta > 0 && beta < 1 && D > 0 && r_count >= 1, "closing_scan parameters");
  require(opts.z_samples >= 1 && opts.c_bad > 0 && opts.max_height >= 1, "closing_scan options");
  ClosingScanReport rep;
  rep.t = t;
  rep.D = D;
  rep.beta = beta;
  rep.alpha = opts.alpha;
  rep.threshold = 1 - opts.c_bad * std::pow(beta, 0.25);
  const double inj_min = std::sqrt(beta), f_max = std::exp(D * t);
  auto grid = r_grid(r_count);
  rep.rows.resize(r_count);
  parallel_for(r_count, [&](std::size_t i) {
    auto& row = rep.rows[i];
    row.r = grid[i];
    CosetPoint y = translate(x1, 8 * t, row.r);
    row.inj = y.inj;
    row.inj_ok = y.inj >= inj_min;
    row.injective_on_Et = true;
    for (const auto& id : short_identifications(y, search_norm))
      if (id.dist <= kExactIdentification) row.injective_on_Et = false;
    for (int j = 0; j < opts.z_samples; ++j) {
      double rj = opts.z_samples == 1 ? 0 : double(j) / double(opts.z_samples - 1);
      CosetPoint z = act(GroupElement::diagonal(prd(0, t, rj)), y);
      row.f_t_value = std::max(row.f_t_value, closing_f(z, opts.alpha, search_norm));
    }
    row.good = row.inj_ok && row.injective_on_Et && row.f_t_value <= f_max;
  });
  std::size_t good = 0;
  for (const auto& row : rep.rows) good += row.good;
  rep.good_fraction = double(good) / double(r_count);

  if (rep.good_fraction < rep.threshold || opts.force_search) {
    rep.searched = true;
    for (const auto& Y : periodic_catalog(opts.max_height)) {
      double d = dist_to_orbit(x1, Y, search_norm);
      if (!rep.detected || d < rep.detected->distance) rep.detected = DetectedOrbit{Y, d};
    }
    std::vector<Mat2> cands;
    for (const auto& id : short_identifications(x1, search_norm))
      if (id.dist <= opts.stab_tol) cands.push_back(id.c);
    rep.stabilizer_candidates = cands.size();
    for (std::size_t a = 0; a < cands.size() && !rep.noncommuting_pair; ++a)
      for (std::size_t b = a + 1; b < cands.size(); ++b)
        if (max_abs(cands[a] * cands[b] - cands[b] * cands[a]) > 1e-6) {
          rep.noncommuting_pair = true;
          break;
        }
  }
  return rep;
}

}  // namespace ulab
