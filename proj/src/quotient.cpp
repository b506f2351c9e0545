#include "ulab/quotient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "json.hpp"
#include "ulab/rng.hpp"

namespace ulab {

namespace {

using q128 = __float128;
using i64 = std::int64_t;

struct QVec {
  q128 x, y;
};

q128 norm2(const QVec& v) { return v.x * v.x + v.y * v.y; }
q128 dot(const QVec& u, const QVec& v) { return u.x * v.x + u.y * v.y; }

struct FactorReduction {
  Mat2 rep;
  std::array<i64, 4> gamma;  // [[g0, g1], [g2, g3]]
  double lambda1;
};

// Gauss reduction of the lattice spanned by the columns of L * R, then the
// canonical choice among the four det-one reorderings (v,w), (-v,-w), (w,-v),
// (-w,v): largest first-column x entry, then largest y entry.
FactorReduction gauss_reduce(const Mat2& L, const Mat2& R) {
  QVec b1{q128(L.a) * R.a + q128(L.b) * R.c, q128(L.c) * R.a + q128(L.d) * R.c};
  QVec b2{q128(L.a) * R.b + q128(L.b) * R.d, q128(L.c) * R.b + q128(L.d) * R.d};
  i64 c1[2] = {1, 0}, c2[2] = {0, 1};  // columns of gamma
  for (int it = 0; it < 100000; ++it) {
    if (norm2(b2) < norm2(b1)) {
      QVec t = b1;
      b1 = b2;
      b2 = {-t.x, -t.y};
      i64 s0 = c1[0], s1 = c1[1];
      c1[0] = c2[0];
      c1[1] = c2[1];
      c2[0] = -s0;
      c2[1] = -s1;
    }
    q128 ratio = dot(b1, b2) / norm2(b1);
    i64 mu = std::llround(static_cast<long double>(ratio));
    if (mu == 0) break;
    b2 = {b2.x - q128(mu) * b1.x, b2.y - q128(mu) * b1.y};
    c2[0] -= mu * c1[0];
    c2[1] -= mu * c1[1];
  }
  struct Cand {
    QVec v, w;
    i64 gv[2], gw[2];
  };
  Cand cands[4] = {
      {b1, b2, {c1[0], c1[1]}, {c2[0], c2[1]}},
      {{-b1.x, -b1.y}, {-b2.x, -b2.y}, {-c1[0], -c1[1]}, {-c2[0], -c2[1]}},
      {b2, {-b1.x, -b1.y}, {c2[0], c2[1]}, {-c1[0], -c1[1]}},
      {{-b2.x, -b2.y}, b1, {-c2[0], -c2[1]}, {c1[0], c1[1]}},
  };
  int best = 0;
  for (int k = 1; k < 4; ++k) {
    const QVec &a = cands[k].v, &b = cands[best].v;
    if (a.x > b.x || (a.x == b.x && a.y > b.y)) best = k;
  }
  const Cand& c = cands[best];
  FactorReduction out;
  out.rep = {double(c.v.x), double(c.w.x), double(c.v.y), double(c.w.y)};
  out.gamma = {c.gv[0], c.gw[0], c.gv[1], c.gw[1]};
  out.lambda1 = std::sqrt(double(std::min(norm2(b1), norm2(b2))));
  return out;
}

Mat2 to_mat(const std::array<i64, 4>& g) { return {double(g[0]), double(g[1]), double(g[2]), double(g[3])}; }

// Gaussian-integer reduction for the ComplexC lattice SL2(Z[i]).
struct ComplexReduction {
  CMat2 rep, gamma;
  double lambda1;
};

cplx round_gauss(cplx z) { return {std::round(z.real()), std::round(z.imag())}; }

ComplexReduction hermitian_reduce(const CMat2& M) {
  cplx b1[2] = {M.a, M.c}, b2[2] = {M.b, M.d};
  cplx c1[2] = {1, 0}, c2[2] = {0, 1};
  auto n2 = [](const cplx* v) { return std::norm(v[0]) + std::norm(v[1]); };
  for (int it = 0; it < 100000; ++it) {
    if (n2(b2) < n2(b1)) {
      for (int k = 0; k < 2; ++k) {
        cplx t = b1[k];
        b1[k] = b2[k];
        b2[k] = -t;
        cplx s = c1[k];
        c1[k] = c2[k];
        c2[k] = -s;
      }
    }
    cplx mu = round_gauss((std::conj(b1[0]) * b2[0] + std::conj(b1[1]) * b2[1]) / n2(b1));
    if (mu == cplx(0)) break;
    for (int k = 0; k < 2; ++k) {
      b2[k] -= mu * b1[k];
      c2[k] -= mu * c1[k];
    }
  }
  const cplx units[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  ComplexReduction best{};
  bool have = false;
  auto key = [](const CMat2& m) { return std::array<double, 4>{m.a.real(), m.a.imag(), m.c.real(), m.c.imag()}; };
  for (int swap = 0; swap < 2; ++swap) {
    for (const cplx& u : units) {
      cplx v[2], w[2], gv[2], gw[2];
      for (int k = 0; k < 2; ++k) {
        v[k] = swap ? u * b2[k] : u * b1[k];
        w[k] = swap ? -b1[k] / u : b2[k] / u;
        gv[k] = swap ? u * c2[k] : u * c1[k];
        gw[k] = swap ? -c1[k] / u : c2[k] / u;
      }
      CMat2 rep{v[0], w[0], v[1], w[1]};
      if (!have || key(rep) > key(best.rep)) {
        best.rep = rep;
        best.gamma = {gv[0], gw[0], gv[1], gw[1]};
        have = true;
      }
    }
  }
  best.lambda1 = std::sqrt(std::min(n2(b1), n2(b2)));
  return best;
}

double inj_from_lambda(double lambda1) { return std::min(kInjCap, kInjChart * lambda1); }

}  // namespace

Reduction reduce_product(const GroupElement& left, const GroupElement& g) {
  require(left.model() == g.model(), "reduce_product across models");
  if (g.model() == Model::ProductRR) {
    auto f1 = gauss_reduce(left.first(), g.first());
    auto f2 = gauss_reduce(left.second(), g.second());
    return {GroupElement::product(f1.rep, f2.rep), GroupElement::product(to_mat(f1.gamma), to_mat(f2.gamma))};
  }
  auto r = hermitian_reduce(left.cmat() * g.cmat());
  return {GroupElement::complex(r.rep), GroupElement::complex(r.gamma)};
}

Reduction reduce(const GroupElement& g) { return reduce_product(GroupElement::identity(g.model()), g); }

double shortest_vector(const GroupElement& rep) {
  if (rep.model() == Model::ProductRR) {
    auto f1 = gauss_reduce(Mat2::identity(), rep.first());
    auto f2 = gauss_reduce(Mat2::identity(), rep.second());
    return std::min(f1.lambda1, f2.lambda1);
  }
  return hermitian_reduce(rep.cmat()).lambda1;
}

double injectivity_radius(const GroupElement& rep) { return inj_from_lambda(shortest_vector(rep)); }

CosetPoint make_point(const GroupElement& g) {
  GroupElement rep = reduce(g).rep;
  return {rep, injectivity_radius(rep)};
}

CosetPoint act(const GroupElement& left, const CosetPoint& x) {
  GroupElement rep = reduce_product(left, x.rep).rep;
  return {rep, injectivity_radius(rep)};
}

CosetPoint identity_coset(Model m) { return make_point(GroupElement::identity(m)); }

// ---------------------------------------------------------------- Haar

CosetPoint haar_sample(std::uint64_t seed) {
  Draws d(stream_key(seed, "haar_sample"), 0);
  const double ymin = std::sqrt(3.0) / 2.0;
  Mat2 f[2];
  for (auto& m : f) {
    double x, y;
    // density dx dy / y^2 on the fundamental domain |x| <= 1/2, x^2 + y^2 >= 1
    do {
      x = d.uniform(-0.5, 0.5);
      y = 1.0 / (d.uniform() / ymin + 1e-300);
    } while (x * x + y * y < 1.0);
    double th = d.uniform(0, 2 * M_PI);
    double sy = std::sqrt(y);
    Mat2 g{sy, x / sy, 0, 1 / sy};
    Mat2 k{std::cos(th), -std::sin(th), std::sin(th), std::cos(th)};
    // Gamma h with h = n_x a_y k is Haar on Gamma\G; invert for G/Gamma.
    m = (g * k).inverse();
  }
  return make_point(GroupElement::product(f[0], f[1]));
}

void for_each_lattice_vector(const Mat2& B, double rmax, const std::function<void(double, double)>& fn) {
  double b1x = B.a, b1y = B.c, b2x = B.b, b2y = B.d;
  double n1 = std::hypot(b1x, b1y);
  double covol = std::abs(B.det());
  double proj = (b1x * b2x + b1y * b2y) / n1;  // component of b2 along b1
  int nmax = int(std::floor(rmax * n1 / covol));
  for (int n = -nmax; n <= nmax; ++n) {
    double lo = (-rmax - n * proj) / n1, hi = (rmax - n * proj) / n1;
    for (long m = long(std::ceil(lo)); m <= long(std::floor(hi)); ++m) {
      if (m == 0 && n == 0) continue;
      double vx = m * b1x + n * b2x, vy = m * b1y + n * b2y;
      if (vx * vx + vy * vy <= rmax * rmax) fn(vx, vy);
    }
  }
}

// ---------------------------------------------------------------- distances

namespace {

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

// SL2(Z) elements in a window around the real matrix M.
template <class Fn>
void gammas_near(const Mat2& M, int window, double search_norm, Fn&& fn) {
  i64 p0 = std::llround(M.a), r0 = std::llround(M.c);
  for (i64 p = p0 - window; p <= p0 + window; ++p) {
    for (i64 r = r0 - window; r <= r0 + window; ++r) {
      i64 x, y;
      if (ext_gcd(p, r, x, y) != 1) continue;
      // p x + r y = 1, so (q0, s0) = (-y, x) completes the column to det 1.
      i64 q0 = -y, s0 = x;
      double den = double(p * p + r * r);
      double kstar = ((M.b - q0) * p + (M.d - s0) * r) / den;
      i64 k0 = std::llround(kstar);
      for (i64 k = k0 - 1; k <= k0 + 1; ++k) {
        Mat2 g{double(p), double(q0 + k * p), double(r), double(s0 + k * r)};
        if (max_abs(g) <= search_norm) fn(g);
      }
    }
  }
}

constexpr int kWindow = 2;

}  // namespace

double factor_distance(const Mat2& g, const Mat2& c) {
  double best = std::numeric_limits<double>::infinity();
  Mat2 ci = c.inverse();
  gammas_near(g.inverse() * c, kWindow, 1e18, [&](const Mat2& gam) {
    best = std::min(best, max_abs(g * gam * ci - Mat2::identity()));
  });
  return best;
}

// ---------------------------------------------------------------- orbits

PeriodicOrbit PeriodicOrbit::from_matrix(std::array<i64, 4> q) {
  PeriodicOrbit o;
  o.q = q;
  o.det = q[0] * q[3] - q[1] * q[2];
  require(o.det > 0, "periodic orbit conjugator needs positive determinant");
  i64 g = std::gcd(std::gcd(q[0], q[1]), std::gcd(q[2], q[3]));
  require(g == 1, "periodic orbit conjugator must be primitive");
  o.height = 0;
  for (i64 v : q) o.height = std::max<int>(o.height, int(std::abs(v)));
  o.vol_proxy = double(o.height) * o.height * o.height;
  for (i64 a = 1; a <= o.det; ++a) {
    if (o.det % a) continue;
    i64 d = o.det / a;
    for (i64 b = 0; b < d; ++b)
      if (std::gcd(std::gcd(a, b), d) == 1) o.hnf.push_back({a, b, d});
  }
  return o;
}

Mat2 PeriodicOrbit::conjugator() const {
  double s = 1.0 / std::sqrt(double(det));
  return Mat2{double(q[0]), double(q[1]), double(q[2]), double(q[3])} * s;
}

PeriodicOrbit diagonal_orbit() { return PeriodicOrbit::from_matrix({1, 0, 0, 1}); }

std::vector<PeriodicOrbit> periodic_catalog(int max_height) {
  require(max_height >= 1, "max_height must be >= 1");
  double candidates = std::pow(2.0 * max_height + 1, 4);
  if (candidates > 1e6)
    throw Error(ErrorCode::BudgetExceeded, "catalog enumeration of " + std::to_string(i64(candidates)) +
                                               " candidates exceeds 1e6");
  // All primitive matrices of determinant n form one Gamma double coset, so
  // one orbit per n; keep the smallest height, then the lexicographically
  // smallest entries.
  std::map<i64, std::array<i64, 5>> best;  // n -> (height, a, b, c, d)
  const i64 H = max_height;
  for (i64 a = -H; a <= H; ++a)
    for (i64 b = -H; b <= H; ++b)
      for (i64 c = -H; c <= H; ++c)
        for (i64 d = -H; d <= H; ++d) {
          i64 n = a * d - b * c;
          if (n <= 0) continue;
          if (std::gcd(std::gcd(a, b), std::gcd(c, d)) != 1) continue;
          i64 h = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
          std::array<i64, 5> key{h, a, b, c, d};
          auto it = best.find(n);
          if (it == best.end() || key < it->second) best[n] = key;
        }
  std::vector<PeriodicOrbit> out;
  for (auto& [n, k] : best) out.push_back(PeriodicOrbit::from_matrix({k[1], k[2], k[3], k[4]}));
  std::stable_sort(out.begin(), out.end(), [](const PeriodicOrbit& x, const PeriodicOrbit& y) {
    return x.height != y.height ? x.height < y.height : x.det < y.det;
  });
  return out;
}

void for_each_orbit_candidate(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm,
                              const std::function<void(const OrbitCandidate&)>& fn) {
  require(x.model() == Model::ProductRR, "periodic orbits are implemented for ProductRR");
  require(search_norm >= 1, "search_norm must be >= 1");
  const Mat2& g1 = x.rep.first();
  const Mat2& g2 = x.rep.second();
  Mat2 g1i = g1.inverse(), g2i = g2.inverse();
  double rt = std::sqrt(double(Y.det));
  for (const auto& h : Y.hnf) {
    Mat2 B{double(h[0]), double(h[1]), 0.0, double(h[2])};
    Mat2 Bs = B * (1.0 / rt);
    Mat2 M = g1i * g2 * Bs.inverse();
    Mat2 right = Bs * g2i;
    gammas_near(M, kWindow, search_norm, [&](const Mat2& gam) {
      Mat2 A = g1 * gam * right;
      fn({A, max_abs(A - Mat2::identity())});
    });
  }
}

double dist_to_orbit(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm) {
  double best = std::numeric_limits<double>::infinity();
  for_each_orbit_candidate(x, Y, search_norm, [&](const OrbitCandidate& c) { best = std::min(best, c.dist); });
  return best;
}

std::vector<Traceless> orbit_offsets(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm, double radius) {
  std::vector<Traceless> out;
  for_each_orbit_candidate(x, Y, search_norm, [&](const OrbitCandidate& c) {
    if (c.dist > 3 * radius) return;
    Traceless w;
    try {
      w = -sl2_log(c.A);
    } catch (const Error&) {
      return;
    }
    if (w.norm() >= radius) return;
    if (max_abs(sl2_exp(w) * c.A - Mat2::identity()) > 1e-10) return;
    out.push_back(w);
  });
  std::sort(out.begin(), out.end(), [](const Traceless& a, const Traceless& b) {
    return std::array<double, 3>{a.x11, a.x12, a.x21} < std::array<double, 3>{b.x11, b.x12, b.x21};
  });
  return out;
}

std::vector<Traceless> transversal_returns(const CosetPoint& x, const PeriodicOrbit& Y, double search_norm) {
  auto all = orbit_offsets(x, Y, search_norm, x.inj);
  std::vector<Traceless> out;
  for (const auto& w : all)
    if (w.norm() > 1e-14) out.push_back(w);
  return out;
}

std::string catalog_to_json(const std::vector<PeriodicOrbit>& cat) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& o : cat) {
    nlohmann::json q = nlohmann::json::array();
    for (i64 v : o.q) q.push_back({v, 1});
    j.push_back({{"q", q}, {"height", o.height}, {"vol_proxy", o.vol_proxy}});
  }
  return j.dump(2);
}

std::vector<PeriodicOrbit> catalog_from_json(const std::string& text) {
  std::vector<PeriodicOrbit> out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("catalog JSON: ") + e.what());
  }
  for (const auto& o : j) {
    std::array<i64, 4> q{};
    i64 den = 1;
    for (int k = 0; k < 4; ++k) den = std::lcm(den, o.at("q").at(k).at(1).get<i64>());
    for (int k = 0; k < 4; ++k) q[k] = o["q"][k][0].get<i64>() * (den / o["q"][k][1].get<i64>());
    i64 g = std::gcd(std::gcd(q[0], q[1]), std::gcd(q[2], q[3]));
    for (auto& v : q) v /= g;
    out.push_back(PeriodicOrbit::from_matrix(q));
  }
  return out;
}

}  // namespace ulab
