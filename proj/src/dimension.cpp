#include "ulab/dimension.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "ulab/flow.hpp"
#include "ulab/parallel.hpp"
#include "ulab/rng.hpp"

namespace ulab {

using i128 = __int128;

// ---------------------------------------------------------------- clouds

CubeIndex cube_of(const Traceless& w, int M, int k) {
  CubeIndex c;
  for (int i = 0; i < 3; ++i) c[i] = std::int64_t(std::floor(std::ldexp(w[i], M * k)));
  return c;
}

PointCloud::PointCloud(std::vector<Traceless> points, double b0, int M, int k0, int k1)
    : pts_(std::move(points)), b0_(b0), M_(M), k0_(k0), k1_(k1) {
  require(b0 > 0, "b0 must be positive");
  require(M >= 1 && M <= 30, "M must lie in [1, 30]");
  for (const auto& w : pts_) require(w.norm() < b0, "cloud point outside B(0, b0)");
  std::vector<std::size_t> ord(pts_.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return pts_[a].x11 < pts_[b].x11; });
  for (std::size_t i = 0; i < ord.size(); ++i)
    for (std::size_t j = i + 1; j < ord.size() && pts_[ord[j]].x11 - pts_[ord[i]].x11 <= 1e-14; ++j)
      require((pts_[ord[j]] - pts_[ord[i]]).norm() > 1e-14, "duplicate cloud points");
  if (k1_ >= k0_) {
    require(M * std::max(std::abs(k0_), std::abs(k1_)) <= 60, "dyadic levels out of range");
    index_.resize(std::size_t(k1_ - k0_ + 1));
    for (int k = k0_; k <= k1_; ++k)
      for (std::size_t i = 0; i < pts_.size(); ++i) index_[std::size_t(k - k0_)][cube_of(pts_[i], M_, k)].push_back(i);
  }
}

const std::map<CubeIndex, std::vector<std::size_t>>& PointCloud::cubes(int k) const {
  require(k >= k0_ && k <= k1_, "level outside the indexed range");
  return index_[std::size_t(k - k0_)];
}

bool PointCloud::index_consistent() const {
  for (int k = k0_; k <= k1_; ++k) {
    const auto& idx = index_[std::size_t(k - k0_)];
    std::vector<int> seen(pts_.size(), 0);
    for (const auto& [key, members] : idx)
      for (std::size_t i : members) {
        if (cube_of(pts_[i], M_, k) != key) return false;
        ++seen[i];
      }
    for (int s : seen)
      if (s != 1) return false;
  }
  return true;
}

std::string PointCloud::to_json() const {
  nlohmann::json j;
  j["b0"] = b0_;
  j["M"] = M_;
  j["k0"] = k0_;
  j["k1"] = k1_;
  auto& p = j["points"] = nlohmann::json::array();
  for (const auto& w : pts_) p.push_back({w.x11, w.x12, w.x21});
  return j.dump();
}

PointCloud PointCloud::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    std::vector<Traceless> pts;
    for (const auto& p : j.at("points")) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    return PointCloud(std::move(pts), j.at("b0").get<double>(), j.value("M", 4), j.value("k0", 0), j.value("k1", -1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("cloud JSON: ") + e.what());
  }
}

double energy(const std::vector<Traceless>& cloud, double b0, int R, double alpha, std::size_t w) {
  require(w < cloud.size(), "energy: point index out of range");
  require(R >= 0 && alpha > 0 && alpha <= 1, "energy: need R >= 0 and alpha in (0, 1]");
  const double floor = std::pow(b0, -alpha);
  if (cloud.size() <= std::size_t(R)) return floor;
  std::vector<double> d;
  d.reserve(cloud.size() - 1);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (i != w) d.push_back((cloud[i] - cloud[w]).norm());
  if (d.size() <= std::size_t(R)) return floor;
  std::nth_element(d.begin(), d.begin() + R, d.end());
  double s = 0;
  for (std::size_t i = std::size_t(R); i < d.size(); ++i) s += std::pow(d[i], -alpha);
  return s;
}

double max_energy(const std::vector<Traceless>& cloud, double b0, int R, double alpha) {
  std::vector<double> e(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) { e[i] = energy(cloud, b0, R, alpha, i); });
  return e.empty() ? std::pow(b0, -alpha) : *std::max_element(e.begin(), e.end());
}

PointCloud fractal_cloud(std::uint64_t seed, int maps, double ratio, int depth, double b0, int M, int k0, int k1) {
  require(maps >= 2 && depth >= 1 && ratio > 0 && ratio < 0.5, "fractal_cloud parameters");
  double count = std::pow(double(maps), depth);
  require(count <= double(1 << 16), "fractal_cloud: too many points");
  Draws d(stream_key(seed, "fractal_cloud"), 0);
  std::vector<Traceless> centers(static_cast<std::size_t>(maps));
  for (auto& c : centers) c = {d.uniform(-1, 1), d.uniform(-1, 1), d.uniform(-1, 1)};
  std::vector<Traceless> pts{{0, 0, 0}};
  double scale = 1;
  for (int level = 0; level < depth; ++level) {
    std::vector<Traceless> next;
    next.reserve(pts.size() * std::size_t(maps));
    for (const auto& p : pts)
      for (const auto& c : centers) next.push_back(p + c * (scale * (1 - ratio)));
    pts = std::move(next);
    scale *= ratio;
  }
  double mx = 0;
  for (const auto& p : pts) mx = std::max(mx, p.norm());
  for (auto& p : pts) p = p * (0.9 * b0 / mx);
  return PointCloud(std::move(pts), b0, M, k0, k1);
}

// ---------------------------------------------------------------- regularization

namespace {

double radical_inverse(std::uint64_t n, std::uint64_t base) {
  double inv = 1.0 / double(base), f = inv, r = 0;
  while (n) {
    r += double(n % base) * f;
    n /= base;
    f *= inv;
  }
  return r;
}

Shift halton_shift(int j) {
  static const std::uint64_t bases[3] = {2, 3, 5};
  Shift s;
  for (int i = 0; i < 3; ++i) {
    double u = radical_inverse(std::uint64_t(j), bases[i]);
    long double scaled = std::ldexp((long double)u, 64);
    std::uint64_t U = scaled >= 18446744073709551615.0L ? ~0ULL : std::uint64_t(scaled);
    // the low bits of a double are empty; fill them so fine levels are shifted too
    s[i] = j == 0 ? 0 : U ^ (splitmix64(std::uint64_t(j) * 3 + std::uint64_t(i)) & 0x7FFULL);
  }
  return s;
}

struct Fine {
  std::array<i128, 3> idx;
  std::array<double, 3> frac;
};

// Cube index at the finest level k1 of the grid shifted by `shift` (a fraction
// of the level-kc side), plus the position inside that cube.
Fine fine_cube(const Traceless& w, int M, int kc, int k1, const Shift& shift) {
  Fine out;
  int s = M * (k1 - kc);
  for (int i = 0; i < 3; ++i) {
    std::uint64_t U = shift[i];
    i128 ip = 0;
    double fr = 0;
    if (s == 0) {
      fr = std::ldexp(double(U), -64);
    } else if (s < 64) {
      ip = i128(U >> (64 - s));
      fr = std::ldexp(double(U << s), -64);
    } else {
      ip = i128(U) << (s - 64);
    }
    double y = std::ldexp(w[i], M * k1) + fr;
    double fl = std::floor(y);
    out.idx[i] = ip + i128(fl);
    out.frac[i] = y - fl;
  }
  return out;
}

std::array<i128, 3> coarsen(const std::array<i128, 3>& fine, int bits) {
  return {fine[0] >> bits, fine[1] >> bits, fine[2] >> bits};
}

// Smallest c >= 0 with n <= 2^{Mc}.
int band_class(std::size_t n, int M) {
  int c = 0;
  while (c * M < 62 && n > (std::size_t(1) << (c * M))) ++c;
  return c;
}

}  // namespace

std::array<i128, 3> shifted_cube(const Traceless& w, int M, int kc, int k, const Shift& shift) {
  require(k >= kc, "level below the coarsest level");
  return fine_cube(w, M, kc, k, shift).idx;
}

Regularization regularize(const PointCloud& cloud, int M, int k0, int k1, double beta, const RegularizeOptions& opt) {
  require(cloud.size() > 0, "regularize: empty cloud");
  require(k1 > k0, "regularize: need k1 > k0");
  require(beta > 0 && beta < 1, "regularize: beta must lie in (0, 1)");
  const int kc = k0 - 10;
  require(M >= 1 && M * (k1 - kc) <= 120 && M * std::max(std::abs(k1), std::abs(kc)) <= 60,
          "regularize: dyadic levels out of range");
  static std::atomic<bool> warned{false};
  if (!(std::ldexp(opt.m0 + 1, -M) < opt.kappa / 100 && 6.0 * M < std::pow(2.0, opt.kappa * M / 100)) &&
      !warned.exchange(true))
    warn("regularize: M = " + std::to_string(M) + " violates the condition on M for kappa = " +
         std::to_string(opt.kappa));

  const std::size_t n = cloud.size();
  const double band = std::ldexp(1.0, -M);
  Regularization out;
  out.M = M;
  out.k0 = k0;
  out.k1 = k1;
  out.beta = beta;

  // Shifted families: each keeps the points outside the finest-level
  // lower-face band for its shift.
  struct Family {
    std::vector<std::size_t> members;
    Shift shift;
    std::vector<std::array<i128, 3>> fine;
  };
  std::vector<Family> families;
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  const double keep_target = 0.5 * std::pow(1 - band, 3);
  while (!remaining.empty() && double(remaining.size()) >= std::sqrt(beta) * double(n)) {
    Family best;
    std::vector<std::size_t> best_rest;
    while (out.shifts_tried < opt.max_shifts) {
      Shift sh = halton_shift(out.shifts_tried++);
      Family fam;
      fam.shift = sh;
      std::vector<std::size_t> rest;
      for (std::size_t i : remaining) {
        Fine f = fine_cube(cloud[i], M, kc, k1, sh);
        if (f.frac[0] < band || f.frac[1] < band || f.frac[2] < band) {
          rest.push_back(i);
        } else {
          fam.members.push_back(i);
          fam.fine.push_back(f.idx);
        }
      }
      if (fam.members.size() > best.members.size()) {
        best = std::move(fam);
        best_rest = std::move(rest);
      }
      if (double(best.members.size()) >= keep_target * double(remaining.size())) break;
    }
    if (best.members.empty())
      throw Error(ErrorCode::CannotRegularize, "no boundary-avoiding shift among " +
                                                   std::to_string(opt.max_shifts) + " candidates");
    remaining = std::move(best_rest);
    families.push_back(std::move(best));
  }
  out.discard = remaining;

  const int L = k1 - kc + 1;
  const double min_part = beta * beta * double(n);
  for (const auto& fam : families) {
    struct Part {
      std::vector<std::size_t> local;  // positions in fam.members
      std::vector<int> tau;
    };
    std::vector<Part> parts(1);
    parts[0].local.resize(fam.members.size());
    std::iota(parts[0].local.begin(), parts[0].local.end(), 0);
    parts[0].tau.assign(std::size_t(L), 0);
    // Finest level first: a split at level k keeps whole level-k cubes, so
    // counts at finer levels are untouched.
    for (int k = k1; k >= kc; --k) {
      int bits = M * (k1 - k);
      std::vector<Part> next;
      for (auto& p : parts) {
        std::map<std::array<i128, 3>, std::size_t> count;
        for (std::size_t li : p.local) ++count[coarsen(fam.fine[li], bits)];
        // classes c and c - 1 share the band of tau = c
        std::set<int> classes;
        for (auto& [key, c] : count) classes.insert(band_class(c, M));
        std::map<int, int> tau_of;
        for (auto it = classes.rbegin(); it != classes.rend(); ++it)
          if (!tau_of.count(*it)) {
            tau_of[*it] = *it;
            tau_of[*it - 1] = *it;
          }
        std::map<int, Part> by_class;
        for (std::size_t li : p.local) {
          int c = tau_of[band_class(count[coarsen(fam.fine[li], bits)], M)];
          auto [it, fresh] = by_class.try_emplace(c);
          if (fresh) {
            it->second.tau = p.tau;
            it->second.tau[std::size_t(k - kc)] = c;
          }
          it->second.local.push_back(li);
        }
        for (auto& [c, q] : by_class) next.push_back(std::move(q));
      }
      parts = std::move(next);
    }
    for (auto& p : parts) {
      if (double(p.local.size()) < min_part) {
        for (std::size_t li : p.local) out.discard.push_back(fam.members[li]);
        continue;
      }
      RegularPart rp;
      rp.shift = fam.shift;
      rp.tau = p.tau;
      for (std::size_t li : p.local) rp.members.push_back(fam.members[li]);
      std::map<std::array<i128, 3>, std::size_t> c0;
      for (std::size_t li : p.local) ++c0[coarsen(fam.fine[li], M * (k1 - k0))];
      std::size_t mn = p.local.size();
      for (auto& [key, c] : c0) mn = std::min(mn, c);
      rp.level_k0_min_fraction = double(mn) / double(p.local.size());
      rp.level_k0_ok = rp.level_k0_min_fraction >= opt.level_k0_threshold;
      out.parts.push_back(std::move(rp));
    }
  }
  std::sort(out.discard.begin(), out.discard.end());
  if (double(out.discard.size()) > std::pow(beta, 0.25) * double(n))
    throw Error(ErrorCode::CannotRegularize, "discard " + std::to_string(out.discard.size()) + " of " +
                                                 std::to_string(n) + " exceeds beta^{1/4} #F");
  return out;
}

std::string verify_regularization(const PointCloud& cloud, const Regularization& reg) {
  const std::size_t n = cloud.size();
  const int kc = reg.k0 - 10;
  std::vector<int> seen(n, 0);
  for (std::size_t i : reg.discard) {
    if (i >= n) return "discard index out of range";
    ++seen[i];
  }
  for (const auto& p : reg.parts)
    for (std::size_t i : p.members) {
      if (i >= n) return "part index out of range";
      ++seen[i];
    }
  for (std::size_t i = 0; i < n; ++i)
    if (seen[i] != 1) return "point " + std::to_string(i) + " appears " + std::to_string(seen[i]) + " times";
  if (double(reg.discard.size()) > std::pow(reg.beta, 0.25) * double(n)) return "discard too large";
  for (std::size_t pi = 0; pi < reg.parts.size(); ++pi) {
    const auto& p = reg.parts[pi];
    if (double(p.members.size()) < reg.beta * reg.beta * double(n)) return "part " + std::to_string(pi) + " too small";
    if (p.tau.size() != std::size_t(reg.k1 - kc + 1)) return "tau table has the wrong length";
    for (int k = kc; k <= reg.k1; ++k) {
      std::map<std::array<i128, 3>, std::size_t> count;
      for (std::size_t i : p.members) ++count[shifted_cube(cloud[i], reg.M, kc, k, p.shift)];
      int tau = p.tau[std::size_t(k - kc)];
      for (const auto& [key, c] : count) {
        int hi = reg.M * tau, lo = reg.M * (tau - 2);
        bool ok = hi >= 62 || c <= (std::size_t(1) << hi);
        ok = ok && (lo <= 0 || c >= (std::size_t(1) << lo));
        if (!ok)
          return "part " + std::to_string(pi) + " level " + std::to_string(k) + ": cube count " + std::to_string(c) +
                 " outside band tau = " + std::to_string(tau);
      }
    }
  }
  return "";
}

// ---------------------------------------------------------------- cones

ConeSet cone_build(const CosetPoint& y, const PointCloud& F, double beta, double eta, std::vector<SheetWeight> weights) {
  require(y.model() == Model::ProductRR, "cones are implemented for ProductRR");
  require(beta > 0 && eta > 0, "beta and eta must be positive");
  require(std::abs(eta * eta - beta) <= 1e-12 * beta, "cone_build requires eta^2 = beta");
  require(F.size() > 0, "cone needs at least one sheet");
  for (const auto& w : F.points()) require(w.norm() < beta, "cone sheet outside B(0, beta)");
  if (y.inj < 2 * eta)
    throw Error(ErrorCode::InjectivityViolation,
                "inj(y) = " + std::to_string(y.inj) + " below 2 eta = " + std::to_string(2 * eta));
  if (weights.empty()) weights.assign(F.size(), SheetWeight{});
  require(weights.size() == F.size(), "one weight descriptor per sheet");
  ConeSet c;
  c.y = y;
  c.F = F;
  c.beta = beta;
  c.eta = eta;
  c.box = BoxSpec::E(beta, eta);
  double adm = 1, mass = 0;
  for (const auto& w : weights) {
    require(w.rho_min > 0 && w.rho_min <= w.rho_max && w.lipschitz >= 0, "invalid sheet weight");
    adm = std::max({adm, w.rho_max, 1 / w.rho_min, w.lipschitz});
    mass += 0.5 * (w.rho_min + w.rho_max);
  }
  c.weights = std::move(weights);
  c.adm = adm;
  // Haar measure of E in (s, tau, r) coordinates near the identity
  double vol = (2 * beta) * (2 * beta) * (2 * eta);
  c.lambda = 1 / (mass * vol);
  return c;
}

namespace {

// Offspring bases only need inj >= beta^{1/2}.
ConeSet offspring_cone(const CosetPoint& y, std::vector<Traceless> F, const ConeSet& parent) {
  ConeSet c;
  c.y = y;
  c.F = PointCloud(std::move(F), parent.beta, parent.F.M());
  c.beta = parent.beta;
  c.eta = parent.eta;
  c.box = parent.box;
  c.weights.assign(c.F.size(), SheetWeight{});
  c.adm = 1;
  c.lambda = 1 / (double(c.F.size()) * (2 * c.beta) * (2 * c.beta) * (2 * c.eta));
  return c;
}

}  // namespace

GroupElement cone_element(const ConeSet& cone, const Mat2& h, const ConePoint& z) {
  require(z.sheet < cone.F.size(), "cone point sheet out of range");
  Mat2 hh = prd(z.h.s, z.h.tau, z.h.r);
  auto inside = box_contains(cone.box, GroupElement::diagonal(hh));
  require(inside.inside, "cone point outside E");
  return GroupElement::diagonal(h * hh) * exp_r(cone.F[z.sheet]) * cone.y.rep;
}

TransversalSet transversal_set(const ConeSet& cone, const Mat2& h, const ConePoint& z, double b) {
  require(b > 0 && b <= 0.1, "transversal_set needs 0 < b <= 1/10");
  TransversalSet out;
  auto hz = make_point(cone_element(cone, h, z));
  out.inj = hz.inj;
  const double radius = b * out.inj;
  Mat2 hh = h * prd(z.h.s, z.h.tau, z.h.r);
  const Traceless& w0 = cone.F[z.sheet];
  Mat2 back = sl2_exp(-w0);
  out.vectors.push_back({});
  for (std::size_t j = 0; j < cone.F.size(); ++j) {
    if (j == z.sheet) continue;
    // exp(v) h hh exp(w0) y = h hh exp(w') y  <=>  v = Ad(h hh) log(exp(w') exp(-w0))
    Traceless v = adjoint_r(hh, sl2_log(sl2_exp(cone.F[j]) * back));
    if (v.norm() < radius) out.vectors.push_back(v);
  }
  std::stable_sort(out.vectors.begin() + 1, out.vectors.end(),
                   [](const Traceless& a, const Traceless& c) { return a.norm() < c.norm(); });
  return out;
}

FPsi fpsi_of(const TransversalSet& I, double b, int R, double alpha) {
  require(R >= 0 && alpha > 0 && alpha <= 1, "fpsi: need R >= 0 and alpha in (0, 1]");
  FPsi out;
  out.count = I.vectors.size();
  out.inj = I.inj;
  const double floor = std::pow(b * I.inj, -alpha);
  out.psi = floor * double(std::max<std::size_t>(1, out.count));
  out.f = floor;
  if (out.count <= std::size_t(R)) return out;
  std::vector<double> norms;
  for (const auto& v : I.vectors)
    if (v.norm() > 0) norms.push_back(v.norm());
  std::sort(norms.begin(), norms.end());
  if (norms.size() <= std::size_t(R)) return out;
  double s = 0;
  for (std::size_t i = std::size_t(R); i < norms.size(); ++i) s += std::pow(norms[i], -alpha);
  out.f = s;
  return out;
}

FPsi margulis_fpsi(const ConeSet& cone, const Mat2& h, const ConePoint& z, double b, int R, double alpha) {
  return fpsi_of(transversal_set(cone, h, z, b), b, R, alpha);
}

std::string StepReport::to_json() const {
  nlohmann::json j;
  j["offspring"] = offspring.size();
  j["dropped"] = dropped;
  j["f_before"] = f_before;
  j["psi_before"] = psi_before;
  j["f_after"] = f_after;
  j["psi_after"] = psi_after;
  j["energy_before"] = energy_before;
  j["energy_after"] = energy_after;
  j["contraction"] = contraction;
  j["at_floor"] = at_floor;
  j["sheet_counts_ok"] = sheet_counts_ok;
  auto& sizes = j["sheet_counts"] = nlohmann::json::array();
  for (const auto& c : offspring) sizes.push_back(c.F.size());
  return j.dump();
}

StepReport dimension_step(const ConeSet& cone, double ell, double r, double b, int R, double alpha, std::size_t N,
                          std::uint64_t seed) {
  require(N >= 1, "dimension_step needs N >= 1");
  require(ell > 0 && ell <= kMaxFlowTime, "ell must lie in (0, 60]");
  const double beta = cone.beta, eta = cone.eta;
  if (std::exp(-ell) > beta * beta * (1 + 1e-12))
    throw Error(ErrorCode::RegimeViolation, "dimension_step needs e^{-ell} <= beta^2");
  const auto& F = cone.F.points();
  StepReport rep;

  double fsum = 0;
  for (std::size_t j = 0; j < F.size(); ++j) {
    auto fp = margulis_fpsi(cone, Mat2::identity(), {j, {}}, b, R, alpha);
    rep.f_before = std::max(rep.f_before, fp.f);
    rep.psi_before = std::max(rep.psi_before, fp.psi);
    fsum += energy(F, beta, R, alpha, j);
  }
  rep.energy_before = fsum / double(F.size());

  struct Chart {
    std::vector<ConeSet> cones;
    std::size_t dropped = 0;
  };
  std::vector<Chart> charts(N);
  const Mat2 push = one_param(OneParam::a, ell).first() * one_param(OneParam::u, r).first();
  const std::uint64_t key = stream_key(seed, "dimension_step");
  parallel_for(N, [&](std::size_t i) {
    Draws d(key, i);
    double s = d.uniform(-beta, beta), tau = d.uniform(-beta, beta);
    double rr = -eta + 2 * eta * (double(i) + d.uniform()) / double(N);
    Mat2 g = push * prd(s, tau, rr);
    std::vector<char> used(F.size(), 0);
    for (std::size_t c = 0; c < F.size(); ++c) {
      if (used[c]) continue;
      std::vector<Traceless> members;
      Mat2 back = sl2_exp(-F[c]);
      for (std::size_t j = c; j < F.size(); ++j) {
        if (used[j]) continue;
        if (adjoint_r(g, F[j] - F[c]).norm() > beta / 2) continue;
        Traceless v = j == c ? Traceless{} : adjoint_r(g, sl2_log(sl2_exp(F[j]) * back));
        if (v.norm() >= beta) continue;
        used[j] = 1;
        members.push_back(v);
      }
      auto base = act(GroupElement::diagonal(g) * exp_r(F[c]), cone.y);
      if (base.inj < std::sqrt(beta)) {
        ++charts[i].dropped;
        continue;
      }
      charts[i].cones.push_back(offspring_cone(base, std::move(members), cone));
    }
  });
  for (auto& c : charts) {
    rep.dropped += c.dropped;
    for (auto& o : c.cones) rep.offspring.push_back(std::move(o));
  }
  if (rep.offspring.empty())
    throw Error(ErrorCode::InjectivityViolation, "every offspring base has inj below beta^{1/2}");

  double esum = 0;
  std::size_t ecount = 0;
  rep.at_floor = true;
  for (const auto& o : rep.offspring) {
    const auto& G = o.F.points();
    if (G.size() > std::size_t(R) + 1) rep.at_floor = false;
    if (double(G.size()) < 0.5 * std::pow(beta, 9) * double(F.size())) rep.sheet_counts_ok = false;
    for (std::size_t j = 0; j < G.size(); ++j) {
      auto fp = margulis_fpsi(o, Mat2::identity(), {j, {}}, b, R, alpha);
      rep.f_after = std::max(rep.f_after, fp.f);
      rep.psi_after = std::max(rep.psi_after, fp.psi);
      esum += energy(G, beta, R, alpha, j);
      ++ecount;
    }
  }
  rep.energy_after = esum / double(ecount);
  rep.contraction = rep.f_after / rep.f_before;
  return rep;
}

}  // namespace ulab
