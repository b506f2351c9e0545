#include "ulab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ulab/parallel.hpp"
#include "ulab/rng.hpp"

namespace ulab {

double bump(double s) { return std::abs(s) < 1 ? std::exp(1 - 1 / (1 - s * s)) : 0.0; }

double bump_integral() {
  // composite Simpson
  static const double value = [] {
    const int n = 20000;
    double h = 2.0 / n, sum = 0;
    for (int i = 0; i <= n; ++i) {
      double s = -1 + i * h;
      double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
      sum += w * bump(s);
    }
    return sum * h / 3;
  }();
  return value;
}

namespace {

double siegel(const Mat2& basis, double c, double w) {
  double sum = 0;
  for_each_lattice_vector(basis, c + w, [&](double x, double y) { sum += bump((std::hypot(x, y) - c) / w); });
  return sum;
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3 - 2 * u);
}

void check_time(double t) {
  if (!(std::abs(t) <= kMaxFlowTime))
    throw Error(ErrorCode::OverflowGuard, "flow time " + std::to_string(t) + " exceeds the guard of 60");
}

// Monte Carlo standard error for one sample per stratum: collapse adjacent
// strata into pairs.
double stratified_se(const std::vector<double>& y) {
  std::size_t pairs = y.size() / 2;
  if (pairs == 0) return 0;
  double s = 0;
  for (std::size_t k = 0; k < pairs; ++k) {
    double d = y[2 * k] - y[2 * k + 1];
    s += d * d;
  }
  s *= double(y.size()) / double(2 * pairs);
  return std::sqrt(s) / double(y.size());
}

Estimate mean_se(const std::vector<double>& y) {
  double n = double(y.size());
  double m = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double v = 0;
  for (double x : y) v += (x - m) * (x - m);
  v = y.size() > 1 ? v / (n - 1) : 0;
  return {m, std::sqrt(v / n), y.size()};
}

Estimate binomial(std::size_t hits, std::size_t n) {
  double p = double(hits) / double(n);
  return {p, std::sqrt(p * (1 - p) / double(n)), n};
}

}  // namespace

Estimate stratified_estimate(const std::vector<double>& y) {
  require(!y.empty(), "estimate of an empty sample");
  return {std::accumulate(y.begin(), y.end(), 0.0) / double(y.size()), stratified_se(y), y.size()};
}

Estimate sample_estimate(const std::vector<double>& y) {
  require(!y.empty(), "estimate of an empty sample");
  return mean_se(y);
}

// ---------------------------------------------------------------- tests

TestFunction TestFunction::siegel_product(double c1, double w1, double c2, double w2) {
  require(w1 > 0 && w2 > 0 && c1 > w1 && c2 > w2, "annulus bumps need 0 < w < c");
  TestFunction f;
  f.kind_ = Kind::SiegelProduct;
  f.name_ = "siegel(" + std::to_string(c1) + "," + std::to_string(w1) + ";" + std::to_string(c2) + "," +
            std::to_string(w2) + ")";
  f.par_ = {c1, w1, c2, w2};
  // integral over R^2 of bump((|v| - c) / w) = 2 pi c w * integral of bump
  f.haar_mean_ = (2 * M_PI * c1 * w1 * bump_integral()) * (2 * M_PI * c2 * w2 * bump_integral());
  // The Siegel transform is unbounded in the cusp; sup is the largest value
  // seen on a fixed Haar sample.
  std::vector<double> v(4000);
  parallel_for(v.size(), [&](std::size_t i) { v[i] = f(haar_sample(hash_tag("siegel_sup") + i)); });
  f.sup_ = *std::max_element(v.begin(), v.end());
  f.fill_lipschitz();
  return f;
}

TestFunction TestFunction::smooth_bump(const CosetPoint& center, double radius, std::uint64_t seed, std::size_t mc) {
  require(radius > 0, "bump radius must be positive");
  require(center.model() == Model::ProductRR, "smooth_bump is implemented for ProductRR");
  TestFunction f;
  f.kind_ = Kind::SmoothBump;
  f.name_ = "bump(" + std::to_string(radius) + ")";
  f.par_ = {radius};
  f.center_ = std::make_shared<CosetPoint>(center);
  f.sup_ = 1;
  f.fill_haar_mc(seed, mc);
  f.fill_lipschitz();
  return f;
}

TestFunction TestFunction::inj_indicator(double eta) {
  require(eta > 0, "eta must be positive");
  TestFunction f;
  f.kind_ = Kind::InjIndicator;
  f.name_ = "inj<" + std::to_string(eta);
  f.par_ = {eta};
  f.sup_ = 1;
  if (eta > kInjCap) {
    f.haar_mean_ = 1;
  } else {
    // P(lambda_1 < delta) = 3 delta^2 / pi per factor for delta <= 1.
    double delta = eta / kInjChart;
    double p = delta <= 1 ? 3 * delta * delta / M_PI : 1;
    f.haar_mean_ = 1 - (1 - p) * (1 - p);
  }
  f.fill_lipschitz();
  return f;
}

TestFunction TestFunction::constant(double c) {
  TestFunction f;
  f.kind_ = Kind::Constant;
  f.name_ = "const";
  f.par_ = {c};
  f.haar_mean_ = c;
  f.sup_ = std::abs(c);
  return f;
}

TestFunction TestFunction::orbit_complement(const PeriodicOrbit& Y, double rho, std::uint64_t seed, std::size_t mc) {
  require(rho > 0, "rho must be positive");
  TestFunction f;
  f.kind_ = Kind::OrbitComplement;
  f.name_ = "off_orbit(det=" + std::to_string(Y.det) + "," + std::to_string(rho) + ")";
  f.par_ = {rho};
  f.orbit_ = std::make_shared<PeriodicOrbit>(Y);
  f.sup_ = 1;
  f.fill_haar_mc(seed, mc);
  f.fill_lipschitz();
  return f;
}

double TestFunction::operator()(const CosetPoint& x) const {
  switch (kind_) {
    case Kind::Constant:
      return par_[0];
    case Kind::SiegelProduct:
      return siegel(x.rep.first(), par_[0], par_[1]) * siegel(x.rep.second(), par_[2], par_[3]);
    case Kind::SmoothBump: {
      double d = std::max(factor_distance(x.rep.first(), center_->rep.first()),
                          factor_distance(x.rep.second(), center_->rep.second()));
      return bump(d / par_[0]);
    }
    case Kind::InjIndicator:
      return x.inj < par_[0] ? 1.0 : 0.0;
    case Kind::OrbitComplement:
      return smoothstep(dist_to_orbit(x, *orbit_, 1e6) / par_[0]);
  }
  return 0;
}

void TestFunction::fill_haar_mc(std::uint64_t seed, std::size_t n) {
  std::vector<double> v(n);
  std::uint64_t base = stream_key(seed, "haar_mean:" + name_);
  parallel_for(n, [&](std::size_t i) { v[i] = (*this)(haar_sample(base + i)); });
  auto e = mean_se(v);
  haar_mean_ = e.value;
  haar_se_ = e.std_error;
}

void TestFunction::fill_lipschitz() {
  // Finite differences along the six one-parameter directions of G.
  const double eps = 1e-5;
  const std::size_t pts = 32;
  std::vector<double> best(pts, 0);
  parallel_for(pts, [&](std::size_t i) {
    auto x = haar_sample(hash_tag("lipschitz") + i);
    double f0 = (*this)(x);
    const Mat2 gens[3] = {{0.5, 0, 0, -0.5}, {0, 1, 0, 0}, {0, 0, 1, 0}};
    for (int factor = 0; factor < 2; ++factor)
      for (const auto& X : gens) {
        Mat2 e = sl2_exp(Traceless::of(X * eps));
        auto g = factor == 0 ? GroupElement::product(e, Mat2::identity()) : GroupElement::product(Mat2::identity(), e);
        best[i] = std::max(best[i], std::abs((*this)(act(g, x)) - f0) / eps);
      }
  });
  lipschitz_ = *std::max_element(best.begin(), best.end());
}

// ---------------------------------------------------------------- sparse measures

SparseMeasure::SparseMeasure(std::vector<std::pair<double, double>> a, double C_, double theta_, double scale_)
    : atoms(std::move(a)), C(C_), theta(theta_), scale(scale_) {
  if (atoms.empty()) throw Error(ErrorCode::InvalidCertificate, "measure has no atoms");
  if (!(scale > 0 && scale <= 1 && C > 0 && theta >= 0 && theta < 1))
    throw Error(ErrorCode::InvalidCertificate, "certificate parameters out of range");
  std::sort(atoms.begin(), atoms.end());
  double total = 0;
  for (auto& [s, w] : atoms) {
    if (!(s >= 0 && s <= 1 && w >= 0)) throw Error(ErrorCode::InvalidCertificate, "atom outside [0,1] or negative");
    total += w;
  }
  if (std::abs(total - 1) > 1e-9) throw Error(ErrorCode::InvalidCertificate, "weights do not sum to 1");
  double bound = C * std::pow(scale, 1 - theta);
  double worst = max_window_mass(scale);
  if (worst > bound * (1 + 1e-12))
    throw Error(ErrorCode::InvalidCertificate,
                "interval of length " + std::to_string(scale) + " carries mass " + std::to_string(worst));
}

double SparseMeasure::max_window_mass(double length) const {
  // Closed windows [s_i, s_i + length]; a maximizing window can always be
  // slid right until its left end hits an atom.
  double best = 0, mass = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (j < i) {
      j = i;
      mass = 0;
    }
    while (j < atoms.size() && atoms[j].first <= atoms[i].first + length) mass += atoms[j++].second;
    best = std::max(best, mass);
    mass -= atoms[i].second;
  }
  return best;
}

SparseMeasure SparseMeasure::lebesgue(int n) {
  require(n >= 1, "n must be positive");
  std::vector<std::pair<double, double>> a;
  for (int i = 0; i < n; ++i) a.push_back({(i + 0.5) / n, 1.0 / n});
  // A closed window of length 1/n meets at most two midpoints.
  return SparseMeasure(a, 2, 0, 1.0 / n);
}

SparseMeasure SparseMeasure::cantor(int depth) {
  require(depth >= 0 && depth <= 20, "depth out of range");
  std::vector<double> left{0};
  double len = 1;
  for (int k = 0; k < depth; ++k) {
    len /= 3;
    std::vector<double> next;
    for (double x : left) {
      next.push_back(x);
      next.push_back(x + 2 * len);
    }
    left = std::move(next);
  }
  std::vector<std::pair<double, double>> a;
  for (double x : left) a.push_back({x + len / 2, 1.0 / double(left.size())});
  double theta = 1 - std::log(2.0) / std::log(3.0);
  return SparseMeasure(a, 1, theta, len);
}

SparseMeasure SparseMeasure::atom(double s) { return SparseMeasure({{s, 1.0}}, 1, 0, 1); }

// ---------------------------------------------------------------- estimators

CosetPoint translate(const CosetPoint& x, double t, double r) {
  check_time(t);
  return act(one_param(OneParam::a, t, std::nullopt, x.model()) * one_param(OneParam::u, r, std::nullopt, x.model()), x);
}

CosetPoint flow_act(const GroupElement& left, const CosetPoint& x, double t) {
  check_time(t);
  return act(left, x);
}

double stratified(std::size_t i, std::size_t n, std::uint64_t seed, const char* experiment) {
  Draws d(stream_key(seed, experiment), i);
  return (double(i) + d.uniform()) / double(n);
}

Discrepancy unipotent_discrepancy(const CosetPoint& x0, double logT, const std::vector<TestFunction>& tests,
                                  std::size_t N, std::uint64_t seed) {
  require(N >= 100, "N must be >= 100");
  check_time(logT);
  std::vector<std::vector<double>> vals(tests.size(), std::vector<double>(N));
  parallel_for(N, [&](std::size_t i) {
    auto y = translate(x0, logT, stratified(i, N, seed, "unipotent_discrepancy"));
    for (std::size_t k = 0; k < tests.size(); ++k) vals[k][i] = tests[k](y);
  });
  Discrepancy out;
  for (std::size_t k = 0; k < tests.size(); ++k) {
    double mean = std::accumulate(vals[k].begin(), vals[k].end(), 0.0) / double(N);
    double se = stratified_se(vals[k]);
    Estimate e{std::abs(mean - tests[k].haar_mean()), std::hypot(se, tests[k].haar_se()), N};
    if (tests[k].kind() == TestFunction::Kind::Constant) e = {0, 0, N};
    out.max = std::max(out.max, e.value);
    out.per_test.push_back(e);
  }
  return out;
}

Estimate horosphere_average(const CosetPoint& x, double t, double delta, const TestFunction& test, std::size_t N,
                            std::uint64_t seed) {
  require(delta > 0 && delta <= 1, "delta must lie in (0, 1]");
  require(N >= 1, "N must be positive");
  check_time(t);
  std::vector<double> v(N);
  std::uint64_t key = stream_key(seed, "horosphere_average");
  auto at = one_param(OneParam::a, t, std::nullopt, x.model());
  parallel_for(N, [&](std::size_t i) {
    Draws d(key, i);
    double r = delta * d.uniform(), s = d.uniform();
    v[i] = test(act(at * one_param(OneParam::n, r, s, x.model()), x));
  });
  return mean_se(v);
}

Estimate sparse_average(const CosetPoint& x, double t, double delta, const SparseMeasure& rho,
                        const TestFunction& test, std::size_t N, std::uint64_t seed) {
  require(delta > 0 && delta <= 1, "delta must lie in (0, 1]");
  require(N >= 1, "N must be positive");
  check_time(t);
  double lb = std::abs(std::log(rho.scale));
  if (rho.scale < 1 && (t < lb / 4 || t > lb))
    warn("sparse_average: t = " + std::to_string(t) + " outside [|log b|/4, |log b|]");
  std::vector<double> cdf;
  double acc = 0;
  for (auto& a : rho.atoms) cdf.push_back(acc += a.second);
  std::vector<double> v(N);
  std::uint64_t key = stream_key(seed, "sparse_average");
  auto at = one_param(OneParam::a, t, std::nullopt, x.model());
  parallel_for(N, [&](std::size_t i) {
    Draws d(key, i);
    double u = d.uniform() * acc;
    std::size_t j = std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), cdf.size() - 1);
    double r = delta * d.uniform();
    auto g = at * one_param(OneParam::u, r, std::nullopt, x.model()) *
             one_param(OneParam::v, rho.atoms[j].first, std::nullopt, x.model());
    v[i] = test(act(g, x));
  });
  return mean_se(v);
}

Estimate nondivergence_fraction(const CosetPoint& x, double t, double eps, std::size_t N, std::uint64_t seed) {
  require(N >= 1 && eps > 0, "need N >= 1 and eps > 0");
  double need = std::abs(std::log(x.inj)) + kNondivergenceOffset;
  if (t < need)
    throw Error(ErrorCode::RegimeViolation, "t = " + std::to_string(t) + " below |log inj(x)| + 8 = " +
                                                std::to_string(need));
  // eps * eps rounds up at eps = 0.1 and would put the capped value 0.01
  // inside the event.
  const double thr = eps * eps * (1 - 1e-12);
  std::vector<char> hit(N);
  parallel_for(N, [&](std::size_t i) {
    hit[i] = translate(x, t, stratified(i, N, seed, "nondivergence_fraction")).inj < thr;
  });
  return binomial(std::size_t(std::count(hit.begin(), hit.end(), 1)), N);
}

std::vector<CosetPoint> random_walk_push(const CosetPoint& x, double t, double ell, int n, double beta, std::size_t N,
                                         std::uint64_t seed) {
  require(n >= 0 && n <= 64, "n must lie in [0, 64]");
  require(beta >= 0, "beta must be non-negative");
  check_time(t);
  check_time(ell);
  if (n > 0 && beta > 0 && std::exp(-ell) > beta * beta)
    warn("random_walk_push: e^{-ell} > beta^2, outside the thickening regime");
  std::vector<CosetPoint> out(N);
  std::uint64_t key = stream_key(seed, "random_walk_push");
  const double side = beta + 100 * beta * beta;
  parallel_for(N, [&](std::size_t i) {
    Draws d(key, i);
    CosetPoint y = translate(x, t, d.uniform());
    double s = d.uniform(-side, side), tau = d.uniform(-side, side);
    if (side > 0)
      y = act(one_param(OneParam::u_minus, s, std::nullopt, x.model()) *
                  one_param(OneParam::a, tau, std::nullopt, x.model()),
              y);
    for (int k = 0; k < n; ++k) y = translate(y, ell, d.uniform());
    out[i] = y;
  });
  return out;
}

Estimate avoidance_fraction(const CosetPoint& x0, double s, double eta, const std::vector<PeriodicOrbit>& catalog,
                            double thresh, std::size_t N, std::uint64_t seed) {
  require(N >= 1 && eta >= 0 && thresh >= 0, "invalid avoidance parameters");
  double need = std::abs(std::log(x0.inj)) + kAvoidanceOffset;
  if (s < need)
    throw Error(ErrorCode::RegimeViolation, "s = " + std::to_string(s) + " below |log inj(x0)| + 1 = " +
                                                std::to_string(need));
  std::vector<char> bad(N);
  parallel_for(N, [&](std::size_t i) {
    auto y = translate(x0, s, stratified(i, N, seed, "avoidance_fraction"));
    bool b = y.inj <= eta;
    for (std::size_t k = 0; !b && k < catalog.size(); ++k) b = dist_to_orbit(y, catalog[k], 1e6) <= thresh;
    bad[i] = b;
  });
  return binomial(std::size_t(std::count(bad.begin(), bad.end(), 1)), N);
}

CosetPoint generic_point() {
  double th = 1.0;
  Mat2 k{std::cos(th), -std::sin(th), std::sin(th), std::cos(th)};
  Mat2 g2 = k * one_param(OneParam::a, std::sqrt(2.0) - 1).first() * one_param(OneParam::u, std::sqrt(3.0)).first();
  return make_point(GroupElement::product(Mat2::identity(), g2));
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope fit needs two or more points");
  double n = double(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  require(sxx > 0, "slope fit needs distinct x");
  return sxy / sxx;
}

}  // namespace ulab
