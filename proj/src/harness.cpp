#include "ulab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "ulab/closing.hpp"
#include "ulab/dimension.hpp"
#include "ulab/error.hpp"
#include "ulab/flow.hpp"
#include "ulab/margulis.hpp"
#include "ulab/parallel.hpp"
#include "ulab/projection.hpp"
#include "ulab/rng.hpp"

#ifndef ULAB_VERSION
#define ULAB_VERSION "0.0.0"
#endif

namespace ulab {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* code_version() { return ULAB_VERSION; }

namespace {

// ---------------------------------------------------------------- parameter table

enum class Kind { Number, Integer, List, Choice, Flag };

struct ParamSpec {
  std::string name;
  Kind kind = Kind::Number;
  json def;
  double lo = -1e300, hi = 1e300;
  bool lo_open = false;
  std::string doc;
  std::vector<std::string> choices = {};
};

struct ColumnSpec {
  std::string name, doc;
};

struct Spec {
  std::string name, doc;
  std::vector<ParamSpec> params;
  std::vector<ColumnSpec> columns;
  std::vector<std::string> models{"ProductRR"};
  std::function<void(const json&, std::vector<std::string>&)> cross;
  std::function<ExperimentOutput(const json&, std::uint64_t)> run;
};

ParamSpec num(std::string n, double def, double lo, double hi, std::string doc, bool lo_open = false) {
  return {std::move(n), Kind::Number, def, lo, hi, lo_open, std::move(doc)};
}
ParamSpec integer(std::string n, std::int64_t def, double lo, double hi, std::string doc) {
  return {std::move(n), Kind::Integer, def, lo, hi, false, std::move(doc)};
}
ParamSpec list(std::string n, std::vector<double> def, double lo, double hi, std::string doc, bool lo_open = false) {
  return {std::move(n), Kind::List, def, lo, hi, lo_open, std::move(doc)};
}
ParamSpec choice(std::string n, std::string def, std::vector<std::string> ch, std::string doc) {
  return {std::move(n), Kind::Choice, def, 0, 0, false, std::move(doc), std::move(ch)};
}
ParamSpec flag(std::string n, bool def, std::string doc) { return {std::move(n), Kind::Flag, def, 0, 0, false, std::move(doc)}; }

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string range_text(const ParamSpec& p) {
  std::string lo = p.lo <= -1e300 ? "-inf" : fmt(p.lo), hi = p.hi >= 1e300 ? "inf" : fmt(p.hi);
  return std::string(p.lo_open ? "(" : "[") + lo + ", " + hi + "]";
}

bool in_range(const ParamSpec& p, double v) {
  if (!std::isfinite(v)) return false;
  if (p.lo_open ? !(v > p.lo) : !(v >= p.lo)) return false;
  return v <= p.hi;
}

void check_param(const ParamSpec& p, const json& v, std::vector<std::string>& out) {
  const std::string f = p.name + ": ";
  switch (p.kind) {
    case Kind::Number:
      if (!v.is_number()) return out.push_back(f + "expected a number");
      if (!in_range(p, v.get<double>())) out.push_back(f + "must lie in " + range_text(p));
      return;
    case Kind::Integer:
      if (!v.is_number_integer()) return out.push_back(f + "expected an integer");
      if (!in_range(p, double(v.get<std::int64_t>()))) out.push_back(f + "must lie in " + range_text(p));
      return;
    case Kind::List:
      if (!v.is_array() || v.empty()) return out.push_back(f + "expected a nonempty array of numbers");
      for (const auto& e : v) {
        if (!e.is_number()) return out.push_back(f + "expected a nonempty array of numbers");
        if (!in_range(p, e.get<double>())) return out.push_back(f + "every entry must lie in " + range_text(p));
      }
      return;
    case Kind::Choice: {
      if (!v.is_string()) return out.push_back(f + "expected a string");
      auto s = v.get<std::string>();
      if (std::find(p.choices.begin(), p.choices.end(), s) == p.choices.end()) {
        std::string all;
        for (const auto& c : p.choices) all += (all.empty() ? "" : ", ") + c;
        out.push_back(f + "must be one of {" + all + "}");
      }
      return;
    }
    case Kind::Flag:
      if (!v.is_boolean()) out.push_back(f + "expected true or false");
      return;
  }
}

// ---------------------------------------------------------------- CSV

class Csv {
 public:
  explicit Csv(const std::vector<ColumnSpec>& cols) : n_(cols.size()) {
    for (std::size_t i = 0; i < cols.size(); ++i) text_ += (i ? "," : "") + cols[i].name;
    text_ += "\n";
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != n_) throw Error(ErrorCode::InvalidArgument, "CSV row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
  }
  std::string str() const { return text_; }

 private:
  std::size_t n_;
  std::string text_;
};

std::string cell(double x) {
  if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "non-finite value in a results row");
  return fmt(x);
}
std::string cell(std::size_t x) { return std::to_string(x); }
std::string cell(int x) { return std::to_string(x); }
std::string cell(bool x) { return x ? "1" : "0"; }

// ---------------------------------------------------------------- shared pieces

double get(const json& p, const char* k) { return p.at(k).get<double>(); }
std::int64_t geti(const json& p, const char* k) { return p.at(k).get<std::int64_t>(); }
std::string gets(const json& p, const char* k) { return p.at(k).get<std::string>(); }
std::vector<double> getl(const json& p, const char* k) { return p.at(k).get<std::vector<double>>(); }

ParamSpec start_param(std::string def, std::vector<std::string> ch) {
  return choice("start", std::move(def), std::move(ch),
                "starting point: identity/diagonal = identity coset (on the diagonal periodic orbit), generic = fixed "
                "point off small-height orbits, haar = Haar sample, planted = exp(offset * direction) applied to the "
                "identity coset");
}

std::vector<ParamSpec> start_params(std::string def, std::vector<std::string> ch, double offset,
                                    std::vector<double> dir) {
  return {start_param(std::move(def), std::move(ch)), integer("haar_seed", 1, 0, 1e15, "seed of the Haar sample"),
          num("offset", offset, 0, 1, "planted offset scale"),
          list("direction", std::move(dir), -1e3, 1e3, "planted direction (x11, x12, x21)")};
}

CosetPoint start_point(const json& p) {
  auto s = gets(p, "start");
  if (s == "identity" || s == "diagonal") return identity_coset();
  if (s == "generic") return generic_point();
  if (s == "haar") return haar_sample(std::uint64_t(geti(p, "haar_seed")));
  auto d = getl(p, "direction");
  Traceless w{d[0], d[1], d[2]};
  return act(exp_r(w * get(p, "offset")), identity_coset());
}

void check_direction(const json& p, std::vector<std::string>& v) {
  if (!p.contains("direction")) return;
  const auto& d = p["direction"];
  if (!d.is_array() || d.size() != 3) {
    v.push_back("direction: expected three entries");
    return;
  }
  if (gets(p, "start") == "planted" && Traceless{d[0].get<double>(), d[1].get<double>(), d[2].get<double>()}.norm() == 0)
    v.push_back("direction: must be nonzero for a planted start");
}

Assertion at_most(std::string name, double value, double bound) { return {std::move(name), value <= bound, value, bound}; }
Assertion at_least(std::string name, double value, double bound) { return {std::move(name), value >= bound, value, bound}; }

std::vector<TestFunction> siegel_tests() {
  return {TestFunction::siegel_product(1, 0.5, 1, 0.5), TestFunction::siegel_product(0.8, 0.4, 1.2, 0.5),
          TestFunction::siegel_product(1.5, 0.6, 0.7, 0.3)};
}

// ---------------------------------------------------------------- experiments

ExperimentOutput run_equidistribute(const json& p, std::uint64_t seed, const std::vector<ColumnSpec>& cols) {
  auto x0 = start_point(p);
  const bool orbit = gets(p, "tests") == "orbit";
  std::vector<TestFunction> tests;
  if (orbit)
    tests.push_back(TestFunction::orbit_complement(diagonal_orbit(), get(p, "orbit_rho"), seed,
                                                   std::size_t(geti(p, "haar_mc"))));
  else
    tests = siegel_tests();
  const std::size_t main_tests = tests.size();
  if (p.at("include_constant").get<bool>()) tests.push_back(TestFunction::constant(1));
  auto logTs = getl(p, "logT");
  const auto N = std::size_t(geti(p, "N"));
  Csv csv(cols);
  ExperimentOutput out;
  std::vector<double> xs, ys;
  double persist = std::numeric_limits<double>::infinity(), constant_max = 0;
  json per = json::array();
  for (double logT : logTs) {
    auto d = unipotent_discrepancy(x0, logT, tests, N, seed);
    double mx = 0;
    for (std::size_t k = 0; k < tests.size(); ++k) {
      std::string name = k < main_tests ? (orbit ? "orbit_complement" : "siegel" + std::to_string(k + 1)) : "constant";
      csv.row({cell(logT), name, cell(d.per_test[k].value), cell(d.per_test[k].std_error)});
      if (k < main_tests) {
        mx = std::max(mx, d.per_test[k].value);
        persist = std::min(persist, d.per_test[k].value / tests[k].sup());
      } else {
        constant_max = std::max(constant_max, d.per_test[k].value);
      }
    }
    per.push_back({{"logT", logT}, {"max_discrepancy", mx}});
    if (mx > 0) {
      xs.push_back(logT);
      ys.push_back(std::log(mx));
    }
  }
  out.aggregates["per_logT"] = per;
  if (orbit) {
    out.aggregates["min_discrepancy_over_sup"] = persist;
    out.assertions.push_back(at_least("discrepancy persists on every logT", persist, get(p, "persist_share")));
  } else if (logTs.size() >= 2) {
    double slope = xs.size() >= 2 ? fit_slope(xs, ys) : 0;
    out.aggregates["slope"] = slope;
    out.assertions.push_back(at_most("log-log slope", slope, get(p, "slope_max")));
  }
  if (p.at("include_constant").get<bool>()) out.assertions.push_back(at_most("constant test discrepancy", constant_max, 0));
  out.csv = csv.str();
  return out;
}

ExperimentOutput run_nondiverge(const json& p, std::uint64_t seed, const std::vector<ColumnSpec>& cols) {
  auto x = start_point(p);
  auto eps = getl(p, "eps");
  std::sort(eps.begin(), eps.end());
  Csv csv(cols);
  double C = 0;
  int non_monotone = 0;
  double prev = -1;
  for (double e : eps) {
    auto f = nondivergence_fraction(x, get(p, "t"), e, std::size_t(geti(p, "N")), seed);
    csv.row({cell(e), cell(f.value), cell(f.std_error), cell(f.value / e)});
    C = std::max(C, f.value / e);
    non_monotone += f.value < prev;
    prev = f.value;
  }
  ExperimentOutput out;
  out.aggregates["C"] = C;
  out.assertions.push_back(at_most("fitted C", C, get(p, "C_max")));
  out.assertions.push_back(at_most("monotonicity violations", non_monotone, 0));
  out.csv = csv.str();
  return out;
}

ExperimentOutput run_avoid(const json& p, std::uint64_t seed, const std::vector<ColumnSpec>& cols) {
  auto x = start_point(p);
  auto cat = periodic_catalog(int(geti(p, "max_height")));
  auto f = avoidance_fraction(x, get(p, "s"), get(p, "eta"), cat, get(p, "thresh"), std::size_t(geti(p, "N")), seed);
  Csv csv(cols);
  csv.row({cell(get(p, "s")), cell(f.value), cell(f.std_error), cell(cat.size())});
  ExperimentOutput out;
  out.aggregates["bad_fraction"] = f.value;
  out.aggregates["catalog_size"] = cat.size();
  if (gets(p, "expect") == "low")
    out.assertions.push_back(at_most("bad fraction", f.value, get(p, "bound_low")));
  else
    out.assertions.push_back(at_least("bad fraction", f.value, get(p, "bound_high")));
  out.csv = csv.str();
  return out;
}

ExperimentOutput projection_output(const json& p, const ProjectionScanReport& rep) {
  ExperimentOutput out;
  out.csv = rep.to_csv();
  check_csv(out.csv, "results.csv");
  out.aggregates = json::parse(rep.to_json());
  if (gets(p, "cloud") == "cantor") {
    out.assertions.push_back(at_most("exceptional fraction", rep.exceptional_fraction, get(p, "exceptional_max")));
  } else {
    double worst = 0;
    for (double r : rep.exceptional_set) worst = std::max(worst, std::abs(r - get(p, "r0")));
    out.aggregates["max_distance_to_r0"] = worst;
    out.assertions.push_back(at_most("exceptional r distance to r0", worst, get(p, "window")));
    out.assertions.push_back(at_least("exceptional r count", double(rep.exceptional_set.size()), 1));
  }
  return out;
}

PointCloud projection_cloud(const json& p) {
  Traceless dir{0, 1, 0};
  if (gets(p, "cloud") == "adversarial") dir = planted_kernel_direction(get(p, "r0"));
  return cantor_cloud(int(geti(p, "depth")), get(p, "alpha"), get(p, "b0"), dir);
}

ExperimentOutput run_project(const json& p, std::uint64_t, const std::vector<ColumnSpec>&) {
  auto cloud = projection_cloud(p);
  auto rep = linear_scan(cloud, int(geti(p, "R")), get(p, "alpha"), get(p, "eps"), get(p, "b0") * get(p, "b_ratio"),
                         std::size_t(geti(p, "r_count")), get(p, "c_fit"));
  return projection_output(p, rep);
}

ExperimentOutput run_project_nonlinear(const json& p, std::uint64_t, const std::vector<ColumnSpec>&) {
  auto cloud = projection_cloud(p);
  auto rep = nonlinear_scan(cloud, get(p, "alpha"), get(p, "eps"), get(p, "b0"), get(p, "b0") * get(p, "b_ratio"),
                            std::size_t(geti(p, "r_count")), get(p, "c_fit"));
  return projection_output(p, rep);
}

ExperimentOutput run_sweep(const json& p, std::uint64_t seed, const std::vector<ColumnSpec>& cols) {
  auto x = start_point(p);
  auto Y = diagonal_orbit();
  const double S = get(p, "search_norm");
  auto sweep = contraction_sweep(x, Y, get(p, "d"), int(geti(p, "ell")), std::size_t(geti(p, "N")), seed, S);
  Csv csv(cols);
  double prev = f_Y_eval(x, Y, S);
  csv.row({cell(0), cell(prev), cell(0.0), cell(std::pow(x.inj, -1.0 / 3)), cell(0.0), cell(1.0)});
  int violations = 0;
  bool floor = false;
  double plateau = 0;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const auto& s = sweep[k];
    double ratio = s.f.value / prev;
    csv.row({cell(int(k + 1)), cell(s.f.value), cell(s.f.std_error), cell(s.floor.value), cell(s.floor.std_error),
             cell(ratio)});
    if (!floor) violations += s.f.value > 0.5 * prev;
    floor = floor || s.f.value <= 2 * s.floor.value;
    plateau = std::max(plateau, s.f.value);
    prev = s.f.value;
  }
  ExperimentOutput out;
  out.aggregates["final_f"] = sweep.back().f.value;
  out.aggregates["final_floor"] = sweep.back().floor.value;
  out.aggregates["reached_floor"] = floor;
  if (gets(p, "start") == "planted") {
    out.assertions.push_back(at_most("steps that failed to halve before the floor", violations, 0));
    out.assertions.push_back(at_least("floor reached", floor ? 1 : 0, 1));
  } else {
    out.assertions.push_back(at_most("plateau of f_Y", plateau, 3 * std::pow(0.01, -1.0 / 3)));
  }
  out.csv = csv.str();
  return out;
}

ExperimentOutput run_regularize(const json& p, std::uint64_t seed, const std::vector<ColumnSpec>& cols) {
  const int clouds = int(geti(p, "clouds"));
  const double beta = get(p, "beta");
  const int M = int(geti(p, "M")), k0 = int(geti(p, "k0")), k1 = int(geti(p, "k1"));
  struct Row {
    std::uint64_t cs = 0;
    std::size_t n = 0, parts = 0, discard = 0, min_part = 0;
    int shifts = 0;
    bool ok = false;
  };
  std::vector<Row> rows(static_cast<std::size_t>(clouds));
  for (int i = 0; i < clouds; ++i) {
    auto& r = rows[std::size_t(i)];
    r.cs = seed + std::uint64_t(i);
    auto cloud = fractal_cloud(r.cs, int(geti(p, "maps")), get(p, "ratio"), int(geti(p, "depth")), get(p, "b0"), M, k0, k1);
    auto reg = regularize(cloud, M, k0, k1, beta);
    r.n = cloud.size();
    r.parts = reg.parts.size();
    r.discard = reg.discard.size();
    r.min_part = r.n;
    for (const auto& part : reg.parts) r.min_part = std::min(r.min_part, part.members.size());
    r.shifts = reg.shifts_tried;
    r.ok = verify_regularization(cloud, reg).empty();
  }
  Csv csv(cols);
  int bad = 0;
  for (const auto& r : rows) {
    double n = double(r.n);
    csv.row({cell(std::size_t(r.cs)), cell(r.n), cell(r.parts), cell(r.discard), cell(std::pow(beta, 0.25) * n),
             cell(r.min_part), cell(beta * beta * n), cell(r.shifts), cell(r.ok)});
    bad += !r.ok;
  }
  ExperimentOutput out;
  out.aggregates["clouds"] = clouds;
  out.aggregates["failed"] = bad;
  out.assertions.push_back(at_most("clouds failing the replay", bad, 0));
  out.csv = csv.str();
  return out;
}

ExperimentOutput run_dimension_step(const json& p, std::uint64_t seed, const std::vector<ColumnSpec>& cols) {
  const double eta = get(p, "eta"), beta = eta * eta;
  const int npts = int(geti(p, "points")), steps = int(geti(p, "steps"));
  auto dv = getl(p, "direction");
  Traceless dir{dv[0], dv[1], dv[2]};
  dir = dir * (1 / dir.norm());
  std::vector<Traceless> pts;
  for (int j = 0; j < npts; ++j) pts.push_back(dir * (get(p, "spread") * beta * (2.0 * j / (npts - 1) - 1)));
  auto cone = cone_build(identity_coset(), PointCloud(pts, beta), beta, eta);
  const auto rc = std::size_t(geti(p, "r_count"));
  auto grid = r_grid(rc);
  struct StepRow {
    int step;
    double before, after;
    bool floor;
    std::size_t offspring;
  };
  std::vector<std::vector<StepRow>> rows(rc);
  std::vector<char> success(rc, 0);
  for (std::size_t i = 0; i < rc; ++i) {
    ConeSet c = cone;
    bool ok = true;
    for (int k = 0; k < steps; ++k) {
      auto rep = dimension_step(c, get(p, "ell"), grid[i], get(p, "b"), int(geti(p, "R")), get(p, "alpha"),
                                std::size_t(geti(p, "N")), seed + std::uint64_t(k));
      rows[i].push_back({k + 1, rep.energy_before, rep.energy_after, rep.at_floor, rep.offspring.size()});
      ok = ok && rep.energy_after < rep.energy_before;
      if (rep.at_floor || rep.offspring.empty()) break;
      c = rep.offspring.front();
    }
    success[i] = ok;
  }
  Csv csv(cols);
  std::size_t good = 0;
  for (std::size_t i = 0; i < rc; ++i) {
    good += success[i];
    for (const auto& s : rows[i])
      csv.row({cell(grid[i]), cell(s.step), cell(s.before), cell(s.after), cell(s.after < s.before), cell(s.floor),
               cell(s.offspring)});
  }
  ExperimentOutput out;
  double share = double(good) / double(rc);
  out.aggregates["decreasing_share"] = share;
  out.assertions.push_back(at_least("share of r with decreasing energy", share, get(p, "share")));
  out.csv = csv.str();
  return out;
}

double closing_beta(const json& p) {
  double kappa = get(p, "kappa");
  return kappa > 0 ? std::exp(-kappa * get(p, "t")) : get(p, "beta");
}

ExperimentOutput run_closing(const json& p, std::uint64_t, const std::vector<ColumnSpec>&) {
  auto x = start_point(p);
  ClosingOptions opts;
  opts.alpha = get(p, "alpha");
  opts.c_bad = get(p, "c_bad");
  opts.max_height = int(geti(p, "max_height"));
  auto rep = closing_scan(x, get(p, "t"), get(p, "D"), closing_beta(p), std::size_t(geti(p, "r_count")),
                          get(p, "search_norm"), opts);
  ExperimentOutput out;
  out.csv = rep.to_csv();
  out.aggregates = json::parse(rep.to_json());
  if (gets(p, "expect") == "separated") {
    out.assertions.push_back(at_least("good fraction", rep.good_fraction, rep.threshold));
  } else {
    out.assertions.push_back({"good fraction below threshold", rep.good_fraction < rep.threshold, rep.good_fraction,
                              rep.threshold});
    double d = rep.detected ? rep.detected->distance : std::numeric_limits<double>::max();
    out.assertions.push_back(at_most("detected orbit distance", d, get(p, "detect_tol")));
  }
  return out;
}

ExperimentOutput run_sigma(const json& p, std::uint64_t seed, const std::vector<ColumnSpec>& cols) {
  auto ds = getl(p, "d");
  const auto N = std::size_t(geti(p, "N"));
  const int qn = int(geti(p, "quad_n"));
  std::vector<Traceless> ws(N);
  const auto key = stream_key(seed, "sigma-contraction");
  for (std::size_t i = 0; i < N; ++i) {
    Draws d(key, i);
    Traceless w;
    do w = {d.uniform(-1, 1), d.uniform(-1, 1), d.uniform(-1, 1)};
    while (w.norm() < 1e-3);
    ws[i] = w * (1 / w.norm());
  }
  std::vector<SigmaAverageResult> res(ds.size() * N);
  parallel_for(res.size(), [&](std::size_t k) { res[k] = sigma_contraction(ws[k % N], ds[k / N], qn); });
  Csv csv(cols);
  double worst = 0, e12 = 0;
  for (std::size_t j = 0; j < ds.size(); ++j) {
    auto r = sigma_contraction({0, 1, 0}, ds[j], qn);
    double dev = std::abs(r.value - std::exp(-ds[j] / 3));
    e12 = std::max(e12, dev);
    csv.row({cell(ds[j]), cell(-1), cell(0.0), cell(1.0), cell(0.0), cell(r.value), cell(std::exp(ds[j] / 3) * r.value),
             cell(r.quad_error)});
    for (std::size_t i = 0; i < N; ++i) {
      const auto& s = res[j * N + i];
      double scaled = std::exp(ds[j] / 3) * s.value;
      worst = std::max(worst, scaled);
      csv.row({cell(ds[j]), cell(int(i)), cell(s.w.x11), cell(s.w.x12), cell(s.w.x21), cell(s.value), cell(scaled),
               cell(s.quad_error)});
    }
  }
  ExperimentOutput out;
  out.aggregates["worst_scaled"] = worst;
  out.aggregates["e12_deviation"] = e12;
  out.assertions.push_back(at_most("max e^{d/3} sigma_d", worst, get(p, "bound")));
  out.assertions.push_back(at_most("E12 deviation from e^{-d/3}", e12, get(p, "e12_tol")));
  out.csv = csv.str();
  return out;
}

// ---------------------------------------------------------------- registry

template <class F>
std::function<ExperimentOutput(const json&, std::uint64_t)> runner(F f, const std::vector<ColumnSpec>* cols) {
  return [f, cols](const json& p, std::uint64_t s) { return f(p, s, *cols); };
}

std::vector<Spec> build_specs() {
  std::vector<Spec> v;
  const double ln23 = std::log(2.0) / std::log(3.0);
  auto none = [](const json&, std::vector<std::string>&) {};

  {
    Spec s;
    s.name = "equidistribute";
    s.doc = "Discrepancy of (1/T) int_0^T phi(a_{log T} u_r x0) dr against the Haar mean, per test function and logT.";
    s.params = start_params("generic", {"generic", "haar", "diagonal"}, 0, {0, 1, 0});
    s.params.push_back(list("logT", {4, 6, 8, 10, 12}, 0, 60, "flow times log T", true));
    s.params.push_back(integer("N", 20000, 100, 1e8, "stratified samples per logT"));
    s.params.push_back(choice("tests", "siegel", {"siegel", "orbit"},
                              "siegel = three Siegel product tests; orbit = smooth complement of the diagonal orbit"));
    s.params.push_back(flag("include_constant", false, "append phi = 1, whose discrepancy must be exactly zero"));
    s.params.push_back(num("slope_max", -0.2, -1e3, 1e3, "pass bound on the log-log slope (siegel)"));
    s.params.push_back(num("persist_share", 0.1, 0, 1, "pass bound on discrepancy / sup phi at every logT (orbit)"));
    s.params.push_back(num("orbit_rho", 0.05, 0, 1, "width of the orbit-complement test", true));
    s.params.push_back(integer("haar_mc", 20000, 100, 1e8, "Monte Carlo size for the orbit test's Haar mean"));
    s.columns = {{"logT", "flow time log T"},
                 {"test", "test function name"},
                 {"discrepancy", "|average - Haar mean|"},
                 {"std_error", "Monte Carlo standard error of the average"}};
    s.cross = none;
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "nondiverge";
    s.doc = "Fraction of r in [0,1] with inj(a_t u_r x) < eps^2, for each eps.";
    s.params = start_params("identity", {"identity", "generic", "haar"}, 0, {0, 1, 0});
    s.params.push_back(num("t", 14, 0, 60, "flow time"));
    s.params.push_back(list("eps", {0.02, 0.05, 0.1}, 0, 1, "thresholds eps", true));
    s.params.push_back(integer("N", 10000, 1, 1e8, "stratified samples per eps"));
    s.params.push_back(num("C_max", 20, 0, 1e9, "pass bound on C = max fraction / eps"));
    s.columns = {{"eps", "threshold"},
                 {"fraction", "share of samples with inj < eps^2"},
                 {"std_error", "standard error"},
                 {"ratio", "fraction / eps"}};
    s.cross = [](const json& p, std::vector<std::string>& out) {
      if (!p["t"].is_number()) return;
      double need = std::abs(std::log(start_point(p).inj)) + kNondivergenceOffset;
      if (p["t"].get<double>() < need) out.push_back("t: must be >= |log inj(x)| + 8 = " + fmt(need));
    };
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "avoid";
    s.doc = "Share of r with a_s u_r x0 within thresh of a catalog orbit (bad set of the avoidance principle).";
    s.params = start_params("generic", {"generic", "haar", "planted"}, 1e-6, {0, 1, 0});
    s.params.push_back(num("s", 12, 0, 60, "flow time"));
    s.params.push_back(num("eta", 1e-3, 0, 1, "injectivity floor eta"));
    s.params.push_back(num("thresh", 1e-3, 0, 1, "distance threshold"));
    s.params.push_back(integer("max_height", 5, 1, 8, "periodic catalog height"));
    s.params.push_back(integer("N", 4000, 1, 1e8, "stratified samples"));
    s.params.push_back(choice("expect", "low", {"low", "high"}, "low: bad <= bound_low; high: bad >= bound_high"));
    s.params.push_back(num("bound_low", 0.05, 0, 1, "pass bound for expect = low"));
    s.params.push_back(num("bound_high", 0.5, 0, 1, "pass bound for expect = high"));
    s.columns = {{"s", "flow time"},
                 {"bad_fraction", "share of samples near a catalog orbit"},
                 {"std_error", "standard error"},
                 {"catalog_size", "orbits in the catalog"}};
    s.cross = check_direction;
    v.push_back(std::move(s));
  }
  auto projection_params = [&](double b0, double c_fit) {
    return std::vector<ParamSpec>{
        choice("cloud", "cantor", {"cantor", "adversarial"},
               "cantor: Cantor set along E12; adversarial: Cantor set along the kernel of xi_{r0}"),
        integer("depth", 7, 1, 10, "Cantor depth (3^depth points)"),
        num("alpha", ln23, 0, 1, "dimension alpha", true),
        num("b0", b0, 0, 1, "outer scale b0", true),
        num("b_ratio", 1.0 / 27, 0, 1, "b / b0", true),
        num("eps", 0.01, 0, 1, "epsilon", true),
        num("r0", 0.3, 0, 1, "planted direction parameter"),
        integer("r_count", 512, 1, 1e6, "r grid size"),
        num("c_fit", c_fit, 0, 1e9, "fit constant of the fiber bound", true),
        num("exceptional_max", 0.1, 0, 1, "pass bound on the exceptional fraction (cantor)"),
        num("window", 0.05, 0, 1, "pass bound on |r - r0| for exceptional r (adversarial)"),
    };
  };
  const std::vector<ColumnSpec> proj_cols = {{"r", "grid parameter"},
                                             {"max_fiber", "largest fiber count"},
                                             {"violating_fraction", "share of points over the fiber bound"},
                                             {"projected_energy", "truncated energy of the projection (subsampled max)"},
                                             {"exceptional", "1 when r is exceptional"}};
  {
    Spec s;
    s.name = "project";
    s.doc = "Linear projection scan: xi_r fibers of width b against the energy bound.";
    s.params = projection_params(0.01, kLinearCFit);
    s.params.push_back(integer("R", 0, 0, 1e6, "energy removal budget"));
    s.columns = proj_cols;
    s.models = {"ProductRR", "ComplexC"};
    s.cross = none;
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "project-nonlinear";
    s.doc = "Nonlinear projection scan: zeta_r fibers at b1 = b0 * b_ratio against the ball-regularity bound.";
    s.params = projection_params(0.005, kNonlinearCFit);
    s.columns = proj_cols;
    s.models = {"ProductRR", "ComplexC"};
    s.cross = none;
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "margulis-sweep";
    s.doc = "Expected f_Y(h_k ... h_1 x) for h_i = a_d u_{r_i}, k = 1..ell, with Y the diagonal orbit.";
    s.params = start_params("planted", {"planted", "generic", "haar"}, 1e-12, {0.3, 1, -0.5});
    s.params.push_back(num("d", 6, 4, 60, "step flow time"));
    s.params.push_back(integer("ell", 8, 1, 8, "number of steps"));
    s.params.push_back(integer("N", 400, 2, 1e7, "walks"));
    s.params.push_back(num("search_norm", 4, 1, 64, "lattice search norm"));
    s.columns = {{"step", "k (0 = start)"},
                 {"f", "mean f_Y"},
                 {"f_se", "standard error of f"},
                 {"floor", "mean inj^{-1/3}"},
                 {"floor_se", "standard error of floor"},
                 {"ratio", "f_k / f_{k-1}"}};
    s.cross = check_direction;
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "regularize";
    s.doc = "Regular tree decomposition of seeded self-similar clouds, replayed exactly.";
    s.params = {integer("clouds", 10, 1, 1000, "number of clouds (seeds seed .. seed + clouds - 1)"),
                integer("maps", 3, 1, 16, "similitudes per cloud"),
                num("ratio", 0.3, 0, 0.5, "contraction ratio", true),
                integer("depth", 8, 1, 14, "iteration depth"),
                num("b0", 1.0 / 64, 0, 1, "cloud radius", true),
                integer("M", 6, 1, 20, "dyadic step M"),
                integer("k0", 1, 0, 20, "coarsest level"),
                integer("k1", 3, 0, 20, "finest level"),
                num("beta", 0.01, 0, 1, "beta", true)};
    s.columns = {{"cloud_seed", "seed of the cloud"},
                 {"n", "points"},
                 {"parts", "regular parts"},
                 {"discard", "discarded points"},
                 {"discard_bound", "beta^{1/4} n"},
                 {"min_part", "smallest part"},
                 {"part_bound", "beta^2 n"},
                 {"shifts", "shifts tried"},
                 {"verified", "1 when the exact replay passes"}};
    s.models = {"ProductRR", "ComplexC"};
    s.cross = [](const json& p, std::vector<std::string>& out) {
      if (!p["k0"].is_number_integer() || !p["k1"].is_number_integer() || !p["maps"].is_number_integer() ||
          !p["depth"].is_number_integer())
        return;
      if (p["k1"].get<int>() < p["k0"].get<int>()) out.push_back("k1: must be >= k0");
      if (std::pow(double(p["maps"].get<int>()), double(p["depth"].get<int>())) > 16384)
        out.push_back("depth: maps^depth must be <= 2^14");
    };
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "dimension-step";
    s.doc = "Repeated dimension steps on a collinear cone at the identity coset; energy before/after per r.";
    s.params = {integer("points", 64, 2, 4096, "sheets on the segment"),
                list("direction", {0.3, 1, 0.5}, -1e3, 1e3, "segment direction"),
                num("spread", 0.9, 0, 1, "segment half-length / beta", true),
                num("eta", 0.005, 0, 0.005, "eta (beta = eta^2)", true),
                num("ell", 22, 0, 60, "step length", true),
                num("alpha", 0.5, 0, 1, "energy exponent", true),
                integer("R", 1, 0, 1e6, "energy removal budget"),
                num("b", 0.1, 0, 0.1, "relative scale b", true),
                integer("N", 16, 1, 1e5, "random r' per chart"),
                integer("r_count", 64, 1, 1e5, "r grid size"),
                integer("steps", 3, 1, 10, "consecutive steps"),
                num("share", 0.8, 0, 1, "pass bound on the share of r whose energy decreases")};
    s.columns = {{"r", "grid parameter"},
                 {"step", "step index"},
                 {"energy_before", "mean per-point truncated energy before"},
                 {"energy_after", "mean per-point truncated energy after"},
                 {"decreased", "1 when energy_after < energy_before"},
                 {"at_floor", "1 when every offspring sheet is isolated"},
                 {"offspring", "offspring cones"}};
    s.cross = [](const json& p, std::vector<std::string>& out) {
      const auto& d = p["direction"];
      if (d.is_array() && d.size() != 3) out.push_back("direction: expected three entries");
      if (p["ell"].is_number() && p["eta"].is_number() &&
          std::exp(-p["ell"].get<double>()) > std::pow(p["eta"].get<double>(), 4))
        out.push_back("ell: must satisfy e^{-ell} <= beta^2");
    };
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "closing-scan";
    s.doc = "Closing-lemma scan over r: inj, identifications and f_t on a_{8t} u_r x1, then a nearby-orbit search.";
    s.params = start_params("haar", {"haar", "diagonal", "planted"}, 1e-7, {0.3, 1, -0.5});
    s.params.push_back(num("t", 4, 0, 6, "t", true));
    s.params.push_back(num("D", 1, 0, 1e3, "rate D", true));
    s.params.push_back(num("beta", 1e-4, 0, 1, "beta (ignored when kappa > 0)", true));
    s.params.push_back(num("kappa", 0, 0, 1e3, "when > 0, beta = e^{-kappa t}"));
    s.params.push_back(integer("r_count", 64, 1, 1e5, "r grid size"));
    s.params.push_back(num("search_norm", 4, 1, 64, "identification window"));
    s.params.push_back(integer("max_height", 3, 1, 8, "catalog height of the nearby search"));
    s.params.push_back(num("alpha", 1.0 / 3, 0, 1, "exponent of f_t", true));
    s.params.push_back(num("c_bad", 5, 0, 1e3, "search when good_fraction < 1 - c_bad beta^{1/4}", true));
    s.params.push_back(choice("expect", "separated", {"separated", "closing"},
                              "separated: good_fraction >= threshold; closing: below threshold and orbit detected"));
    s.params.push_back(num("detect_tol", 1e-6, 0, 1, "pass bound on the detected distance (closing)"));
    s.columns = {{"r", "grid parameter"},
                 {"inj", "inj(a_{8t} u_r x1)"},
                 {"inj_ok", "1 when inj >= beta^{1/2}"},
                 {"injective_on_Et", "1 when no exact identification is found"},
                 {"f_t_value", "max of f_t over the z sample"},
                 {"good", "1 when all three hold"}};
    s.cross = [](const json& p, std::vector<std::string>& out) {
      check_direction(p, out);
      if (p["kappa"].is_number() && p["t"].is_number() && p["kappa"].get<double>() > 0 &&
          std::exp(-p["kappa"].get<double>() * p["t"].get<double>()) >= 1)
        out.push_back("kappa: beta = e^{-kappa t} must be < 1");
    };
    v.push_back(std::move(s));
  }
  {
    Spec s;
    s.name = "sigma-contraction";
    s.doc = "(1/3) int_{-1}^{2} |Ad(a_d u_r) w|^{-1/3} dr for random unit w and the E12 direction.";
    s.params = {list("d", {2, 4, 6, 8, 10}, 0, 60, "flow times d"),
                integer("N", 200, 1, 1e7, "random unit vectors per d"),
                integer("quad_n", 256, 64, 1e6, "quadrature resolution"),
                num("bound", 10, 0, 1e9, "pass bound on e^{d/3} sigma_d"),
                num("e12_tol", 1e-6, 0, 1, "pass bound on the E12 deviation")};
    s.columns = {{"d", "flow time"},
                 {"sample", "index of w (-1 = E12)"},
                 {"w11", "w entry"},
                 {"w12", "w entry"},
                 {"w21", "w entry"},
                 {"value", "sigma_d average"},
                 {"scaled", "e^{d/3} value"},
                 {"quad_error", "quadrature error estimate"}};
    s.models = {"ProductRR", "ComplexC"};
    s.cross = none;
    v.push_back(std::move(s));
  }

  v[0].run = runner(run_equidistribute, &v[0].columns);
  v[1].run = runner(run_nondiverge, &v[1].columns);
  v[2].run = runner(run_avoid, &v[2].columns);
  v[3].run = runner(run_project, &v[3].columns);
  v[4].run = runner(run_project_nonlinear, &v[4].columns);
  v[5].run = runner(run_sweep, &v[5].columns);
  v[6].run = runner(run_regularize, &v[6].columns);
  v[7].run = runner(run_dimension_step, &v[7].columns);
  v[8].run = runner(run_closing, &v[8].columns);
  v[9].run = runner(run_sigma, &v[9].columns);
  return v;
}

const std::vector<Spec>& specs() {
  static const std::vector<Spec> s = build_specs();
  return s;
}

const Spec* find_spec(const std::string& name) {
  for (const auto& s : specs())
    if (s.name == name) return &s;
  return nullptr;
}


std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json summary_base(const ExperimentConfig& cfg) {
  json s;
  s["schema_version"] = kSchemaVersion;
  s["experiment"] = cfg.experiment;
  if (cfg.criterion) s["criterion"] = cfg.criterion;
  return s;
}

json manifest_doc(const json& echo, double wall) {
  json m;
  m["schema_version"] = kSchemaVersion;
  m["code_version"] = code_version();
  m["config"] = echo;
  m["seed"] = echo.value("seed", json(nullptr));
  m["threads"] = threads();
  m["wall_seconds"] = wall;
  m["files"] = {"results.csv", "summary.json"};
  return m;
}

std::string header_only(const std::string& experiment) {
  const Spec* s = find_spec(experiment);
  if (!s) return "experiment\n";
  return Csv(s->columns).str();
}

}  // namespace

// ---------------------------------------------------------------- public

json ExperimentConfig::to_json() const {
  json j = params;
  j["schema_version"] = schema_version;
  j["experiment"] = experiment;
  j["model"] = model;
  j["seed"] = seed;
  if (!output_dir.empty()) j["output_dir"] = output_dir;
  if (criterion) j["criterion"] = criterion;
  return j;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : specs()) n.push_back(s.name);
    return n;
  }();
  return names;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  ExperimentConfig c;
  c.schema_version = -1;
  c.params = json::object();
  // Type problems are recorded as sentinel values and reported by validate_config.
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "schema_version") {
      c.schema_version = v.is_number_integer() ? v.get<int>() : -1;
    } else if (k == "experiment") {
      c.experiment = v.is_string() ? v.get<std::string>() : "";
    } else if (k == "model") {
      c.model = v.is_string() ? v.get<std::string>() : "";
    } else if (k == "seed") {
      c.seed = v.is_number_unsigned() ? v.get<std::uint64_t>() : (v.is_number_integer() && v.get<std::int64_t>() >= 0 ? std::uint64_t(v.get<std::int64_t>()) : ~std::uint64_t(0));
    } else if (k == "output_dir") {
      c.output_dir = v.is_string() ? v.get<std::string>() : "";
    } else if (k == "criterion") {
      c.criterion = v.is_number_integer() ? v.get<int>() : -1;
    } else {
      c.params[k] = v;
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text = read_file(path);
  try {
    return parse_config(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.schema_version != kSchemaVersion)
    out.push_back("schema_version: must be the integer " + std::to_string(kSchemaVersion));
  if (cfg.seed == ~std::uint64_t(0)) out.push_back("seed: expected a non-negative integer");
  if (cfg.criterion < 0 || cfg.criterion > 8) out.push_back("criterion: expected an integer in [0, 8]");
  const Spec* s = find_spec(cfg.experiment);
  if (!s) {
    std::string all;
    for (const auto& n : experiment_names()) all += (all.empty() ? "" : ", ") + n;
    out.push_back("experiment: must be one of {" + all + "}");
    return out;
  }
  if (std::find(s->models.begin(), s->models.end(), cfg.model) == s->models.end()) {
    std::string all;
    for (const auto& m : s->models) all += (all.empty() ? "" : ", ") + m;
    out.push_back("model: " + cfg.experiment + " supports {" + all + "}");
  }
  for (auto it = cfg.params.begin(); it != cfg.params.end(); ++it) {
    bool known = std::any_of(s->params.begin(), s->params.end(), [&](const ParamSpec& p) { return p.name == it.key(); });
    if (!known) out.push_back(it.key() + ": unknown parameter for " + cfg.experiment);
  }
  const std::size_t before = out.size();
  json p = cfg.params;
  for (const auto& ps : s->params) {
    if (!p.contains(ps.name)) p[ps.name] = ps.def;
    check_param(ps, p[ps.name], out);
  }
  if (out.size() == before) s->cross(p, out);
  return out;
}

json resolved_params(const ExperimentConfig& cfg) {
  const Spec* s = find_spec(cfg.experiment);
  require(s != nullptr, "unknown experiment " + cfg.experiment);
  json p = cfg.params;
  for (const auto& ps : s->params)
    if (!p.contains(ps.name)) p[ps.name] = ps.def;
  return p;
}

bool ExperimentOutput::pass() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

ExperimentOutput execute(const ExperimentConfig& cfg) {
  auto v = validate_config(cfg);
  if (!v.empty()) throw Error(ErrorCode::InvalidArgument, "invalid config: " + v.front());
  auto out = find_spec(cfg.experiment)->run(resolved_params(cfg), cfg.seed);
  check_csv(out.csv, "results.csv");
  return out;
}

void atomic_write(const std::string& path, const std::string& content) {
  fs::path p(path);
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw Error(ErrorCode::InvalidArgument, "short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

void write_run(const std::string& out_dir, const json& config_echo, const ExperimentOutput& out, double wall_seconds,
               int criterion) {
  fs::create_directories(out_dir);
  check_csv(out.csv, "results.csv");
  json s;
  s["schema_version"] = kSchemaVersion;
  s["experiment"] = config_echo.value("experiment", std::string("check"));
  if (criterion) s["criterion"] = criterion;
  s["status"] = "ok";
  s["pass"] = out.pass();
  json a = json::array();
  for (const auto& x : out.assertions)
    a.push_back({{"name", x.name}, {"pass", x.pass}, {"value", x.value}, {"bound", x.bound}});
  s["assertions"] = a;
  s["aggregates"] = out.aggregates;
  atomic_write((fs::path(out_dir) / "results.csv").string(), out.csv);
  atomic_write((fs::path(out_dir) / "summary.json").string(), s.dump(2) + "\n");
  atomic_write((fs::path(out_dir) / "manifest.json").string(), manifest_doc(config_echo, wall_seconds).dump(2) + "\n");
}

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  fs::create_directories(out_dir);
  auto violations = validate_config(cfg);
  json echo = cfg.to_json();
  if (!violations.empty()) {
    json s = summary_base(cfg);
    s["status"] = "invalid";
    s["pass"] = false;
    s["violations"] = violations;
    atomic_write((fs::path(out_dir) / "results.csv").string(), header_only(cfg.experiment));
    atomic_write((fs::path(out_dir) / "summary.json").string(), s.dump(2) + "\n");
    atomic_write((fs::path(out_dir) / "manifest.json").string(), manifest_doc(echo, wall()).dump(2) + "\n");
    return kRunInvalid;
  }
  json full = resolved_params(cfg);
  for (auto it = full.begin(); it != full.end(); ++it) echo[it.key()] = it.value();
  try {
    auto out = execute(cfg);
    write_run(out_dir, echo, out, wall(), cfg.criterion);
    return out.pass() ? kRunPass : kRunAssertFail;
  } catch (const Error& e) {
    json s = summary_base(cfg);
    s["status"] = "error";
    s["pass"] = false;
    s["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
    atomic_write((fs::path(out_dir) / "results.csv").string(), header_only(cfg.experiment));
    atomic_write((fs::path(out_dir) / "summary.json").string(), s.dump(2) + "\n");
    atomic_write((fs::path(out_dir) / "manifest.json").string(), manifest_doc(echo, wall()).dump(2) + "\n");
    return kRunError;
  }
}

void check_csv(const std::string& text, const std::string& name) {
  if (text.empty() || text.find('\n') == std::string::npos) throw Error(ErrorCode::ParseError, name + ": missing header row");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.empty()) throw Error(ErrorCode::ParseError, name + ": empty header row");
  const auto width = std::count(line.begin(), line.end(), ',') + 1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (std::count(line.begin(), line.end(), ',') + 1 != width)
      throw Error(ErrorCode::ParseError, name + ": row " + std::to_string(row) + " has the wrong number of cells");
    std::istringstream cells(line);
    std::string c;
    while (std::getline(cells, c, ',')) {
      std::string low = c;
      std::transform(low.begin(), low.end(), low.begin(), [](unsigned char ch) { return char(std::tolower(ch)); });
      if (low.find("nan") != std::string::npos || low.find("inf") != std::string::npos)
        throw Error(ErrorCode::ParseError, name + ": non-finite cell '" + c + "' in row " + std::to_string(row));
    }
  }
}

Report emit_report(const std::string& run_dir) {
  fs::path root(run_dir);
  if (!fs::is_directory(root)) throw Error(ErrorCode::MissingManifest, "no run directory " + run_dir);
  std::vector<fs::path> dirs;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "manifest.json") dirs.push_back(e.path().parent_path());
  if (dirs.empty()) throw Error(ErrorCode::MissingManifest, "no manifest.json under " + run_dir);
  std::sort(dirs.begin(), dirs.end());

  auto parse_file = [](const fs::path& p) {
    try {
      return json::parse(read_file(p));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, p.string() + ": " + e.what());
    }
  };

  json runs = json::array();
  std::map<int, std::pair<int, bool>> crit;  // criterion -> (runs, all pass)
  bool all_pass = true;
  for (const auto& d : dirs) {
    parse_file(d / "manifest.json");
    if (!fs::exists(d / "summary.json")) throw Error(ErrorCode::ParseError, (d / "summary.json").string() + ": missing");
    json s = parse_file(d / "summary.json");
    if (!fs::exists(d / "results.csv")) throw Error(ErrorCode::ParseError, (d / "results.csv").string() + ": missing");
    check_csv(read_file(d / "results.csv"), (d / "results.csv").string());
    bool pass = s.value("pass", false);
    int c = s.value("criterion", 0);
    json r;
    r["dir"] = fs::relative(d, root).generic_string();
    r["experiment"] = s.value("experiment", std::string());
    r["status"] = s.value("status", std::string("unknown"));
    r["pass"] = pass;
    if (c) {
      r["criterion"] = c;
      auto& slot = crit[c];
      slot.first += 1;
      slot.second = (slot.first == 1 ? true : slot.second) && pass;
    }
    runs.push_back(r);
    all_pass = all_pass && pass;
  }
  json matrix = json::object();
  bool criteria_pass = true;
  for (int k = 1; k <= 8; ++k) {
    auto it = crit.find(k);
    bool ok = it != crit.end() && it->second.first > 0 && it->second.second;
    matrix[std::to_string(k)] = ok;
    criteria_pass = criteria_pass && ok;
  }
  Report rep;
  rep.doc["schema_version"] = kSchemaVersion;
  rep.doc["code_version"] = code_version();
  rep.doc["runs"] = runs;
  rep.doc["criteria"] = matrix;
  rep.doc["all_pass"] = all_pass;
  const bool tagged = !crit.empty();
  rep.exit_code = (all_pass && (!tagged || criteria_pass)) ? 0 : 1;
  atomic_write((root / "report.json").string(), rep.doc.dump(2) + "\n");
  return rep;
}

std::string schema_markdown() {
  std::ostringstream o;
  o << "# unipotent-lab result schema\n\n";
  o << "Generated by `unipotent-lab schema`. Schema version " << kSchemaVersion << ".\n\n";
  o << "## Config\n\n";
  o << "A JSON object. Reserved keys:\n\n";
  o << "| key | meaning |\n|---|---|\n";
  o << "| `schema_version` | must be " << kSchemaVersion << " |\n";
  o << "| `experiment` | one of the experiments below |\n";
  o << "| `model` | `ProductRR` (default) or `ComplexC` where supported |\n";
  o << "| `seed` | non-negative integer; every random stream is keyed by (seed, experiment, stratum) |\n";
  o << "| `output_dir` | run directory, overridden by `--out` |\n";
  o << "| `criterion` | optional acceptance tag 1..8 copied into summary.json |\n\n";
  o << "Every other key is an experiment parameter. Unknown keys and out-of-range values are rejected "
       "before any work starts; the run writes `summary.json` with `status: \"invalid\"` and the full "
       "`violations` list, and exits 2.\n\n";
  o << "## Run directory\n\n";
  o << "- `results.csv`: header row, one row per grid point, every numeric cell finite.\n";
  o << "- `summary.json`: `status` (`ok`, `error`, `invalid`), `pass`, `assertions` "
       "(name, pass, value, bound), `aggregates`, and `error` (code, message) on failure.\n";
  o << "- `manifest.json`: config echo with defaults filled in, code version, seed, threads, wall time.\n";
  o << "- `report.json` (from `unipotent-lab report DIR`): every run found under DIR and the acceptance "
       "matrix for criteria 1..8.\n\n";
  o << "Exit codes of `run`: 0 pass, 1 module error, 2 invalid config, 3 an assertion failed.\n\n";
  for (const auto& s : specs()) {
    o << "## " << s.name << "\n\n" << s.doc << "\n\n";
    o << "Models: ";
    for (std::size_t i = 0; i < s.models.size(); ++i) o << (i ? ", " : "") << "`" << s.models[i] << "`";
    o << "\n\n| parameter | type | default | range | meaning |\n|---|---|---|---|---|\n";
    for (const auto& p : s.params) {
      std::string type, range;
      switch (p.kind) {
        case Kind::Number: type = "number"; range = range_text(p); break;
        case Kind::Integer: type = "integer"; range = range_text(p); break;
        case Kind::List: type = "number list"; range = range_text(p); break;
        case Kind::Choice:
          type = "choice";
          for (const auto& c : p.choices) range += (range.empty() ? "" : ", ") + c;
          break;
        case Kind::Flag: type = "bool"; break;
      }
      std::string def = p.def.is_number_float() ? fmt(p.def.get<double>()) : p.def.dump();
      o << "| `" << p.name << "` | " << type << " | `" << def << "` | " << range << " | " << p.doc << " |\n";
    }
    o << "\n`results.csv` columns:\n\n| column | meaning |\n|---|---|\n";
    for (const auto& c : s.columns) o << "| `" << c.name << "` | " << c.doc << " |\n";
    o << "\n";
  }
  return o.str();
}

}  // namespace ulab
