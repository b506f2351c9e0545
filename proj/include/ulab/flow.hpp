#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ulab/quotient.hpp"

namespace ulab {

inline constexpr double kMaxFlowTime = 60;

struct Estimate {
  double value = 0;
  double std_error = 0;
  std::size_t n = 0;
};

// Mean with the paired-strata standard error (one sample per stratum, in order).
Estimate stratified_estimate(const std::vector<double>& y);
// Mean with the i.i.d. standard error.
Estimate sample_estimate(const std::vector<double>& y);

// phi(s) = exp(1 - 1/(1 - s^2)) on |s| < 1.
double bump(double s);
double bump_integral();  // integral of bump over [-1, 1]

class TestFunction {
 public:
  enum class Kind { SiegelProduct, SmoothBump, InjIndicator, Constant, OrbitComplement };

  // Product of Siegel transforms of the annulus bumps bump((|v| - c_i) / w_i).
  static TestFunction siegel_product(double c1, double w1, double c2, double w2);
  // bump(d / radius) with d the larger factor distance to center.
  static TestFunction smooth_bump(const CosetPoint& center, double radius, std::uint64_t seed = 1, std::size_t mc = 20000);
  static TestFunction inj_indicator(double eta);
  static TestFunction constant(double c);
  // smoothstep(dist(x, Y) / rho): zero on Y, one away from its rho-neighbourhood.
  static TestFunction orbit_complement(const PeriodicOrbit& Y, double rho, std::uint64_t seed = 1, std::size_t mc = 20000);

  double operator()(const CosetPoint& x) const;

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double haar_mean() const { return haar_mean_; }
  double haar_se() const { return haar_se_; }  // zero when closed form
  double sup() const { return sup_; }
  double lipschitz() const { return lipschitz_; }

 private:
  void fill_haar_mc(std::uint64_t seed, std::size_t n);
  void fill_lipschitz();

  Kind kind_ = Kind::Constant;
  std::string name_;
  std::vector<double> par_;
  std::shared_ptr<const CosetPoint> center_;
  std::shared_ptr<const PeriodicOrbit> orbit_;
  double haar_mean_ = 0, haar_se_ = 0, sup_ = 0, lipschitz_ = 0;
};

struct SparseMeasure {
  std::vector<std::pair<double, double>> atoms;  // (s, weight), sorted by s
  double C = 1, theta = 0, scale = 1;             // mass of any length-scale interval <= C scale^{1-theta}

  // Validates weights and the certificate (InvalidCertificate on failure).
  SparseMeasure(std::vector<std::pair<double, double>> atoms, double C, double theta, double scale);
  static SparseMeasure lebesgue(int n);
  static SparseMeasure cantor(int depth);
  static SparseMeasure atom(double s);

  double max_window_mass(double length) const;
};

// a_t u_r x, reduced.
CosetPoint translate(const CosetPoint& x, double t, double r);
// left * x with |t| guard on a caller-supplied flow time.
CosetPoint flow_act(const GroupElement& left, const CosetPoint& x, double t);

// Stratified point in stratum i of n: (i + jitter) / n.
double stratified(std::size_t i, std::size_t n, std::uint64_t seed, const char* experiment);

struct Discrepancy {
  std::vector<Estimate> per_test;  // |average - haar_mean| with the Monte Carlo error of the average
  double max = 0;
};
Discrepancy unipotent_discrepancy(const CosetPoint& x0, double logT, const std::vector<TestFunction>& tests,
                                  std::size_t N, std::uint64_t seed);

Estimate horosphere_average(const CosetPoint& x, double t, double delta, const TestFunction& test, std::size_t N,
                            std::uint64_t seed);
Estimate sparse_average(const CosetPoint& x, double t, double delta, const SparseMeasure& rho,
                        const TestFunction& test, std::size_t N, std::uint64_t seed);

// Regime t >= |log inj(x)| + kNondivergenceOffset.
inline constexpr double kNondivergenceOffset = 8;
inline constexpr double kAvoidanceOffset = 1;
Estimate nondivergence_fraction(const CosetPoint& x, double t, double eps, std::size_t N, std::uint64_t seed);

std::vector<CosetPoint> random_walk_push(const CosetPoint& x, double t, double ell, int n, double beta, std::size_t N,
                                         std::uint64_t seed);

Estimate avoidance_fraction(const CosetPoint& x0, double s, double eta, const std::vector<PeriodicOrbit>& catalog,
                            double thresh, std::size_t N, std::uint64_t seed);

// A fixed point off every periodic orbit of small height: (I, g2) with g2 irrational.
CosetPoint generic_point();

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ulab
