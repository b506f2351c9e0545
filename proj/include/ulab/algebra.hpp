#pragma once

#include <complex>
#include <optional>

#include "ulab/error.hpp"

namespace ulab {

enum class Model { ProductRR, ComplexC };

const char* to_string(Model m);
Model model_from_string(const std::string& s);

using cplx = std::complex<double>;

template <class T>
struct M2 {
  T a{1}, b{0}, c{0}, d{1};

  static M2 identity() { return {T(1), T(0), T(0), T(1)}; }
  static M2 zero() { return {T(0), T(0), T(0), T(0)}; }

  T det() const { return a * d - b * c; }
  T trace() const { return a + d; }
  M2 inverse() const {
    T k = T(1) / det();
    return {d * k, -b * k, -c * k, a * k};
  }
  M2 operator*(const M2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  M2 operator+(const M2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  M2 operator-(const M2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
  M2 operator*(T k) const { return {a * k, b * k, c * k, d * k}; }
  bool operator==(const M2& o) const { return a == o.a && b == o.b && c == o.c && d == o.d; }
};

using Mat2 = M2<double>;
using CMat2 = M2<cplx>;

double max_abs(const Mat2& m);
double max_abs(const CMat2& m);
CMat2 to_complex(const Mat2& m);

// Coordinates (x11, x12, x21) of a traceless 2x2 matrix; x22 = -x11.
struct Traceless {
  double x11 = 0, x12 = 0, x21 = 0;

  Mat2 matrix() const { return {x11, x12, x21, -x11}; }
  static Traceless of(const Mat2& m) { return {0.5 * (m.a - m.d), m.b, m.c}; }
  double norm() const;
  Traceless operator+(const Traceless& o) const { return {x11 + o.x11, x12 + o.x12, x21 + o.x21}; }
  Traceless operator-(const Traceless& o) const { return {x11 - o.x11, x12 - o.x12, x21 - o.x21}; }
  Traceless operator*(double k) const { return {x11 * k, x12 * k, x21 * k}; }
  Traceless operator-() const { return {-x11, -x12, -x21}; }
  double& operator[](int i) { return i == 0 ? x11 : (i == 1 ? x12 : x21); }
  double operator[](int i) const { return i == 0 ? x11 : (i == 1 ? x12 : x21); }
};

class GroupElement {
 public:
  GroupElement() = default;
  static GroupElement identity(Model m = Model::ProductRR);
  static GroupElement product(const Mat2& first, const Mat2& second);
  static GroupElement diagonal(const Mat2& h) { return product(h, h); }
  static GroupElement complex(const CMat2& g);

  Model model() const { return model_; }
  const Mat2& first() const { return g1_; }
  const Mat2& second() const { return g2_; }
  const CMat2& cmat() const { return gc_; }

  GroupElement operator*(const GroupElement& o) const;
  GroupElement inverse() const;
  double norm() const;
  double dist_to_identity() const;  // max-norm of g - I
  GroupElement renormalized() const;

  // For H-elements: the SL2(R) matrix (NotInChart if g is not in H to 1e-12).
  Mat2 h_matrix() const;

 private:
  Model model_ = Model::ProductRR;
  Mat2 g1_, g2_;
  CMat2 gc_;
  int muls_ = 0;
};

struct LieVector {
  Model model = Model::ProductRR;
  Traceless h;  // Lie(H)
  Traceless r;  // transversal part; in ComplexC the matrix is i * r

  static LieVector in_h(Traceless x, Model m = Model::ProductRR) { return {m, x, {}}; }
  static LieVector in_r(Traceless w, Model m = Model::ProductRR) { return {m, {}, w}; }
  double norm() const;
};

// 2x2 kernels
Mat2 sl2_exp(const Traceless& x);
CMat2 sl2_exp(const CMat2& x);  // traceless complex input
Traceless sl2_log(const Mat2& g);  // NotInChart when no real traceless log exists
CMat2 sl2_log(const CMat2& g);
// Derivative of exp at traceless x in direction e.
CMat2 sl2_dexp(const CMat2& x, const CMat2& e);

GroupElement exp(const LieVector& v);
GroupElement exp_r(const Traceless& w, Model m = Model::ProductRR);
LieVector log(const GroupElement& g);

enum class OneParam { a, u, u_minus, v, n };
GroupElement one_param(OneParam kind, double t, std::optional<double> s = std::nullopt,
                       Model m = Model::ProductRR);

LieVector adjoint(const GroupElement& g, const LieVector& w);
// Ad(h) on the transversal part for h in H.
Traceless adjoint_r(const Mat2& h, const Traceless& w);

struct Split {
  GroupElement h;
  LieVector w;
  double residual = 0;
  int iterations = 0;
};
Split bch_split(const GroupElement& g);
// ComplexC only: the conjugation formula w = log(conj(g)^{-1} g) / 2i.
Split bch_split_conjugation(const GroupElement& g);

double xi_project(double r, const Traceless& w);
double zeta_project(double r, const Traceless& w);

// prd(s, tau, r) = u^-_s a_tau u_r
Mat2 prd(double s, double tau, double r);
struct PrdCoords {
  double s = 0, tau = 0, r = 0;
};
std::optional<PrdCoords> prd_coords(const Mat2& h);

struct BoxSpec {
  enum class Kind { BH, BsH, E, QH, Et, BG };
  Kind kind = Kind::BH;
  double beta = 0;
  double eta = 0;
  double m = 0;
  double tau = 0;
  // Width of the boundary layer as a fraction of each interval length;
  // defaults to 100*eta (eta = sqrt(beta) when unset).
  std::optional<double> boundary_fraction;

  static BoxSpec make(Kind k, double beta, double eta = 0, double m = 0, double tau = 0) {
    BoxSpec b;
    b.kind = k;
    b.beta = beta;
    b.eta = eta;
    b.m = m;
    b.tau = tau;
    return b;
  }
  static BoxSpec BH(double beta) { return make(Kind::BH, beta); }
  static BoxSpec BsH(double beta) { return make(Kind::BsH, beta); }
  static BoxSpec E(double beta, double eta) { return make(Kind::E, beta, eta); }
  static BoxSpec QH(double eta, double beta, double m) { return make(Kind::QH, beta, eta, m); }
  static BoxSpec Et(double beta, double tau) { return make(Kind::Et, beta, 0, 0, tau); }
  static BoxSpec BG(double beta) { return make(Kind::BG, beta); }
};

struct BoxResult {
  bool inside = false;
  bool in_boundary = false;
  PrdCoords coords;
  double transversal = 0;  // |w| for BG boxes
};

BoxResult box_contains(const BoxSpec& spec, const GroupElement& g);

}  // namespace ulab
