#include "ulab/algebra.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ulab {

const char* to_string(Model m) { return m == Model::ProductRR ? "ProductRR" : "ComplexC"; }

Model model_from_string(const std::string& s) {
  if (s == "ProductRR") return Model::ProductRR;
  if (s == "ComplexC") return Model::ComplexC;
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + s + "'");
}

double max_abs(const Mat2& m) {
  return std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c), std::abs(m.d)});
}

double max_abs(const CMat2& m) {
  return std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c), std::abs(m.d)});
}

CMat2 to_complex(const Mat2& m) { return {m.a, m.b, m.c, m.d}; }

double Traceless::norm() const { return std::max({std::abs(x11), std::abs(x12), std::abs(x21)}); }

// ---------------------------------------------------------------- group

GroupElement GroupElement::identity(Model m) {
  GroupElement g;
  g.model_ = m;
  return g;
}

GroupElement GroupElement::product(const Mat2& first, const Mat2& second) {
  GroupElement g;
  g.model_ = Model::ProductRR;
  g.g1_ = first;
  g.g2_ = second;
  return g;
}

GroupElement GroupElement::complex(const CMat2& m) {
  GroupElement g;
  g.model_ = Model::ComplexC;
  g.gc_ = m;
  return g;
}

GroupElement GroupElement::operator*(const GroupElement& o) const {
  require(model_ == o.model_, "GroupElement product across models");
  GroupElement r;
  r.model_ = model_;
  if (model_ == Model::ProductRR) {
    r.g1_ = g1_ * o.g1_;
    r.g2_ = g2_ * o.g2_;
  } else {
    r.gc_ = gc_ * o.gc_;
  }
  r.muls_ = muls_ + o.muls_ + 1;
  if (r.muls_ >= 64) r = r.renormalized();
  return r;
}

GroupElement GroupElement::inverse() const {
  GroupElement r = *this;
  if (model_ == Model::ProductRR) {
    r.g1_ = g1_.inverse();
    r.g2_ = g2_.inverse();
  } else {
    r.gc_ = gc_.inverse();
  }
  return r;
}

double GroupElement::norm() const {
  return model_ == Model::ProductRR ? std::max(max_abs(g1_), max_abs(g2_)) : max_abs(gc_);
}

double GroupElement::dist_to_identity() const {
  if (model_ == Model::ProductRR)
    return std::max(max_abs(g1_ - Mat2::identity()), max_abs(g2_ - Mat2::identity()));
  return max_abs(gc_ - CMat2::identity());
}

GroupElement GroupElement::renormalized() const {
  GroupElement r = *this;
  r.muls_ = 0;
  if (model_ == Model::ProductRR) {
    r.g1_ = g1_ * (1.0 / std::sqrt(g1_.det()));
    r.g2_ = g2_ * (1.0 / std::sqrt(g2_.det()));
  } else {
    r.gc_ = gc_ * (cplx(1.0) / std::sqrt(gc_.det()));
  }
  return r;
}

Mat2 GroupElement::h_matrix() const {
  if (model_ == Model::ProductRR) {
    double tol = 1e-12 * std::max(1.0, norm());
    if (max_abs(g1_ - g2_) > tol) throw Error(ErrorCode::NotInChart, "element is not in the diagonal H");
    return g2_;
  }
  double im = std::max({std::abs(gc_.a.imag()), std::abs(gc_.b.imag()), std::abs(gc_.c.imag()),
                        std::abs(gc_.d.imag())});
  if (im > 1e-12 * std::max(1.0, norm())) throw Error(ErrorCode::NotInChart, "element is not in SL2(R)");
  return {gc_.a.real(), gc_.b.real(), gc_.c.real(), gc_.d.real()};
}

double LieVector::norm() const { return std::max(h.norm(), r.norm()); }

// ---------------------------------------------------------------- exp / log

namespace {

// exp(A) = C(q) I + S(q) A for traceless A with q = -det A.
template <class T>
void cosh_sinhc(T q, T& C, T& S) {
  if (std::abs(q) < 1e-8) {
    C = T(1) + q / 2.0 + q * q / 24.0 + q * q * q / 720.0;
    S = T(1) + q / 6.0 + q * q / 120.0 + q * q * q / 5040.0;
    return;
  }
  if constexpr (std::is_same_v<T, double>) {
    if (q > 0) {
      double s = std::sqrt(q);
      C = std::cosh(s);
      S = std::sinh(s) / s;
    } else {
      double s = std::sqrt(-q);
      C = std::cos(s);
      S = std::sin(s) / s;
    }
  } else {
    T s = std::sqrt(q);
    C = std::cosh(s);
    S = std::sinh(s) / s;
  }
}

template <class T>
T s_over_sinh(T s) {
  if (std::abs(s) < 1e-4) return T(1) - s * s / 6.0 + 7.0 * s * s * s * s / 360.0;
  return s / std::sinh(s);
}

}  // namespace

Mat2 sl2_exp(const Traceless& x) {
  double C, S;
  cosh_sinhc(x.x11 * x.x11 + x.x12 * x.x21, C, S);
  return {C + S * x.x11, S * x.x12, S * x.x21, C - S * x.x11};
}

CMat2 sl2_exp(const CMat2& x) {
  cplx C, S;
  cosh_sinhc(-x.det(), C, S);
  return CMat2::identity() * C + x * S;
}

CMat2 sl2_dexp(const CMat2& x, const CMat2& e) {
  cplx q = -x.det();
  cplx C, S, dS;
  cosh_sinhc(q, C, S);
  if (std::abs(q) < 1e-4)
    dS = 1.0 / 6.0 + q / 60.0 + q * q / 1680.0 + q * q * q / 90720.0;
  else
    dS = (C - S) / (2.0 * q);
  cplx dq = 2.0 * x.a * e.a + x.b * e.c + x.c * e.b;
  return CMat2::identity() * (S * 0.5 * dq) + x * (dS * dq) + e * S;
}

Traceless sl2_log(const Mat2& g) {
  double c = 0.5 * g.trace();
  double f;
  if (c >= 1.0) {
    f = s_over_sinh(std::acosh(c));
  } else {
    if (c <= -1.0 + 1e-14) throw Error(ErrorCode::NotInChart, "no real logarithm (trace <= -2)");
    double th = std::acos(c);
    f = th < 1e-4 ? 1.0 + th * th / 6.0 + 7.0 * th * th * th * th / 360.0 : th / std::sin(th);
  }
  return {0.5 * f * (g.a - g.d), f * g.b, f * g.c};
}

CMat2 sl2_log(const CMat2& g) {
  cplx c = 0.5 * g.trace();
  if (std::abs(c + 1.0) < 1e-12) throw Error(ErrorCode::NotInChart, "no principal logarithm (trace -2)");
  cplx f = s_over_sinh(std::acosh(c));
  cplx half = 0.5 * (g.a - g.d);
  return {f * half, f * g.b, f * g.c, -f * half};
}

namespace {

CMat2 complex_matrix(const Traceless& re, const Traceless& im) {
  return {cplx(re.x11, im.x11), cplx(re.x12, im.x12), cplx(re.x21, im.x21), cplx(-re.x11, -im.x11)};
}

void split_complex(const CMat2& m, Traceless& re, Traceless& im) {
  cplx half = 0.5 * (m.a - m.d);
  re = {half.real(), m.b.real(), m.c.real()};
  im = {half.imag(), m.b.imag(), m.c.imag()};
}

}  // namespace

GroupElement exp(const LieVector& v) {
  if (v.model == Model::ProductRR) return GroupElement::product(sl2_exp(v.h + v.r), sl2_exp(v.h));
  return GroupElement::complex(sl2_exp(complex_matrix(v.h, v.r)));
}

GroupElement exp_r(const Traceless& w, Model m) { return exp(LieVector::in_r(w, m)); }

LieVector log(const GroupElement& g) {
  LieVector v;
  v.model = g.model();
  if (g.model() == Model::ProductRR) {
    v.h = sl2_log(g.second());
    v.r = sl2_log(g.first()) - v.h;
  } else {
    split_complex(sl2_log(g.cmat()), v.h, v.r);
  }
  return v;
}

// ---------------------------------------------------------------- subgroups

GroupElement one_param(OneParam kind, double t, std::optional<double> s, Model m) {
  const Mat2 I = Mat2::identity();
  auto upper = [](double x) { return Mat2{1, x, 0, 1}; };
  if (m == Model::ProductRR) {
    switch (kind) {
      case OneParam::a: {
        Mat2 d{std::exp(t / 2), 0, 0, std::exp(-t / 2)};
        return GroupElement::product(d, d);
      }
      case OneParam::u: return GroupElement::product(upper(t), upper(t));
      case OneParam::u_minus: return GroupElement::product({1, 0, t, 1}, {1, 0, t, 1});
      case OneParam::v: return GroupElement::product(upper(t), I);
      case OneParam::n:
        require(s.has_value(), "one_param(n) needs both r and s");
        return GroupElement::product(upper(t + *s), upper(t));
    }
  }
  switch (kind) {
    case OneParam::a: return GroupElement::complex({std::exp(t / 2), 0, 0, std::exp(-t / 2)});
    case OneParam::u: return GroupElement::complex({1, t, 0, 1});
    case OneParam::u_minus: return GroupElement::complex({1, 0, t, 1});
    case OneParam::v: return GroupElement::complex({1, cplx(0, t), 0, 1});
    case OneParam::n:
      require(s.has_value(), "one_param(n) needs both r and s");
      return GroupElement::complex({1, cplx(t, *s), 0, 1});
  }
  return GroupElement::identity(m);
}

// ---------------------------------------------------------------- adjoint

LieVector adjoint(const GroupElement& g, const LieVector& w) {
  require(g.model() == w.model, "adjoint across models");
  LieVector out;
  out.model = w.model;
  if (g.model() == Model::ProductRR) {
    Mat2 X = w.h.matrix(), W = w.r.matrix();
    Mat2 first = g.first() * (X + W) * g.first().inverse();
    Mat2 second = g.second() * X * g.second().inverse();
    out.h = Traceless::of(second);
    out.r = Traceless::of(first - second);
  } else {
    const CMat2& G = g.cmat();
    split_complex(G * complex_matrix(w.h, w.r) * G.inverse(), out.h, out.r);
  }
  return out;
}

Traceless adjoint_r(const Mat2& h, const Traceless& w) {
  return Traceless::of(h * w.matrix() * h.inverse());
}

// ---------------------------------------------------------------- BCH split

namespace {

const std::array<Traceless, 3> kBasis = {Traceless{1, 0, 0}, Traceless{0, 1, 0}, Traceless{0, 0, 1}};

template <int N>
bool solve(std::array<std::array<double, N + 1>, N>& A, std::array<double, N>& x) {
  for (int col = 0; col < N; ++col) {
    int piv = col;
    for (int r = col + 1; r < N; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (std::abs(A[piv][col]) < 1e-300) return false;
    std::swap(A[col], A[piv]);
    for (int r = col + 1; r < N; ++r) {
      double f = A[r][col] / A[col][col];
      for (int k = col; k <= N; ++k) A[r][k] -= f * A[col][k];
    }
  }
  for (int r = N - 1; r >= 0; --r) {
    double acc = A[r][N];
    for (int k = r + 1; k < N; ++k) acc -= A[r][k] * x[k];
    x[r] = acc / A[r][r];
  }
  return true;
}

std::array<double, 8> flatten(const CMat2& m) {
  return {m.a.real(), m.a.imag(), m.b.real(), m.b.imag(), m.c.real(), m.c.imag(), m.d.real(), m.d.imag()};
}

}  // namespace

Split bch_split(const GroupElement& g) {
  Split out;
  if (g.model() == Model::ProductRR) {
    out.h = GroupElement::diagonal(g.second());
    out.w = LieVector::in_r(sl2_log(g.second().inverse() * g.first()));
    out.residual = std::max(max_abs(out.h.first() * sl2_exp(out.w.r) - g.first()),
                            max_abs(out.h.second() - g.second()));
    return out;
  }

  // Damped Gauss-Newton on (X, W) -> exp(X) exp(iW) - g.
  const CMat2& G = g.cmat();
  Traceless X, W;
  split_complex(sl2_log(G), X, W);
  auto residual_of = [&](const Traceless& x, const Traceless& w) {
    return sl2_exp(to_complex(x.matrix())) * sl2_exp(to_complex(w.matrix()) * cplx(0, 1)) - G;
  };
  CMat2 F = residual_of(X, W);
  double res = max_abs(F);
  int it = 0;
  for (; it < 50 && res > 1e-12; ++it) {
    CMat2 cX = to_complex(X.matrix());
    CMat2 cW = to_complex(W.matrix()) * cplx(0, 1);
    CMat2 EX = sl2_exp(cX), EW = sl2_exp(cW);
    std::array<std::array<double, 8>, 6> J;
    for (int k = 0; k < 3; ++k) {
      CMat2 Ek = to_complex(kBasis[k].matrix());
      J[k] = flatten(sl2_dexp(cX, Ek) * EW);
      J[3 + k] = flatten(EX * sl2_dexp(cW, Ek * cplx(0, 1)));
    }
    auto f = flatten(F);
    std::array<std::array<double, 7>, 6> A{};
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 8; ++k) A[i][j] += J[i][k] * J[j][k];
      for (int k = 0; k < 8; ++k) A[i][6] -= J[i][k] * f[k];
    }
    std::array<double, 6> delta{};
    if (!solve<6>(A, delta)) break;
    Traceless dX{delta[0], delta[1], delta[2]}, dW{delta[3], delta[4], delta[5]};
    double lambda = 1.0;
    bool improved = false;
    while (lambda > 1e-8) {
      Traceless nX = X + dX * lambda, nW = W + dW * lambda;
      CMat2 nF = residual_of(nX, nW);
      double nres = max_abs(nF);
      if (nres < res) {
        X = nX;
        W = nW;
        F = nF;
        res = nres;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;
  }
  if (res > 1e-12)
    throw Error(ErrorCode::NoConvergence, "Newton residual " + std::to_string(res) + " after " +
                                              std::to_string(it) + " steps");
  out.h = GroupElement::complex(sl2_exp(to_complex(X.matrix())));
  out.w = LieVector::in_r(W, Model::ComplexC);
  out.residual = res;
  out.iterations = it;
  return out;
}

Split bch_split_conjugation(const GroupElement& g) {
  require(g.model() == Model::ComplexC, "conjugation split is ComplexC only");
  const CMat2& G = g.cmat();
  CMat2 conj{std::conj(G.a), std::conj(G.b), std::conj(G.c), std::conj(G.d)};
  Traceless re, im;
  split_complex(sl2_log(conj.inverse() * G), re, im);
  Split out;
  out.w = LieVector::in_r(im * 0.5, Model::ComplexC);
  out.h = g * exp(LieVector::in_r(-out.w.r, Model::ComplexC));
  out.residual = max_abs((out.h * exp(out.w)).cmat() - G);
  return out;
}

// ---------------------------------------------------------------- projections

double xi_project(double r, const Traceless& w) { return -w.x21 * r * r - 2.0 * w.x11 * r + w.x12; }

double zeta_project(double r, const Traceless& w) {
  double a = 1.0 + w.x11;
  double den = a + w.x21 * r;
  if (std::abs(a) < 1e-6 || std::abs(den) < 1e-6)
    throw Error(ErrorCode::ChartSingular, "1 + w11 + w21 r vanishes");
  double num = w.x12 + ((w.x12 * w.x21 - 2.0 * w.x11 - w.x11 * w.x11) / a) * r - w.x21 * r * r;
  return num / den;
}

// ---------------------------------------------------------------- boxes

Mat2 prd(double s, double tau, double r) {
  double e = std::exp(tau / 2);
  return {e, e * r, s * e, s * e * r + 1.0 / e};
}

std::optional<PrdCoords> prd_coords(const Mat2& h) {
  if (!(h.a > 0)) return std::nullopt;
  return PrdCoords{h.c / h.a, 2.0 * std::log(h.a), h.b / h.a};
}

namespace {

struct Interval {
  double lo, hi;
};

bool within(const Interval& I, double x, double shrink) {
  double len = I.hi - I.lo;
  if (len <= 0) return std::abs(x - I.lo) <= 1e-12;
  double d = shrink * len;
  return x >= I.lo + d && x <= I.hi - d;
}

}  // namespace

BoxResult box_contains(const BoxSpec& spec, const GroupElement& g) {
  BoxResult out;
  Mat2 h;
  if (spec.kind == BoxSpec::Kind::BG) {
    Split sp = bch_split(g);
    h = sp.h.h_matrix();
    out.transversal = sp.w.r.norm();
  } else {
    h = g.h_matrix();
  }
  auto c = prd_coords(h);
  if (!c) throw Error(ErrorCode::NotInChart, "no prd coordinates (upper-left entry <= 0)");
  out.coords = *c;

  const double b = spec.beta;
  Interval S{-b, b}, T{-b, b}, R{-b, b};
  switch (spec.kind) {
    case BoxSpec::Kind::BH:
    case BoxSpec::Kind::BG: break;
    case BoxSpec::Kind::BsH: R = {0, 0}; break;
    case BoxSpec::Kind::E: R = {-spec.eta, spec.eta}; break;
    case BoxSpec::Kind::QH:
      S = {-b * std::exp(-spec.m), b * std::exp(-spec.m)};
      R = {-spec.eta, spec.eta};
      break;
    case BoxSpec::Kind::Et:
      T = {spec.tau - b, spec.tau + b};
      R = {0, 1};
      break;
  }
  double eta = spec.eta > 0 ? spec.eta : std::sqrt(b);
  double frac = spec.boundary_fraction.value_or(100.0 * eta);
  frac = std::min(frac, 0.5);

  bool inside = within(S, c->s, 0) && within(T, c->tau, 0) && within(R, c->r, 0);
  if (spec.kind == BoxSpec::Kind::BG) inside = inside && out.transversal <= b;
  bool core = within(S, c->s, frac) && within(T, c->tau, frac) && within(R, c->r, frac);
  if (spec.kind == BoxSpec::Kind::BG) core = core && out.transversal <= b * (1 - 2 * frac);
  out.inside = inside;
  out.in_boundary = inside && !core;
  return out;
}

}  // namespace ulab
