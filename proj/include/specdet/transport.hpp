#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "specdet/numerics.hpp"
#include "specdet/reglim.hpp"

namespace specdet {

// sum_d coeffs[d] x^d with n x n matrix coefficients.
struct MatrixPolynomial {
  std::vector<ComplexMatrix> coeffs;

  MatrixPolynomial() = default;
  explicit MatrixPolynomial(std::vector<ComplexMatrix> c) : coeffs(std::move(c)) {}

  static MatrixPolynomial constant(const ComplexMatrix& m) { return MatrixPolynomial({m}); }
  static MatrixPolynomial zero(Eigen::Index n) { return constant(ComplexMatrix::Zero(n, n)); }
  static MatrixPolynomial scalar(cplx c) { return constant(ComplexMatrix::Constant(1, 1, c)); }

  Eigen::Index rank() const { return coeffs.empty() ? 0 : coeffs.front().rows(); }

  int degree() const {
    for (int d = static_cast<int>(coeffs.size()) - 1; d > 0; --d)
      if (coeffs[d].cwiseAbs().maxCoeff() != 0.0) return d;
    return 0;
  }

  ComplexMatrix eval(double x) const {
    ComplexMatrix v = coeffs.back();
    for (int d = static_cast<int>(coeffs.size()) - 2; d >= 0; --d) {
      v *= x;
      v += coeffs[d];
    }
    return v;
  }

  MatrixPolynomial derivative() const {
    if (coeffs.size() <= 1) return zero(rank());
    std::vector<ComplexMatrix> c;
    for (std::size_t d = 1; d < coeffs.size(); ++d) c.push_back(static_cast<double>(d) * coeffs[d]);
    return MatrixPolynomial(std::move(c));
  }

  // Pointwise adjoint for real x.
  MatrixPolynomial adjoint() const {
    std::vector<ComplexMatrix> c;
    for (const auto& m : coeffs) c.push_back(m.adjoint());
    return MatrixPolynomial(std::move(c));
  }

  MatrixPolynomial operator+(const MatrixPolynomial& o) const {
    std::size_t len = std::max(coeffs.size(), o.coeffs.size());
    Eigen::Index n = std::max(rank(), o.rank());
    std::vector<ComplexMatrix> c(len, ComplexMatrix::Zero(n, n));
    for (std::size_t d = 0; d < coeffs.size(); ++d) c[d] += coeffs[d];
    for (std::size_t d = 0; d < o.coeffs.size(); ++d) c[d] += o.coeffs[d];
    return MatrixPolynomial(std::move(c));
  }

  MatrixPolynomial operator-() const {
    std::vector<ComplexMatrix> c;
    for (const auto& m : coeffs) c.push_back(-m);
    return MatrixPolynomial(std::move(c));
  }

  MatrixPolynomial operator-(const MatrixPolynomial& o) const { return *this + (-o); }

  MatrixPolynomial operator*(const MatrixPolynomial& o) const {
    Eigen::Index n = rank();
    std::vector<ComplexMatrix> c(coeffs.size() + o.coeffs.size() - 1, ComplexMatrix::Zero(n, n));
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      for (std::size_t j = 0; j < o.coeffs.size(); ++j) c[i + j] += coeffs[i] * o.coeffs[j];
    return MatrixPolynomial(std::move(c));
  }

  bool operator==(const MatrixPolynomial& o) const {
    if (degree() != o.degree() || rank() != o.rank()) return false;
    for (int d = 0; d <= degree(); ++d)
      if (coeffs[d] != o.coeffs[d]) return false;
    return true;
  }
};

struct OdeOperator {
  int order = 1;
  int rank = 1;
  double beta = 1.0;
  std::vector<MatrixPolynomial> coefficients;  // B_0 .. B_order
  std::string label;

  const MatrixPolynomial& leading() const { return coefficients.back(); }

  bool is_constant() const {
    return std::all_of(coefficients.begin(), coefficients.end(),
                       [](const MatrixPolynomial& p) { return p.degree() == 0; });
  }

  bool operator==(const OdeOperator& o) const {
    return order == o.order && rank == o.rank && beta == o.beta && coefficients == o.coefficients;
  }

  void validate() const;
};

namespace detail {

inline std::vector<double> chebyshev_points(int n, double a, double b) {
  std::vector<double> x(n);
  for (int k = 0; k < n; ++k) x[k] = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(pi * (k + 0.5) / n);
  return x;
}

// Real roots in [-1, 1] of the interpolant of f at Chebyshev points, via the companion matrix.
inline bool polynomial_has_root_in_unit_interval(const std::vector<cplx>& values, const std::vector<double>& t) {
  const int n = static_cast<int>(values.size());
  if (n <= 1) return false;
  ComplexMatrix v(n, n);
  ComplexVector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) v(i, j) = std::pow(t[i], j);
    y(i) = values[i];
  }
  ComplexVector c = v.fullPivLu().solve(y);
  int deg = n - 1;
  double scale = c.cwiseAbs().maxCoeff();
  while (deg > 0 && std::abs(c(deg)) <= 1e-13 * scale) --deg;
  if (deg == 0) return false;
  ComplexMatrix comp = ComplexMatrix::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -c(i) / c(deg);
  for (cplx z : eigenvalues(comp))
    if (std::abs(z.imag()) < 1e-8 && std::abs(z.real()) <= 1.0 + 1e-10) return true;
  return false;
}

}  // namespace detail

inline void OdeOperator::validate() const {
  if (order < 1 || rank < 1) fail(ErrorCode::NonSquare, "operator order and rank must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::NonFinite, "interval length must be positive");
  if (static_cast<int>(coefficients.size()) != order + 1)
    fail(ErrorCode::NonSquare, "operator needs order + 1 coefficient polynomials");
  for (const auto& p : coefficients) {
    if (p.coeffs.empty()) fail(ErrorCode::NonSquare, "empty coefficient polynomial");
    for (const auto& m : p.coeffs) {
      if (m.rows() != rank || m.cols() != rank) fail(ErrorCode::NonSquare, "coefficient matrix has wrong size");
      require_finite(m, "coefficient");
    }
  }
  const MatrixPolynomial& lead = leading();
  double scale = 0.0;
  for (const auto& m : lead.coeffs) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  if (scale == 0.0) fail(ErrorCode::LeadingCoefficientSingular, "leading coefficient vanishes");
  const int grid = 1025;
  const double tol = 1e-12 * std::pow(scale, rank);
  for (int k = 0; k < grid; ++k) {
    double x = beta * k / (grid - 1);
    if (std::abs(det(lead.eval(x))) <= tol)
      fail(ErrorCode::LeadingCoefficientSingular, "det of leading coefficient vanishes at x = " + std::to_string(x));
  }
  // det B_r(x) is a polynomial of degree <= rank * deg B_r; look for real roots in [0, beta].
  const int d = rank * lead.degree();
  if (d > 0) {
    auto xs = detail::chebyshev_points(d + 1, 0.0, beta);
    std::vector<double> ts;
    std::vector<cplx> vals;
    for (double x : xs) {
      ts.push_back(2.0 * x / beta - 1.0);
      vals.push_back(det(lead.eval(x)));
    }
    if (detail::polynomial_has_root_in_unit_interval(vals, ts))
      fail(ErrorCode::LeadingCoefficientSingular, "det of leading coefficient has a root in [0, beta]");
  }
}

// K' = Omega_lambda(x) K with Omega_lambda = omega0(x) + lambda * jac(x).
class CompanionSystem {
 public:
  CompanionSystem() = default;

  explicit CompanionSystem(OdeOperator op) : op_(std::move(op)) {
    op_.validate();
    r_ = op_.order;
    n_ = op_.rank;
    constant_ = op_.is_constant();
    if (op_.leading().degree() == 0) const_binv_ = op_.leading().eval(0.0).partialPivLu().inverse();
    if (constant_) {
      const_omega0_ = build_omega0(0.0);
      const_jac_ = build_jac(0.0);
    }
  }

  int dim() const { return r_ * n_; }
  int order() const { return r_; }
  int rank() const { return n_; }
  double beta() const { return op_.beta; }
  bool constant() const { return constant_; }
  const OdeOperator& op() const { return op_; }

  ComplexMatrix omega(double x, cplx lambda) const {
    if (constant_) return const_omega0_ + lambda * const_jac_;
    const ComplexMatrix binv = leading_inverse(x);
    ComplexMatrix om = build_omega0(x, binv);
    om.block((r_ - 1) * n_, 0, n_, n_) += lambda * binv;
    return om;
  }

  ComplexMatrix domega_dlambda(double x) const { return constant_ ? const_jac_ : build_jac(x); }

  ComplexMatrix leading_inverse(double x) const {
    if (const_binv_.size() > 0) return const_binv_;
    return op_.leading().eval(x).partialPivLu().inverse();
  }

 private:
  ComplexMatrix build_omega0(double x) const { return build_omega0(x, leading_inverse(x)); }

  ComplexMatrix build_omega0(double x, const ComplexMatrix& binv) const {
    const int m = dim();
    ComplexMatrix om = ComplexMatrix::Zero(m, m);
    for (int i = 0; i + 1 < r_; ++i) om.block(i * n_, (i + 1) * n_, n_, n_).setIdentity();
    for (int k = 0; k < r_; ++k) {
      const MatrixPolynomial& a = op_.coefficients[k];
      if (a.coeffs.size() == 1 && a.coeffs[0].cwiseAbs().maxCoeff() == 0.0) continue;
      om.block((r_ - 1) * n_, k * n_, n_, n_).noalias() = -binv.lazyProduct(a.eval(x));
    }
    return om;
  }

  ComplexMatrix build_jac(double x) const {
    const int m = dim();
    ComplexMatrix j = ComplexMatrix::Zero(m, m);
    j.block((r_ - 1) * n_, 0, n_, n_) = leading_inverse(x);
    return j;
  }

  OdeOperator op_;
  ComplexMatrix const_binv_;  // set when the leading coefficient does not depend on x
  int r_ = 1, n_ = 1;
  bool constant_ = false;
  ComplexMatrix const_omega0_, const_jac_;
};

inline CompanionSystem companion(const OdeOperator& op) { return CompanionSystem(op); }

struct Tolerance {
  double rtol = 1e-10;
  double atol = 1e-12;
};

namespace detail {

// Dormand-Prince 5(4) for y' = f(x, y) on complex vectors. hook(y, k1) may rescale
// state and the FSAL derivative in place after each accepted step.
template <class Rhs, class Hook>
void dopri5(Rhs&& f, double x0, double x1, ComplexVector& y, const Tolerance& tol, Hook&& hook,
            const std::string& context) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  const double span = x1 - x0;
  if (span <= 0.0) return;
  ComplexVector k1 = f(x0, y);
  // Initial step from the Hairer heuristic.
  auto sc_norm = [&](const ComplexVector& v, const ComplexVector& ya, const ComplexVector& yb) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double sr = tol.atol + tol.rtol * std::max(std::abs(ya(i).real()), std::abs(yb(i).real()));
      double si = tol.atol + tol.rtol * std::max(std::abs(ya(i).imag()), std::abs(yb(i).imag()));
      s += std::pow(v(i).real() / sr, 2) + std::pow(v(i).imag() / si, 2);
    }
    return std::sqrt(s / (2.0 * static_cast<double>(v.size())));
  };
  double d0 = sc_norm(y, y, y), d1 = sc_norm(k1, y, y);
  double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
  h = std::min(h, span);
  double x = x0;
  long steps = 0;
  double err_old = 1e-4;
  ComplexVector stage(y.size()), ynew(y.size()), err(y.size());
  while (x < x1) {
    if (x + h > x1) h = x1 - x;
    if (h < 1e-14 * std::max(1.0, std::abs(x)) || ++steps > 2000000)
      fail(ErrorCode::StepSizeUnderflow, context + " at x = " + std::to_string(x));
    stage = y + h * (a21 * k1);
    ComplexVector k2 = f(x + c2 * h, stage);
    stage = y + h * (a31 * k1 + a32 * k2);
    ComplexVector k3 = f(x + c3 * h, stage);
    stage = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    ComplexVector k4 = f(x + c4 * h, stage);
    stage = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    ComplexVector k5 = f(x + c5 * h, stage);
    stage = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    ComplexVector k6 = f(x + h, stage);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    ComplexVector k7 = f(x + h, ynew);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = sc_norm(err, y, ynew);
    if (!std::isfinite(en)) {
      h *= 0.2;
      continue;
    }
    if (en <= 1.0) {
      x = (h >= x1 - x) ? x1 : x + h;
      y.swap(ynew);
      k1 = std::move(k7);
      hook(y, k1);
      // PI step control
      double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.7 / 5) * std::pow(err_old, 0.4 / 5);
      fac = std::clamp(fac, 0.2, 10.0);
      err_old = std::max(en, 1e-4);
      h *= fac;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
    }
  }
}

}  // namespace detail

class TransportEvaluator {
 public:
  TransportEvaluator(CompanionSystem sys, cplx lambda, Tolerance tol = {})
      : sys_(std::move(sys)), lambda_(lambda), tol_(tol) {}

  const CompanionSystem& system() const { return sys_; }
  cplx lambda() const { return lambda_; }

  // K(x1 <- x0) for x0 <= x1, as exp(log_scale) * mantissa.
  ScaledMatrix transport_scaled(double x0, double x1) const {
    const int m = sys_.dim();
    if (x1 < x0) fail(ErrorCode::NonFinite, "transport needs x0 <= x1");
    if (x1 == x0) return {ComplexMatrix::Identity(m, m), 0.0};
    if (sys_.constant()) return scaled_exp((x1 - x0) * sys_.omega(0.0, lambda_));
    ComplexVector y = Eigen::Map<const ComplexVector>(ComplexMatrix::Identity(m, m).eval().data(), m * m);
    double log_scale = 0.0;
    auto f = [&](double x, const ComplexVector& v) -> ComplexVector {
      ComplexMatrix om = sys_.omega(x, lambda_);
      Eigen::Map<const ComplexMatrix> k(v.data(), m, m);
      ComplexMatrix d = om * k;
      return Eigen::Map<ComplexVector>(d.data(), m * m);
    };
    auto hook = [&](ComplexVector& v, ComplexVector& k1) {
      double c = v.cwiseAbs().maxCoeff();
      if (c > 1e120) {
        v /= c;
        k1 /= c;
        log_scale += std::log(c);
      }
    };
    detail::dopri5(f, x0, x1, y, tol_, hook, context());
    ComplexMatrix k = Eigen::Map<ComplexMatrix>(y.data(), m, m);
    return {k, log_scale};
  }

  ComplexMatrix transport(double x_end) const { return transport_between(0.0, x_end); }

  ComplexMatrix transport_between(double x0, double x1) const {
    if (x1 > sys_.beta() * (1 + 1e-14)) fail(ErrorCode::NonFinite, "transport endpoint beyond beta");
    ComplexMatrix k;
    if (sys_.constant()) {
      k = matrix_exp((x1 - x0) * sys_.omega(0.0, lambda_));
    } else {
      ScaledMatrix s = transport_scaled(x0, x1);
      k = s.value();
    }
    if (!all_finite(k)) fail(ErrorCode::NonFinite, "transport overflow; " + context());
    return k;
  }

  // K at each of the increasing points xs, integrating piecewise.
  std::vector<ComplexMatrix> transport_grid(const std::vector<double>& xs) const {
    std::vector<ComplexMatrix> out;
    out.reserve(xs.size());
    const int m = sys_.dim();
    ComplexMatrix acc = ComplexMatrix::Identity(m, m);
    double prev = 0.0;
    for (double x : xs) {
      if (sys_.constant()) {
        out.push_back(matrix_exp(x * sys_.omega(0.0, lambda_)));
        continue;
      }
      acc = (transport_between(prev, x) * acc).eval();
      prev = x;
      out.push_back(acc);
    }
    return out;
  }

  // int_0^x tr Omega_lambda, integrated with the same scheme.
  cplx liouville_exponent(double x_end) const {
    if (sys_.constant()) return x_end * sys_.omega(0.0, lambda_).trace();
    ComplexVector y = ComplexVector::Zero(1);
    auto f = [&](double x, const ComplexVector&) -> ComplexVector {
      ComplexVector d(1);
      d(0) = sys_.omega(x, lambda_).trace();
      return d;
    };
    detail::dopri5(f, 0.0, x_end, y, tol_, [](ComplexVector&, ComplexVector&) {}, context());
    return y(0);
  }

  std::string context() const {
    std::ostringstream os;
    os << "lambda = (" << lambda_.real() << ", " << lambda_.imag() << ")";
    return os.str();
  }

 private:
  CompanionSystem sys_;
  cplx lambda_;
  Tolerance tol_;
};

inline ComplexMatrix transport(const TransportEvaluator& ev, double x_end) { return ev.transport(x_end); }

// Square boundary frame [M N]; general rectangular frames appear only in index().
struct StiefelFrame {
  ComplexMatrix m;
  ComplexMatrix n_mat;

  Eigen::Index rows() const { return m.rows(); }
  Eigen::Index dim() const { return m.cols(); }

  ComplexMatrix stacked() const {
    ComplexMatrix mn(m.rows(), m.cols() + n_mat.cols());
    mn << m, n_mat;
    return mn;
  }

  StiefelFrame left_multiplied(const ComplexMatrix& g) const { return {g * m, g * n_mat}; }

  void validate(Eigen::Index expected_dim) const {
    if (m.rows() != expected_dim || m.cols() != expected_dim || n_mat.rows() != expected_dim ||
        n_mat.cols() != expected_dim)
      fail(ErrorCode::NonSquare, "frame blocks must be " + std::to_string(expected_dim) + "x" +
                                     std::to_string(expected_dim));
    require_finite(m, "frame M");
    require_finite(n_mat, "frame N");
    Eigen::JacobiSVD<ComplexMatrix> svd(stacked());
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-12 * sv(0)) fail(ErrorCode::RankDeficient, "frame [M N] is rank deficient");
  }
};

enum class GrowthGauge { None, Dominant };

// det(M + N K_lambda) through the Pluecker coordinates of [I; K(x)], which stay
// representable where K itself overflows.
class ExteriorTransport {
 public:
  ExteriorTransport(CompanionSystem sys, Tolerance tol = {}) : sys_(std::move(sys)), tol_(tol) {
    m_ = sys_.dim();
    if (m_ > 6) fail(ErrorCode::BudgetExceeded, "exterior transport supports dimension <= 6");
    build_subsets();
    ComplexMatrix y0(2 * m_, m_);
    y0 << ComplexMatrix::Identity(m_, m_), ComplexMatrix::Identity(m_, m_);
    p0_ = minors_rows(y0);
  }

  const CompanionSystem& system() const { return sys_; }
  std::size_t compound_dim() const { return subsets_.size(); }

  ComplexVector frame_weights(const StiefelFrame& f) const {
    ComplexMatrix mn = f.stacked();
    ComplexVector w(subsets_.size());
    for (std::size_t s = 0; s < subsets_.size(); ++s) {
      ComplexMatrix sub(m_, m_);
      for (int c = 0; c < m_; ++c) sub.col(c) = mn.col(subsets_[s][c]);
      w(s) = det(sub);
    }
    return w;
  }

  // Generator of the induced flow on Pluecker coordinates for diag(0, omega).
  ComplexMatrix generator(const ComplexMatrix& omega) const {
    const auto c = static_cast<Eigen::Index>(subsets_.size());
    ComplexMatrix g = ComplexMatrix::Zero(c, c);
    for (const auto& t : transitions_) g(t.row, t.col) += static_cast<double>(t.sign) * omega(t.i, t.j);
    return g;
  }

  static cplx growth_rate(const ComplexMatrix& omega) {
    cplx nu = 0.0;
    for (cplx w : eigenvalues(omega))
      if (w.real() > 0.0) nu += w;
    return nu;
  }

  // Normalized Pluecker vector at beta: exterior coordinates = exp(log_scale) * p.
  struct State {
    ComplexVector p;
    cplx log_scale = 0.0;
  };

  State propagate(cplx lambda, GrowthGauge gauge) const {
    const double beta = sys_.beta();
    State st;
    if (sys_.constant()) {
      ComplexMatrix om = sys_.omega(0.0, lambda);
      cplx nu = gauge == GrowthGauge::Dominant ? growth_rate(om) : cplx(0.0);
      ComplexMatrix g = generator(om);
      g.diagonal().array() -= nu;
      ScaledMatrix e = scaled_exp(beta * g);
      st.p = e.mantissa * p0_;
      st.log_scale = beta * nu + e.log_scale;
    } else {
      const auto c = static_cast<Eigen::Index>(subsets_.size());
      ComplexVector y(c + 1);
      y.head(c) = p0_;
      y(c) = 0.0;
      double real_scale = 0.0;
      auto f = [&](double x, const ComplexVector& v) -> ComplexVector {
        ComplexMatrix om = sys_.omega(x, lambda);
        cplx nu = gauge == GrowthGauge::Dominant ? growth_rate(om) : cplx(0.0);
        ComplexVector d(c + 1);
        d.head(c) = -nu * v.head(c);
        for (const auto& t : transitions_) d(t.row) += static_cast<double>(t.sign) * om(t.i, t.j) * v(t.col);
        d(c) = nu;
        return d;
      };
      auto hook = [&](ComplexVector& v, ComplexVector& k1) {
        double s = v.head(c).cwiseAbs().maxCoeff();
        if (s > 1e100 || (s < 1e-100 && s > 0.0)) {
          v.head(c) /= s;
          k1.head(c) /= s;
          real_scale += std::log(s);
        }
      };
      std::ostringstream os;
      os << "lambda = (" << lambda.real() << ", " << lambda.imag() << ")";
      detail::dopri5(f, 0.0, beta, y, tol_, hook, os.str());
      st.p = y.head(c);
      st.log_scale = y(c) + real_scale;
    }
    double s = st.p.cwiseAbs().maxCoeff();
    if (s > 0.0 && std::isfinite(s)) {
      st.p /= s;
      st.log_scale += std::log(s);
    }
    if (!all_finite(st.p)) fail(ErrorCode::NonFinite, "exterior transport produced non-finite state");
    return st;
  }

  // det(M + N K_lambda) = exp(log_scale) * mantissa; relative_size compares the
  // mantissa with the magnitude of the summands that produced it.
  struct Value {
    LogScaled value;
    double relative_size = 1.0;
  };

  Value boundary_det(const ComplexVector& w, cplx lambda, GrowthGauge gauge) const {
    // N = 0: only the minor of the identity block contributes, and it stays 1.
    if (w.tail(w.size() - 1).cwiseAbs().maxCoeff() == 0.0) return {{0.0, w(0)}, w(0) == cplx(0.0) ? 0.0 : 1.0};
    State st = propagate(lambda, gauge);
    cplx mant = (w.array() * st.p.array()).sum();
    double mag = (w.array().abs() * st.p.array().abs()).sum();
    Value v;
    v.value = {st.log_scale, mant};
    v.relative_size = mag > 0.0 ? std::abs(mant) / mag : 0.0;
    return v;
  }

 private:
  struct Transition {
    Eigen::Index row, col;
    int i, j;  // indices into omega
    int sign;
  };

  void build_subsets() {
    const int total = 2 * m_;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
      if (static_cast<int>(cur.size()) == m_) {
        subsets_.push_back(cur);
        return;
      }
      for (int k = start; k < total; ++k) {
        cur.push_back(k);
        rec(k + 1);
        cur.pop_back();
      }
    };
    rec(0);
    std::map<std::vector<int>, Eigen::Index> index;
    for (std::size_t s = 0; s < subsets_.size(); ++s) index[subsets_[s]] = static_cast<Eigen::Index>(s);
    for (std::size_t s = 0; s < subsets_.size(); ++s) {
      const auto& set = subsets_[s];
      for (int pos = 0; pos < m_; ++pos) {
        int i = set[pos];
        if (i < m_) continue;
        for (int j = m_; j < total; ++j) {
          if (j == i) {
            transitions_.push_back({static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s), i - m_, j - m_, 1});
            continue;
          }
          if (std::find(set.begin(), set.end(), j) != set.end()) continue;
          std::vector<int> other = set;
          other[pos] = j;
          std::sort(other.begin(), other.end());
          int between = 0;
          for (int q : set)
            if (q != i && q > std::min(i, j) && q < std::max(i, j)) ++between;
          transitions_.push_back({static_cast<Eigen::Index>(s), index.at(other), i - m_, j - m_,
                                  (between % 2 == 0) ? 1 : -1});
        }
      }
    }
  }

  ComplexVector minors_rows(const ComplexMatrix& y) const {
    ComplexVector p(subsets_.size());
    for (std::size_t s = 0; s < subsets_.size(); ++s) {
      ComplexMatrix sub(m_, m_);
      for (int r = 0; r < m_; ++r) sub.row(r) = y.row(subsets_[s][r]);
      p(s) = det(sub);
    }
    return p;
  }

  CompanionSystem sys_;
  Tolerance tol_;
  int m_ = 1;
  std::vector<std::vector<int>> subsets_;
  std::vector<Transition> transitions_;
  ComplexVector p0_;
};

namespace detail {

// Gauss-Legendre nodes and weights on [a, b], composite over `panels`.
inline void gauss_legendre(int n, int panels, double a, double b, std::vector<double>& x, std::vector<double>& w) {
  std::vector<double> t(n), wt(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        wt[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        break;
      }
      wt[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    t[i] = z;
  }
  x.clear();
  w.clear();
  double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    for (int i = n - 1; i >= 0; --i) {
      x.push_back(lo + 0.5 * h * (t[i] + 1.0));
      w.push_back(0.5 * h * wt[i]);
    }
  }
}

inline ComplexMatrix kernel_block(const CompanionSystem& sys, const ComplexMatrix& full, double y) {
  const int n = sys.rank(), r = sys.order();
  return full.block(0, (r - 1) * n, n, n) * sys.leading_inverse(y);
}

}  // namespace detail

// Kernel of (D_P - lambda)^{-1}: the (1, r) block of the companion Green matrix times B_r(y)^{-1}.
inline ComplexMatrix resolvent_kernel(const OdeOperator& op, const StiefelFrame& frame, cplx lambda, double x,
                                      double y, Tolerance tol = {}) {
  CompanionSystem sys(op);
  frame.validate(sys.dim());
  TransportEvaluator ev(sys, lambda, tol);
  const int m = sys.dim();
  ComplexMatrix k = ev.transport(op.beta);
  ComplexMatrix mm = frame.m + frame.n_mat * k;
  Eigen::PartialPivLU<ComplexMatrix> lu(mm);
  if (std::abs(lu.determinant()) <= 1e-14 * std::max(1.0, mm.cwiseAbs().maxCoeff()))
    fail(ErrorCode::NonInvertibleProblem, "M + N K is singular at " + ev.context());
  ComplexMatrix kx = ev.transport(x), ky = ev.transport(y);
  ComplexMatrix c = lu.solve(frame.n_mat * k);
  ComplexMatrix kyinv = ky.partialPivLu().inverse();
  ComplexMatrix full =
      x > y ? (kx * (ComplexMatrix::Identity(m, m) - c) * kyinv).eval() : (-kx * c * kyinv).eval();
  return detail::kernel_block(sys, full, y);
}

// Smooth difference of two resolvent kernels for the same operator.
inline ComplexMatrix relative_kernel(const OdeOperator& op, const StiefelFrame& f1, const StiefelFrame& f2,
                                     cplx lambda, double x, double y, Tolerance tol = {}) {
  CompanionSystem sys(op);
  TransportEvaluator ev(sys, lambda, tol);
  ComplexMatrix k = ev.transport(op.beta);
  ComplexMatrix c1 = (f1.m + f1.n_mat * k).partialPivLu().solve(f1.n_mat * k);
  ComplexMatrix c2 = (f2.m + f2.n_mat * k).partialPivLu().solve(f2.n_mat * k);
  ComplexMatrix kx = ev.transport(x), ky = ev.transport(y);
  ComplexMatrix full = -kx * (c1 - c2) * ky.partialPivLu().inverse();
  return detail::kernel_block(sys, full, y);
}

// Tr of the relative resolvent for first-order operators: integral of the diagonal of relative_kernel.
inline cplx relative_resolvent_trace(const OdeOperator& op, const StiefelFrame& f1, const StiefelFrame& f2,
                                     cplx lambda, Tolerance tol = {}) {
  if (op.order != 1) fail(ErrorCode::NonSquare, "kernel-level trace is defined for first-order operators");
  CompanionSystem sys(op);
  TransportEvaluator ev(sys, lambda, tol);
  ComplexMatrix k = ev.transport(op.beta);
  ComplexMatrix c1 = (f1.m + f1.n_mat * k).partialPivLu().solve(f1.n_mat * k);
  ComplexMatrix c2 = (f2.m + f2.n_mat * k).partialPivLu().solve(f2.n_mat * k);
  std::vector<double> xs, ws;
  detail::gauss_legendre(20, 8, 0.0, op.beta, xs, ws);
  auto ks = ev.transport_grid(xs);
  cplx acc = 0.0;
  for (std::size_t q = 0; q < xs.size(); ++q) {
    ComplexMatrix full = -ks[q] * (c1 - c2) * ks[q].partialPivLu().inverse();
    acc += ws[q] * detail::kernel_block(sys, full, xs[q]).trace();
  }
  return acc;
}

// d/dlambda log det(M + N K_lambda) = int tr[dOmega/dlambda K(x) (M+NK)^{-1} N K K(x)^{-1}] dx.
inline cplx log_det_lambda_derivative(const OdeOperator& op, const StiefelFrame& f, cplx lambda,
                                      Tolerance tol = {}) {
  CompanionSystem sys(op);
  TransportEvaluator ev(sys, lambda, tol);
  ComplexMatrix k = ev.transport(op.beta);
  ComplexMatrix c = (f.m + f.n_mat * k).partialPivLu().solve(f.n_mat * k);
  std::vector<double> xs, ws;
  detail::gauss_legendre(20, 8, 0.0, op.beta, xs, ws);
  auto ks = ev.transport_grid(xs);
  cplx acc = 0.0;
  for (std::size_t q = 0; q < xs.size(); ++q)
    acc += ws[q] * (sys.domega_dlambda(xs[q]) * ks[q] * c * ks[q].partialPivLu().inverse()).trace();
  return acc;
}

}  // namespace specdet
