#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <vector>

#include "specdet/error.hpp"

namespace specdet {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double euler_gamma = std::numbers::egamma;
inline constexpr cplx I_unit{0.0, 1.0};

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

inline void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": " << m.rows() << "x" << m.cols() << " is not square";
    fail(ErrorCode::NonSquare, os.str());
  }
}

inline void require_finite(const ComplexMatrix& m, const char* what) {
  if (!all_finite(m)) fail(ErrorCode::NonFinite, std::string(what) + ": non-finite entry");
}

// Row-major construction helper, mostly for tests and builtins.
inline ComplexMatrix make_matrix(Eigen::Index rows, Eigen::Index cols, std::initializer_list<cplx> entries) {
  ComplexMatrix m(rows, cols);
  auto it = entries.begin();
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (it != entries.end()) ? *it++ : cplx{};
  return m;
}

// Angle convention: arg_theta(z) lies in [theta - 2pi, theta).
struct SpectralCut {
  double theta = pi;

  SpectralCut() = default;
  explicit SpectralCut(double t) : theta(normalize(t)) {}

  static double normalize(double t) {
    double r = std::fmod(t, two_pi);
    if (r < 0) r += two_pi;
    if (r >= two_pi) r -= two_pi;
    return r;
  }

  double arg(cplx z) const {
    double a = std::arg(z);
    while (a >= theta) a -= two_pi;
    while (a < theta - two_pi) a += two_pi;
    return a;
  }

  cplx log(cplx z) const { return {std::log(std::abs(z)), arg(z)}; }

  // Relative distance of z from the ray r e^{i theta}; zero means on the ray.
  double ray_distance(cplx z) const {
    double r = std::abs(z);
    if (r == 0.0) return 0.0;
    cplx dir = std::polar(1.0, theta);
    double along = (z * std::conj(dir)).real();
    if (along <= 0.0) return 1.0;
    return std::abs((z * std::conj(dir)).imag()) / r;
  }

  cplx direction() const { return std::polar(1.0, theta); }
};

inline cplx det(const ComplexMatrix& m) {
  require_square(m, "det");
  require_finite(m, "det");
  if (m.rows() == 0) return 1.0;
  return Eigen::PartialPivLU<ComplexMatrix>(m).determinant();
}

namespace detail {

// Diagonal similarity D^{-1} m D with power-of-two entries, Parlett-Reinsch style.
inline Eigen::VectorXd balance(ComplexMatrix& m) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  bool changed = true;
  int sweeps = 0;
  while (changed && sweeps++ < 50) {
    changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0, r = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(m(j, i));
        r += std::abs(m(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0, s = c + r;
      while (c < r / 2) { c *= 2; r /= 2; f *= 2; }
      while (c >= r * 2) { c /= 2; r *= 2; f /= 2; }
      if (c + r < 0.95 * s) {
        d(i) *= f;
        m.col(i) *= f;
        m.row(i) /= f;
        changed = true;
      }
    }
  }
  return d;
}

inline void unbalance(ComplexMatrix& e, const Eigen::VectorXd& d) {
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) e(i, j) *= d(i) / d(j);
}

}  // namespace detail

inline ComplexMatrix matrix_exp(const ComplexMatrix& m) {
  require_square(m, "matrix_exp");
  require_finite(m, "matrix_exp");
  if (m.rows() == 0) return m;
  ComplexMatrix b = m;
  Eigen::VectorXd d = detail::balance(b);
  ComplexMatrix e = b.exp();
  detail::unbalance(e, d);
  return e;
}

// exp(m) = exp(log_scale) * mantissa, with mantissa renormalized during squaring.
struct ScaledMatrix {
  ComplexMatrix mantissa;
  double log_scale = 0.0;

  ComplexMatrix value() const { return std::exp(log_scale) * mantissa; }
};

inline ScaledMatrix scaled_exp(const ComplexMatrix& m) {
  require_square(m, "scaled_exp");
  require_finite(m, "scaled_exp");
  ComplexMatrix b = m;
  Eigen::VectorXd d = detail::balance(b);
  double nrm = b.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  ComplexMatrix e = (b / std::ldexp(1.0, s)).exp();
  double ls = 0.0;
  for (int k = 0; k < s; ++k) {
    e = (e * e).eval();
    ls *= 2.0;
    double c = e.cwiseAbs().maxCoeff();
    if (c > 0.0 && std::isfinite(c)) {
      e /= c;
      ls += std::log(c);
    }
  }
  detail::unbalance(e, d);
  double c = e.cwiseAbs().maxCoeff();
  if (c > 0.0 && std::isfinite(c)) {
    e /= c;
    ls += std::log(c);
  }
  return {e, ls};
}

inline std::vector<cplx> eigenvalues(const ComplexMatrix& m) {
  require_square(m, "eigenvalues");
  require_finite(m, "eigenvalues");
  Eigen::ComplexEigenSolver<ComplexMatrix> es(m, false);
  std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m, Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

inline bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline double condition_number(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  double smin = sv(sv.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

namespace detail {

// B_{2j}/(2j)! for j = 1..kBernoulliTerms.
inline constexpr int kBernoulliTerms = 40;

inline const std::array<long double, kBernoulliTerms + 1>& bernoulli_over_factorial() {
  static const std::array<long double, kBernoulliTerms + 1> table = [] {
    constexpr long double lpi = std::numbers::pi_v<long double>;
    std::array<long double, kBernoulliTerms + 1> t{};
    for (int j = 1; j <= kBernoulliTerms; ++j) {
      long double z;
      if (j == 1) {
        z = lpi * lpi / 6.0L;
      } else if (j == 2) {
        z = lpi * lpi * lpi * lpi / 90.0L;
      } else {
        z = 0.0L;
        for (int k = 4000; k >= 1; --k) z += std::pow(static_cast<long double>(k), -2.0L * j);
      }
      long double sign = (j % 2 == 1) ? 1.0L : -1.0L;
      t[j] = sign * 2.0L * z / std::pow(2.0L * lpi, 2.0L * j);
    }
    return t;
  }();
  return table;
}

struct HurwitzPair {
  cplx value;
  cplx derivative;
};

// Shift n for a + n: balances the asymptotic remainder against cancellation in the
// partial sum, whose terms reach (a + n)^{1 - Re s} when Re s < 1.
inline int em_shift(cplx s, double a) {
  const auto& bf = bernoulli_over_factorial();
  constexpr double eps = 1.1e-19;
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= 60; ++n) {
    double x = a + n;
    double lead = std::pow(x, 1.0 - s.real()) / std::max(1e-3, std::abs(s - 1.0));
    double cancel = eps * std::max({1.0, lead, n > 0 ? std::pow(x, -s.real()) : 0.0});
    // Smallest term of the remainder series for the value and the derivative.
    double lx = std::log(x), lmin = std::numeric_limits<double>::infinity();
    cplx p = s, dp = 1.0;
    double lscale = 0.0;  // keeps p and dp representable
    for (int j = 1; j <= kBernoulliTerms; ++j) {
      double mag = std::abs(p) * (1.0 + lx) + std::abs(dp);
      double lt = std::log(std::abs(static_cast<double>(bf[j])) * mag) + lscale - (s.real() + 2 * j - 1) * lx;
      lmin = std::min(lmin, lt);
      for (int q = 0; q < 2; ++q) {
        cplx f = s + double(2 * j - 1 + q);
        dp = dp * f + p;
        p = p * f;
      }
      double m = std::max(std::abs(p), std::abs(dp));
      if (m > 1e100) {
        p /= m;
        dp /= m;
        lscale += std::log(m);
      }
    }
    double err = cancel + std::exp(lmin);
    if (err < best_err) {
      best_err = err;
      best = n;
    }
  }
  return best;
}

inline HurwitzPair hurwitz_em(cplx s_in, double a_in) {
  if (s_in == cplx(1.0, 0.0)) fail(ErrorCode::PoleAtOne, "hurwitz_zeta at s = 1");
  if (!(a_in > 0.0) || !std::isfinite(a_in)) fail(ErrorCode::NonFinite, "hurwitz_zeta requires a > 0");
  using real = long double;
  using lc = std::complex<real>;
  const lc s(s_in.real(), s_in.imag());
  const real a = a_in;
  const int n_shift = em_shift(s_in, a_in);
  const real x = a + n_shift;
  const real lx = std::log(x);

  lc sum = 0.0L, dsum = 0.0L;
  for (int k = n_shift - 1; k >= 0; --k) {
    real ak = a + k;
    real la = std::log(ak);
    lc t = std::exp(-s * la);
    sum += t;
    dsum -= la * t;
  }
  lc xs = std::exp(-s * lx);  // x^{-s}
  lc x1s = x * xs;            // x^{1-s}
  lc sm1 = s - 1.0L;
  sum += x1s / sm1 + 0.5L * xs;
  dsum += -lx * x1s / sm1 - x1s / (sm1 * sm1) - 0.5L * lx * xs;

  const auto& bf = bernoulli_over_factorial();
  lc p = s, dp = 1.0L;  // product s(s+1)...(s+2j-2) and its s-derivative
  lc xpow = xs / x;     // x^{-s-2j+1} for j = 1
  real prev = std::numeric_limits<real>::infinity();
  for (int j = 1; j <= kBernoulliTerms; ++j) {
    lc term = bf[j] * p * xpow;
    lc dterm = bf[j] * (dp - lx * p) * xpow;
    real mag = std::abs(term) + std::abs(dterm);
    if (mag > prev && j > 4) break;  // asymptotic series started to diverge
    sum += term;
    dsum += dterm;
    real scale = std::max({1.0L, std::abs(sum), std::abs(dsum)});
    if (mag < 1e-21L * scale) break;
    prev = mag;
    for (int q = 0; q < 2; ++q) {
      lc f = s + static_cast<real>(2 * j - 1 + q);
      dp = dp * f + p;
      p = p * f;
    }
    xpow /= x * x;
  }
  return {cplx(static_cast<double>(sum.real()), static_cast<double>(sum.imag())),
          cplx(static_cast<double>(dsum.real()), static_cast<double>(dsum.imag()))};
}

}  // namespace detail

inline cplx hurwitz_zeta(cplx s, double a) { return detail::hurwitz_em(s, a).value; }

inline cplx hurwitz_zeta_ds(cplx s, double a) { return detail::hurwitz_em(s, a).derivative; }

inline double digamma(double x) {
  if (!(x > 0.0)) fail(ErrorCode::NonFinite, "digamma requires x > 0");
  double acc = 0.0;
  while (x < 12.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  double x2 = 1.0 / (x * x);
  // log x - 1/2x - sum B_2k / (2k x^2k)
  static constexpr double b[] = {1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730, 7.0 / 6};
  double series = 0.0, p = x2;
  for (int k = 1; k <= 7; ++k) {
    series += b[k - 1] / (2.0 * k) * p;
    p *= x2;
  }
  return acc + std::log(x) - 0.5 / x - series;
}

// Exponential integral E1(x) = int_x^inf e^{-t}/t dt for x > 0.
inline double expint_e1(double x) {
  if (!(x > 0.0)) fail(ErrorCode::NonFinite, "E1 requires x > 0");
  return -std::expint(-x);
}

}  // namespace specdet
