#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "specdet/builtins.hpp"

namespace specdet {

struct Rect {
  double re0, re1, im0, im1;

  cplx center() const { return {0.5 * (re0 + re1), 0.5 * (im0 + im1)}; }
  double width() const { return re1 - re0; }
  double height() const { return im1 - im0; }
  double diameter() const { return std::hypot(width(), height()); }
  bool contains(cplx z, double pad = 0.0) const {
    return z.real() >= re0 - pad && z.real() <= re1 + pad && z.imag() >= im0 - pad && z.imag() <= im1 + pad;
  }
};

struct Eigenvalue {
  cplx value;
  int multiplicity = 1;
};

struct CellCount {
  Rect cell;
  int count;
};

// Closed-form families the oracle can evaluate exactly.
struct DirichletFamily {
  double beta;
};
struct TwistedFamily {
  double a;
  double beta;
};
using SpectralFamily = std::variant<std::monostate, DirichletFamily, TwistedFamily>;

struct Spectrum {
  std::vector<Eigenvalue> eigenvalues;
  Rect search_region{0, 0, 0, 0};
  int total_count = 0;
  std::vector<CellCount> completeness_certificate;
  SpectralFamily family;
  long evaluations = 0;

  int size_with_multiplicity() const {
    int s = 0;
    for (const auto& e : eigenvalues) s += e.multiplicity;
    return s;
  }
};

namespace detail {

class ZeroScanner {
 public:
  ZeroScanner(const BoundaryProblem& p, long budget)
      : ext_(CompanionSystem(p.op), p.tol), budget_(budget) {
    p.frame.validate(ext_.system().dim());
    w_ = ext_.frame_weights(p.frame);
    trivial_ = p.frame.n_mat.cwiseAbs().maxCoeff() == 0.0;
  }

  bool trivial() const { return trivial_; }
  long evaluations() const { return evals_; }

  ExteriorTransport::Value eval(cplx lam) {
    if (++evals_ > budget_) fail(ErrorCode::BudgetExceeded, "spectrum scan exceeded its evaluation budget");
    return ext_.boundary_det(w_, lam, GrowthGauge::None);
  }

  // Winding number of det M_lambda around the rectangle; throws BoundaryZero when an
  // edge passes through a zero.
  int winding(const Rect& r) {
    cplx corners[4] = {{r.re0, r.im0}, {r.re1, r.im0}, {r.re1, r.im1}, {r.re0, r.im1}};
    double total = 0.0;
    for (int e = 0; e < 4; ++e) total += edge_phase(corners[e], corners[(e + 1) % 4]);
    double w = total / two_pi;
    long k = std::lround(w);
    if (std::abs(w - k) > 0.05) fail(ErrorCode::BoundaryZero, "winding count is not an integer");
    return static_cast<int>(k);
  }

 private:
  double phase_of(const ExteriorTransport::Value& v) const { return std::arg(v.value.mantissa); }

  double edge_phase(cplx a, cplx b) {
    const int base = 32;
    struct Pt {
      double t;
      cplx m;
      double rate;  // |f'/f| at the point
    };
    const cplx dir = b - a;
    const double len = std::abs(dir);
    auto at = [&](double t) {
      cplx z = a + t * dir;
      auto v = checked(z);
      double h = 1e-6 * std::max(1.0, std::abs(z));
      auto vp = eval(z + h), vm = eval(z - h);
      cplx dlog = ((vp.value / v.value).value() - (vm.value / v.value).value()) / (2.0 * h);
      return Pt{t, v.value.mantissa, std::abs(dlog)};
    };
    auto step = [](const Pt& p, const Pt& q) { return std::arg(q.m / p.m); };
    const double floor_t = 1e-12 * std::max(1.0, std::abs(a) + std::abs(b)) / len;
    // Accept a segment once the phase step, a midpoint resample and the log-derivative
    // bound all agree that less than an eighth of a turn was traversed.
    double total = 0.0;
    std::vector<std::pair<Pt, Pt>> stack;
    std::vector<Pt> pts;
    for (int k = 0; k <= base; ++k) pts.push_back(at(static_cast<double>(k) / base));
    for (int k = base - 1; k >= 0; --k) stack.push_back({pts[k], pts[k + 1]});
    while (!stack.empty()) {
      auto [p, q] = stack.back();
      stack.pop_back();
      double whole = step(p, q);
      double span = (q.t - p.t) * len;
      if (std::max(p.rate, q.rate) * span <= pi / 4 && std::abs(whole) <= pi / 4) {
        Pt m = at(0.5 * (p.t + q.t));
        double h1 = step(p, m), h2 = step(m, q);
        if (m.rate * span <= pi / 4 && std::abs(h1 + h2 - whole) < 1e-6) {
          total += whole;
          continue;
        }
        if (q.t - p.t < floor_t) fail(ErrorCode::BoundaryZero, "edge passes through a zero");
        stack.push_back({m, q});
        stack.push_back({p, m});
        continue;
      }
      if (q.t - p.t < floor_t) fail(ErrorCode::BoundaryZero, "edge passes through a zero");
      Pt m = at(0.5 * (p.t + q.t));
      stack.push_back({m, q});
      stack.push_back({p, m});
    }
    return total;
  }

  ExteriorTransport::Value checked(cplx lam) {
    auto v = eval(lam);
    if (v.relative_size < 1e-13 || v.value.is_zero()) fail(ErrorCode::BoundaryZero, "zero on a cell boundary");
    return v;
  }

  ExteriorTransport ext_;
  ComplexVector w_;
  long budget_;
  long evals_ = 0;
  bool trivial_ = false;
};

inline const double kSplitFractions[] = {0.5 + 0.0618034, 0.5 - 0.0381966, 0.5 + 0.1180340, 0.5 - 0.0901699};

}  // namespace detail

class SpectrumScanner {
 public:
  SpectrumScanner(const BoundaryProblem& p, long budget) : scan_(p, budget) {}

  Spectrum run(const Rect& region, int max_count) {
    Spectrum out;
    out.search_region = region;
    if (scan_.trivial()) return out;
    Rect outer = region;
    int count = 0;
    for (int attempt = 0;; ++attempt) {
      try {
        count = scan_.winding(outer);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BoundaryZero || attempt >= 4) throw;
        double j = 1e-3 * (attempt + 1) * std::max(1.0, outer.diameter());
        outer = {outer.re0 - 0.7 * j, outer.re1 + 0.3 * j, outer.im0 - 0.6 * j, outer.im1 + 0.4 * j};
      }
    }
    out.search_region = outer;
    out.total_count = count;
    if (count > max_count)
      fail(ErrorCode::BudgetExceeded, "region holds " + std::to_string(count) + " zeros, above max_count");
    if (count > 0) subdivide(outer, count, out, 0);
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](const Eigenvalue& x, const Eigenvalue& y) {
      if (x.value.real() != y.value.real()) return x.value.real() < y.value.real();
      return x.value.imag() < y.value.imag();
    });
    std::sort(out.completeness_certificate.begin(), out.completeness_certificate.end(),
              [](const CellCount& x, const CellCount& y) {
                if (x.cell.re0 != y.cell.re0) return x.cell.re0 < y.cell.re0;
                return x.cell.im0 < y.cell.im0;
              });
    if (out.size_with_multiplicity() != count)
      fail(ErrorCode::BoundaryZero, "located zeros do not match the winding count");
    out.evaluations = scan_.evaluations();
    return out;
  }

 private:
  // Newton on det M_lambda with multiplicity m; derivative by central differences of the
  // ratio f(lambda +- h) / f(lambda).
  std::optional<cplx> polish(cplx z, int m, const Rect& cell) {
    double last = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 60; ++it) {
      double h = 1e-6 * std::max(1.0, std::abs(z));
      auto f0 = scan_.eval(z);
      if (f0.value.is_zero()) break;
      auto fp = scan_.eval(z + h), fm = scan_.eval(z - h);
      cplx rp = (fp.value / f0.value).value(), rm = (fm.value / f0.value).value();
      cplx dlog = (rp - rm) / (2.0 * h);
      if (dlog == cplx(0.0) || !std::isfinite(dlog.real()) || !std::isfinite(dlog.imag())) break;
      cplx step = -static_cast<double>(m) / dlog;
      // Once steps stop contracting the iteration is at the noise floor of det M_lambda.
      if (last < 1e-6 * std::max(1.0, std::abs(z)) && std::abs(step) > 0.5 * last) break;
      z += step;
      last = std::abs(step);
      if (!cell.contains(z, 0.25 * cell.diameter())) return std::nullopt;
      if (last <= 4e-16 * std::max(1.0, std::abs(z))) break;
    }
    if (!cell.contains(z, 1e-9 * std::max(1.0, std::abs(z)))) return std::nullopt;
    return z;
  }

  void subdivide(const Rect& cell, int count, Spectrum& out, int depth) {
    if (depth > 200) fail(ErrorCode::BudgetExceeded, "subdivision depth exceeded");
    const double scale = std::max(1.0, std::abs(cell.center()));
    if (count == 1 || cell.diameter() < 1e-3 * scale) {
      if (auto z = polish(cell.center(), count, cell)) {
        std::optional<cplx> zc = count == 1 ? z : resolve_multiple(*z, count, cell);
        if (zc) {
          out.eigenvalues.push_back({*zc, count});
          out.completeness_certificate.push_back({cell, count});
          return;
        }
      }
      if (cell.diameter() < 1e-10 * scale) fail(ErrorCode::BudgetExceeded, "zero cluster could not be resolved");
    }
    bool vertical = cell.width() >= cell.height();
    for (double frac : detail::kSplitFractions) {
      Rect a = cell, b = cell;
      if (vertical) {
        double x = cell.re0 + frac * cell.width();
        a.re1 = x;
        b.re0 = x;
      } else {
        double y = cell.im0 + frac * cell.height();
        a.im1 = y;
        b.im0 = y;
      }
      int ca, cb;
      try {
        ca = scan_.winding(a);
        cb = scan_.winding(b);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::BoundaryZero) continue;
        throw;
      }
      if (ca + cb != count) continue;
      if (ca > 0) subdivide(a, ca, out, depth + 1);
      if (cb > 0) subdivide(b, cb, out, depth + 1);
      return;
    }
    fail(ErrorCode::BoundaryZero, "could not split a cell away from zeros");
  }

  // Checks the multiplicity on a small box around z and returns the cluster centroid
  // (1 / 2 pi i m) \oint lambda f'/f d lambda on the inscribed circle.
  std::optional<cplx> resolve_multiple(cplx z, int count, const Rect& cell) {
    // Large enough that |det M_lambda| on the box clears the rounding floor, which
    // for a multiple zero is reached only at a distance of order sqrt(eps).
    double r = std::min(0.25 * cell.diameter(), std::max(1e-4 * cell.diameter(), 1e-5 * std::max(1.0, std::abs(z))));
    Rect box{z.real() - r, z.real() + 1.13 * r, z.imag() - 0.91 * r, z.imag() + r};
    try {
      if (scan_.winding(box) != count) return std::nullopt;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BudgetExceeded) throw;
      return std::nullopt;
    }
    const int k = 64;
    const double rho = 0.5 * r, h = 0.05 * rho;
    cplx acc = 0.0;
    for (int j = 0; j < k; ++j) {
      cplx u = std::polar(rho, two_pi * j / k);
      cplx lam = z + u;
      auto f0 = scan_.eval(lam);
      auto fp = scan_.eval(lam + h), fm = scan_.eval(lam - h);
      cplx dlog = ((fp.value / f0.value).value() - (fm.value / f0.value).value()) / (2.0 * h);
      acc += u * u * dlog;
    }
    cplx c = z + acc / (static_cast<double>(k) * count);
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag()) || std::abs(c - z) > rho) return std::nullopt;
    return c;
  }

  detail::ZeroScanner scan_;
};

// Recognizes the builtin closed-form families from the problem data.
inline SpectralFamily classify_family(const BoundaryProblem& p) {
  const double b = p.op.beta;
  if (p.op == builtins::laplacian(b)) {
    const StiefelFrame d = builtins::dirichlet_frame();
    if (p.frame.m == d.m && p.frame.n_mat == d.n_mat) return DirichletFamily{b};
  }
  if (p.op == builtins::dirac(b) && p.frame.m.size() == 1 && p.frame.n_mat.size() == 1) {
    cplx m = p.frame.m(0, 0), n = p.frame.n_mat(0, 0);
    if (m != cplx(0.0) && std::abs(std::abs(n / m) - 1.0) < 1e-15) {
      double a = -std::arg(-n / m);
      if (a <= 0.0) a += two_pi;
      if (a > 0.0 && a < two_pi) return TwistedFamily{a, b};
    }
  }
  return std::monostate{};
}

inline Spectrum spectrum_scan(const BoundaryProblem& p, const Rect& region, int max_count = 10000,
                              long budget = 5000000) {
  SpectrumScanner s(p, budget);
  Spectrum out = s.run(region, max_count);
  out.family = classify_family(p);
  return out;
}

// Which real half-lines carry an infinite Weyl family to be completed by a tail.
struct TailOptions {
  bool positive = false;
  bool negative = false;

  static TailOptions none() { return {}; }
  static TailOptions semibounded() { return {true, false}; }
  static TailOptions two_sided() { return {true, true}; }
};

struct ZetaOracleResult {
  cplx zeta_zero;
  cplx zeta_prime_zero;
  cplx det;  // exp(-zeta'(0))
  bool closed_form = false;
  double tail_residual = 0.0;
  double accuracy_target = 1e-6;
};

namespace detail {

// |lambda_k|^{1/r} ~ c (k + d) + sum_i e_i / (k + d)^{2i-1}, k = 0, 1, ... over distinct
// eigenvalues.
struct TailModel {
  double c = 1, d = 0;
  std::vector<double> e;
  int multiplicity = 1;
  int next_index = 0;
  double residual = 0.0;
};

inline TailModel fit_tail_terms(const std::vector<double>& roots, int first, int use, int terms) {
  TailModel tm;
  // Linear least squares in (c d, c, e_i) for fixed d, iterated on d = (c d) / c.
  double d = 0.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd a(use, 2 + terms);
    Eigen::VectorXd y(use);
    for (int i = 0; i < use; ++i) {
      double k = first + i;
      double x = 1.0 / std::max(k + d, 1e-3);
      a(i, 0) = 1.0;
      a(i, 1) = k;
      for (int t = 0; t < terms; ++t) a(i, 2 + t) = std::pow(x, 2 * t + 1);
      y(i) = roots[first + i];
    }
    Eigen::VectorXd sol = a.colPivHouseholderQr().solve(y);
    tm.c = sol(1);
    tm.e.assign(sol.data() + 2, sol.data() + 2 + terms);
    tm.residual = (a * sol - y).cwiseAbs().maxCoeff() / y.cwiseAbs().maxCoeff();
    double dn = sol(0) / sol(1);
    bool done = std::abs(dn - d) < 1e-14 * std::max(1.0, std::abs(d));
    d = dn;
    if (done) break;
  }
  tm.d = d;
  return tm;
}

inline TailModel fit_tail(const std::vector<double>& roots, const std::vector<int>& mult) {
  const int n = static_cast<int>(roots.size());
  if (n < 4) fail(ErrorCode::TailFitPoor, "too few eigenvalues for a tail fit");
  const int use = std::min(n, std::max(8, n / 5));
  const int first = n - use;
  for (int k = first; k < n; ++k)
    if (mult[k] != mult.back()) fail(ErrorCode::TailFitPoor, "tail multiplicities are not uniform");
  // Correction terms are admitted one at a time while each cuts the residual a hundredfold.
  const int max_terms = std::clamp((use - 3) / 2, 0, 3);
  TailModel tm = fit_tail_terms(roots, first, use, 0);
  for (int t = 1; t <= max_terms; ++t) {
    TailModel next = fit_tail_terms(roots, first, use, t);
    if (!(next.residual < 1e-2 * tm.residual)) break;
    tm = next;
  }
  tm.next_index = n;
  tm.multiplicity = mult.back();
  if (!(tm.residual <= 1e-3) || !(tm.c > 0.0) || n + tm.d <= 0.5)
    fail(ErrorCode::TailFitPoor, "Weyl tail fit residual " + std::to_string(tm.residual));
  return tm;
}

constexpr int kSeriesDegree = 30;

// Coefficients in y = (k+d)^{-2} of log(1 + sum_i (e_i / c) y^i).
inline std::vector<double> log_series(const TailModel& tm) {
  std::vector<double> p(kSeriesDegree + 1, 0.0), l(kSeriesDegree + 1, 0.0);
  for (std::size_t i = 0; i < tm.e.size(); ++i) p[i + 1] = tm.e[i] / tm.c;
  // (1 + p) l' = p'
  for (int j = 1; j <= kSeriesDegree; ++j) {
    double acc = j * p[j];
    for (int i = 1; i < j; ++i) acc -= i * l[i] * p[j - i];
    l[j] = acc / j;
  }
  return l;
}

// Coefficients of exp(alpha * l(y)).
inline std::vector<cplx> exp_series(const std::vector<double>& l, cplx alpha) {
  std::vector<cplx> q(kSeriesDegree + 1, 0.0);
  q[0] = 1.0;
  // q' = alpha l' q
  for (int j = 1; j <= kSeriesDegree; ++j) {
    cplx acc = 0.0;
    for (int i = 1; i <= j; ++i) acc += static_cast<double>(i) * l[i] * q[j - i];
    q[j] = alpha * acc / static_cast<double>(j);
  }
  return q;
}

// sum_{k >= N} |lambda_k|^{-s} = c^{-rs} sum_j q_j zeta_H(rs + 2j, N + d).
inline cplx tail_zeta(const TailModel& tm, int r, cplx s) {
  const double a = tm.next_index + tm.d;
  const cplx x = -static_cast<double>(r) * s;
  auto q = exp_series(log_series(tm), x);
  cplx acc = 0.0;
  for (int j = 0; j <= kSeriesDegree; ++j) {
    if (j > 0 && q[j] == cplx(0.0)) continue;
    cplx term = q[j] * hurwitz_zeta(-x + 2.0 * j, a);
    acc += term;
    if (j > 0 && std::abs(term) < 1e-18 * std::max(1.0, std::abs(acc))) break;
  }
  return static_cast<double>(tm.multiplicity) * std::exp(x * std::log(tm.c)) * acc;
}

// Value and s-derivative of tail_zeta at s = 0.
inline std::pair<cplx, cplx> tail_zeta_at_zero(const TailModel& tm, int r) {
  const double a = tm.next_index + tm.d;
  cplx z0 = hurwitz_zeta(0.0, a);
  cplx dz0 = hurwitz_zeta_ds(0.0, a);
  auto l = log_series(tm);
  double corr = 0.0;
  for (int j = 1; j <= kSeriesDegree; ++j) {
    if (l[j] == 0.0) continue;
    double term = l[j] * hurwitz_zeta(2.0 * j, a).real();
    corr += term;
    if (std::abs(term) < 1e-18) break;
  }
  const double m = tm.multiplicity, rr = r;
  return {m * z0, m * rr * (-std::log(tm.c) * z0 + dz0 - corr)};
}

struct SignedGroups {
  std::vector<double> pos, neg;  // |lambda|^{1/r}, increasing
  std::vector<int> mpos, mneg;
};

inline SignedGroups signed_groups(const Spectrum& spec, int r) {
  SignedGroups g;
  for (const auto& e : spec.eigenvalues) {
    double v = e.value.real();
    if (v > 0) {
      g.pos.push_back(std::pow(v, 1.0 / r));
      g.mpos.push_back(e.multiplicity);
    } else if (v < 0) {
      g.neg.push_back(std::pow(-v, 1.0 / r));
      g.mneg.push_back(e.multiplicity);
    }
  }
  std::vector<size_t> idx(g.neg.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = idx.size() - 1 - i;
  std::vector<double> n2;
  std::vector<int> m2;
  for (size_t i : idx) {
    n2.push_back(g.neg[i]);
    m2.push_back(g.mneg[i]);
  }
  g.neg = n2;
  g.mneg = m2;
  return g;
}

// Dirichlet: zeta(s) = (beta/pi)^{2s} zeta_R(2s).
inline cplx dirichlet_zeta(const DirichletFamily& f, cplx s) {
  return std::exp(2.0 * s * std::log(f.beta / pi)) * hurwitz_zeta(2.0 * s, 1.0);
}

// Twisted: eigenvalues (2 pi / beta)(n + x), x = a / 2 pi, n in Z.
inline cplx twisted_zeta(const TwistedFamily& f, cplx s, const SpectralCut& cut) {
  const double x = f.a / two_pi;
  const double neg_arg = cut.arg(cplx(-1.0, 0.0));
  cplx scale = std::exp(-s * std::log(two_pi / f.beta));
  return scale * (hurwitz_zeta(s, x) + std::exp(-I_unit * s * neg_arg) * hurwitz_zeta(s, 1.0 - x));
}

}  // namespace detail

// zeta(s) = sum lambda^{-s} with the theta branch.
inline cplx zeta_from_spectrum(const Spectrum& spec, int weyl_order, cplx s,
                               const SpectralCut& cut = SpectralCut(pi), TailOptions tails = {}) {
  if (auto* df = std::get_if<DirichletFamily>(&spec.family)) return detail::dirichlet_zeta(*df, s);
  if (auto* tf = std::get_if<TwistedFamily>(&spec.family)) return detail::twisted_zeta(*tf, s, cut);
  if (spec.eigenvalues.empty()) fail(ErrorCode::TailFitPoor, "empty spectrum");
  cplx acc = 0.0;
  for (const auto& e : spec.eigenvalues) {
    if (cut.ray_distance(e.value) < 1e-10) fail(ErrorCode::SpectrumOnCut, "eigenvalue on the cut ray");
    acc += static_cast<double>(e.multiplicity) * std::exp(-s * cut.log(e.value));
  }
  auto g = detail::signed_groups(spec, weyl_order);
  if (tails.positive) acc += detail::tail_zeta(detail::fit_tail(g.pos, g.mpos), weyl_order, s);
  if (tails.negative) {
    cplx phase = std::exp(-I_unit * s * cut.arg(cplx(-1.0, 0.0)));
    acc += phase * detail::tail_zeta(detail::fit_tail(g.neg, g.mneg), weyl_order, s);
  }
  return acc;
}

inline ZetaOracleResult zeta_prime_at_zero(const Spectrum& spec, int weyl_order,
                                           const SpectralCut& cut = SpectralCut(pi), TailOptions tails = {}) {
  ZetaOracleResult out;
  const auto* df = std::get_if<DirichletFamily>(&spec.family);
  const auto* tf = std::get_if<TwistedFamily>(&spec.family);
  if (df) {
    double lb = std::log(df->beta / pi);
    cplx z0 = hurwitz_zeta(0.0, 1.0), dz0 = hurwitz_zeta_ds(0.0, 1.0);
    out.zeta_zero = z0;
    out.zeta_prime_zero = 2.0 * lb * z0 + 2.0 * dz0;
  } else if (tf) {
    double x = tf->a / two_pi;
    double lc = std::log(two_pi / tf->beta);
    double neg_arg = cut.arg(cplx(-1.0, 0.0));
    cplx zp = hurwitz_zeta(0.0, x), dzp = hurwitz_zeta_ds(0.0, x);
    cplx zn = hurwitz_zeta(0.0, 1.0 - x), dzn = hurwitz_zeta_ds(0.0, 1.0 - x);
    out.zeta_zero = zp + zn;
    out.zeta_prime_zero = -lc * (zp + zn) + dzp + dzn - I_unit * neg_arg * zn;
  }
  if (df || tf) {
    out.det = std::exp(-out.zeta_prime_zero);
    out.closed_form = true;
    return out;
  }
  if (spec.eigenvalues.empty()) fail(ErrorCode::TailFitPoor, "empty spectrum");
  out.zeta_zero = 0.0;
  out.zeta_prime_zero = 0.0;
  for (const auto& e : spec.eigenvalues) {
    if (cut.ray_distance(e.value) < 1e-10) fail(ErrorCode::SpectrumOnCut, "eigenvalue on the cut ray");
    out.zeta_zero += static_cast<double>(e.multiplicity);
    out.zeta_prime_zero -= static_cast<double>(e.multiplicity) * cut.log(e.value);
  }
  auto g = detail::signed_groups(spec, weyl_order);
  if (tails.positive) {
    auto tm = detail::fit_tail(g.pos, g.mpos);
    auto [t0, td] = detail::tail_zeta_at_zero(tm, weyl_order);
    out.zeta_zero += t0;
    out.zeta_prime_zero += td;
    out.tail_residual = std::max(out.tail_residual, tm.residual);
  }
  if (tails.negative) {
    // e^{-i s arg(-1)} T(s): derivative T'(0) - i arg(-1) T(0).
    auto tm = detail::fit_tail(g.neg, g.mneg);
    auto [t0, td] = detail::tail_zeta_at_zero(tm, weyl_order);
    out.zeta_zero += t0;
    out.zeta_prime_zero += td - I_unit * cut.arg(cplx(-1.0, 0.0)) * t0;
    out.tail_residual = std::max(out.tail_residual, tm.residual);
  }
  if (tails.positive || tails.negative) out.accuracy_target = 1e-3;
  out.det = std::exp(-out.zeta_prime_zero);
  return out;
}

// Drops the family tag so the generic head + tail path runs on the same data.
inline Spectrum without_family(Spectrum s) {
  s.family = std::monostate{};
  return s;
}

struct EtaOracleResult {
  double eta = 0.0;
  bool closed_form = false;
  double tail_residual = 0.0;
};

// eta(0) of sum sign(lambda)|lambda|^{-s}.
inline EtaOracleResult eta_from_spectrum(const Spectrum& spec, int weyl_order = 1, TailOptions tails = {}) {
  EtaOracleResult out;
  if (auto* tf = std::get_if<TwistedFamily>(&spec.family)) {
    double x = tf->a / two_pi;
    out.eta = (hurwitz_zeta(0.0, x) - hurwitz_zeta(0.0, 1.0 - x)).real();
    out.closed_form = true;
    return out;
  }
  for (const auto& e : spec.eigenvalues) {
    if (std::abs(e.value.imag()) > 1e-8 * std::max(1.0, std::abs(e.value)))
      fail(ErrorCode::NotHermitian, "eta oracle needs a real spectrum");
    double v = e.value.real();
    if (v > 0) out.eta += e.multiplicity;
    else if (v < 0) out.eta -= e.multiplicity;
  }
  auto g = detail::signed_groups(spec, weyl_order);
  if (tails.positive) {
    auto tm = detail::fit_tail(g.pos, g.mpos);
    out.eta += tm.multiplicity * hurwitz_zeta(0.0, tm.next_index + tm.d).real();
    out.tail_residual = std::max(out.tail_residual, tm.residual);
  }
  if (tails.negative) {
    auto tm = detail::fit_tail(g.neg, g.mneg);
    out.eta -= tm.multiplicity * hurwitz_zeta(0.0, tm.next_index + tm.d).real();
    out.tail_residual = std::max(out.tail_residual, tm.residual);
  }
  return out;
}

}  // namespace specdet
