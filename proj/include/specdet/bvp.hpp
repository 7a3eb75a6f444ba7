#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specdet/reglim.hpp"
#include "specdet/transport.hpp"

namespace specdet {

struct BoundaryProblem {
  OdeOperator op;
  StiefelFrame frame;
  SpectralCut cut{};
  RayPlan plan{};
  std::optional<Basis> basis_override;
  double stability_tol = 1e-6;
  Tolerance tol{};

  Basis basis(int order_factor = 1) const {
    return basis_override ? *basis_override : default_basis(op.order * order_factor);
  }
};

// Orthogonal projection onto the row space of [M N].
inline ComplexMatrix project_from_stiefel(const StiefelFrame& f) {
  ComplexMatrix mn = f.stacked();
  ComplexMatrix gram = mn * mn.adjoint();
  if (condition_number(gram) > 1e24) fail(ErrorCode::RankDeficient, "frame [M N] is rank deficient");
  return mn.adjoint() * gram.ldlt().solve(mn);
}

// Index rn - k of a k-row frame [M N] with M, N of width rn.
inline int index(const ComplexMatrix& m, const ComplexMatrix& n) {
  if (m.rows() != n.rows() || m.cols() != n.cols()) fail(ErrorCode::NonSquare, "M and N must have equal shape");
  ComplexMatrix mn(m.rows(), m.cols() + n.cols());
  mn << m, n;
  Eigen::JacobiSVD<ComplexMatrix> svd(mn);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-12 * sv(0)) ++rank;
  if (rank != m.rows()) fail(ErrorCode::RankDeficient, "frame rows are linearly dependent");
  return static_cast<int>(m.cols() - m.rows());
}

inline int index(const StiefelFrame& f) { return index(f.m, f.n_mat); }

// First radius where exponentially small boundary-layer terms sit below round-off.
inline double ray_start(const OdeOperator& op, const RayPlan& plan) {
  CompanionSystem sys(op);
  const int r = op.order;
  double gamma = std::numeric_limits<double>::infinity();
  double lower = 0.0;
  for (int k = 0; k <= 32; ++k) {
    double x = op.beta * k / 32.0;
    ComplexMatrix lead = op.leading().eval(x);
    double emax = 0.0;
    for (cplx e : eigenvalues(lead)) emax = std::max(emax, std::abs(e));
    gamma = std::min(gamma, std::pow(1.0 / emax, 1.0 / r));
    ComplexMatrix binv = sys.leading_inverse(x);
    for (int j = 0; j < r; ++j) {
      double nb = (binv * op.coefficients[j].eval(x)).operatorNorm();
      if (nb > 0.0) lower = std::max(lower, std::pow(nb, static_cast<double>(r) / (r - j)));
    }
  }
  double growth_floor = std::pow(36.0 / (op.beta * gamma), r);
  return std::max({plan.r0, growth_floor, 100.0 * lower});
}

struct BoundaryDeterminant {
  LogScaled scaled;
  cplx value;  // plain value, meaningful when representable
  bool representable = true;
  double relative_size = 1.0;
};

inline BoundaryDeterminant to_boundary_det(const ExteriorTransport::Value& v) {
  BoundaryDeterminant b;
  b.scaled = v.value;
  b.relative_size = v.relative_size;
  b.value = v.value.value();
  b.representable = std::isfinite(b.value.real()) && std::isfinite(b.value.imag());
  return b;
}

inline BoundaryDeterminant boundary_determinant(const BoundaryProblem& p, cplx lambda) {
  ExteriorTransport ext(CompanionSystem(p.op), p.tol);
  p.frame.validate(ext.system().dim());
  return to_boundary_det(ext.boundary_det(ext.frame_weights(p.frame), lambda, GrowthGauge::Dominant));
}

struct ZetaDetResult {
  cplx value;
  cplx det_at_zero;
  cplx lim_term;
  cplx zeta_zero;
  LimResult diagnostics;
  RayFit ray;
  double start_radius = 0.0;
  bool converged() const { return diagnostics.converged; }
};

namespace detail {

inline constexpr double kInvertibilityFloor = 1e-13;

inline RayFit ray_fit_or_cut(const std::function<LogScaled(cplx)>& fn, const RayPlan& plan, double direction,
                             double start, const Basis& basis, double tol) {
  try {
    return fit_along_ray(fn, plan, direction, start, basis, tol);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ZeroValue) fail(ErrorCode::SpectrumOnCut, e.what());
    throw;
  }
}

}  // namespace detail

inline ZetaDetResult zeta_det(const BoundaryProblem& p) {
  ExteriorTransport ext(CompanionSystem(p.op), p.tol);
  p.frame.validate(ext.system().dim());
  ComplexVector w = ext.frame_weights(p.frame);
  auto at0 = ext.boundary_det(w, 0.0, GrowthGauge::Dominant);
  if (at0.relative_size < detail::kInvertibilityFloor)
    fail(ErrorCode::NonInvertibleProblem, "det(M + N K) vanishes at lambda = 0");
  ZetaDetResult out;
  out.start_radius = ray_start(p.op, p.plan);
  out.ray = detail::ray_fit_or_cut(
      [&](cplx lam) { return ext.boundary_det(w, lam, GrowthGauge::Dominant).value; }, p.plan, p.cut.theta,
      out.start_radius, p.basis(), p.stability_tol);
  out.diagnostics = out.ray.lim;
  out.det_at_zero = at0.value.value();
  out.lim_term = out.diagnostics.lim_constant;
  out.zeta_zero = out.diagnostics.zeta_zero;
  out.value = std::exp(at0.value.principal_log() - out.lim_term);
  return out;
}

struct RelativeDetResult {
  cplx value;
  cplx ratio_at_zero;
  cplx lim_term;
  cplx zeta_zero;
  LimResult diagnostics;
  RayFit ray;
  double start_radius = 0.0;
  bool converged() const { return diagnostics.converged; }
};

namespace detail {

inline void require_shared_operator(const BoundaryProblem& p1, const BoundaryProblem& p2) {
  if (!(p1.op == p2.op)) fail(ErrorCode::NonSquare, "relative invariants need a shared operator");
}

// lambda -> det(M1 + N1 K) / det(M2 + N2 K) from one exterior propagation.
struct RatioSampler {
  ExteriorTransport ext;
  ComplexVector w1, w2;

  RatioSampler(const BoundaryProblem& p1, const BoundaryProblem& p2)
      : ext(CompanionSystem(p1.op), p1.tol) {
    p1.frame.validate(ext.system().dim());
    p2.frame.validate(ext.system().dim());
    w1 = ext.frame_weights(p1.frame);
    w2 = ext.frame_weights(p2.frame);
  }

  struct Pair {
    LogScaled ratio;
    double size1, size2;
  };

  Pair eval(cplx lambda) const {
    auto st = ext.propagate(lambda, GrowthGauge::Dominant);
    cplx m1 = (w1.array() * st.p.array()).sum();
    cplx m2 = (w2.array() * st.p.array()).sum();
    double s1 = (w1.array().abs() * st.p.array().abs()).sum();
    double s2 = (w2.array().abs() * st.p.array().abs()).sum();
    Pair out;
    out.size1 = s1 > 0 ? std::abs(m1) / s1 : 0.0;
    out.size2 = s2 > 0 ? std::abs(m2) / s2 : 0.0;
    if (out.size2 == 0.0 || m2 == cplx(0.0)) {
      out.ratio = {0.0, 0.0};
    } else {
      out.ratio = {0.0, m1 / m2};
    }
    if (out.size1 == 0.0) out.ratio.mantissa = 0.0;
    return out;
  }

  LogScaled ratio(cplx lambda) const {
    Pair p = eval(lambda);
    if (p.size2 < 1e-15) return {0.0, 0.0};  // eigenvalue of the second problem
    return p.ratio;
  }
};

}  // namespace detail

inline RelativeDetResult relative_zeta_det(const BoundaryProblem& p1, const BoundaryProblem& p2) {
  detail::require_shared_operator(p1, p2);
  detail::RatioSampler rs(p1, p2);
  auto at0 = rs.eval(0.0);
  if (at0.size1 < detail::kInvertibilityFloor || at0.size2 < detail::kInvertibilityFloor)
    fail(ErrorCode::NonInvertibleProblem, "a boundary determinant vanishes at lambda = 0");
  RelativeDetResult out;
  out.start_radius = ray_start(p1.op, p1.plan);
  out.ray = detail::ray_fit_or_cut([&](cplx lam) { return rs.ratio(lam); }, p1.plan, p1.cut.theta,
                                   out.start_radius, p1.basis(), p1.stability_tol);
  out.diagnostics = out.ray.lim;
  out.ratio_at_zero = at0.ratio.mantissa;
  out.lim_term = out.diagnostics.lim_constant;
  out.zeta_zero = out.diagnostics.zeta_zero;
  out.value = std::exp(std::log(out.ratio_at_zero) - out.lim_term);
  return out;
}

struct SquaredFitResult {
  cplx zeta_sq_zero;
  cplx lim_constant;  // LIM along theta = pi of log S_{lambda^{1/2}} + log S_{-lambda^{1/2}}
  LimResult diagnostics;
  RayFit ray;
  bool converged() const { return diagnostics.converged; }
};

namespace detail {

inline Basis squared_basis(const BoundaryProblem& p) {
  return p.basis_override ? *p.basis_override : default_basis(2 * p.op.order);
}

inline std::function<LogScaled(cplx)> ratio_fn(const RatioSampler& rs) {
  return [&rs](cplx lam) { return rs.ratio(lam); };
}

template <class F>
auto cut_errors(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ZeroValue) fail(ErrorCode::SpectrumOnCut, e.what());
    throw;
  }
}

}  // namespace detail

inline SquaredFitResult squared_fit(const BoundaryProblem& p1, const BoundaryProblem& p2) {
  detail::require_shared_operator(p1, p2);
  detail::RatioSampler rs(p1, p2);
  SquaredFitResult out;
  out.ray = detail::cut_errors([&] {
    return squared_ray_fit(detail::ratio_fn(rs), p1.plan, ray_start(p1.op, p1.plan), detail::squared_basis(p1),
                           p1.stability_tol);
  });
  out.diagnostics = out.ray.lim;
  out.zeta_sq_zero = out.diagnostics.zeta_zero;
  out.lim_constant = out.diagnostics.lim_constant;
  return out;
}

struct SquaredDetResult {
  double value;           // |S_0|^2 exp(-LIM log|S_{+-i alpha}|^2)
  double value_from_phi;  // |S_0|^2 exp(-LIM^pi Phi), the same quantity through the squared fit
  double ray_asymmetry;   // | LIM log|S_{-i alpha}|^2 - LIM log|S_{+i alpha}|^2 |
  cplx zeta_sq_zero;
  EtaPipeline pipeline;
  bool converged() const { return pipeline.converged; }
};

inline SquaredDetResult relative_det_squared(const BoundaryProblem& p1, const BoundaryProblem& p2) {
  detail::require_shared_operator(p1, p2);
  detail::RatioSampler rs(p1, p2);
  auto at0 = rs.eval(0.0);
  if (at0.size1 < detail::kInvertibilityFloor || at0.size2 < detail::kInvertibilityFloor)
    fail(ErrorCode::NonInvertibleProblem, "a boundary determinant vanishes at lambda = 0");
  SquaredDetResult out;
  out.pipeline = detail::cut_errors([&] {
    return eta_pipeline(detail::ratio_fn(rs), p1.plan, ray_start(p1.op, p1.plan), p1.basis(),
                        detail::squared_basis(p1), p1.stability_tol);
  });
  double s0 = std::norm(at0.ratio.mantissa);
  double lm = 2.0 * out.pipeline.c_minus.real(), lp = 2.0 * out.pipeline.c_plus.real();
  out.ray_asymmetry = std::abs(lm - lp);
  out.value = s0 * std::exp(-0.5 * (lm + lp));
  out.value_from_phi = s0 * std::exp(-out.pipeline.squared.lim.lim_constant.real());
  out.zeta_sq_zero = out.pipeline.zeta_sq_zero;
  return out;
}

struct EtaResult {
  double eta_rel_mod2;    // 2 eta-tilde, representative in [-1, 1)
  double eta_tilde_mod1;  // representative in [-1/2, 1/2)
  cplx zeta_sq_zero;
  cplx ray_limits[2];     // constants along -i alpha and +i alpha
  double imag_residual;   // non-real part of the eta-tilde estimate
  bool converged;
  EtaPipeline pipeline;
};

inline EtaResult eta_result(const EtaPipeline& pl) {
  EtaResult out;
  out.pipeline = pl;
  out.zeta_sq_zero = pl.zeta_sq_zero;
  out.ray_limits[0] = pl.c_minus;
  out.ray_limits[1] = pl.c_plus;
  out.imag_residual = std::abs(pl.eta_tilde.imag());
  out.eta_rel_mod2 = wrap_symmetric(2.0 * pl.eta_tilde.real(), 2.0);
  if (out.eta_rel_mod2 >= 1.0) out.eta_rel_mod2 -= 2.0;
  out.eta_tilde_mod1 = wrap_symmetric(pl.eta_tilde.real(), 1.0);
  out.converged = pl.converged && out.imag_residual < 1e-6;
  return out;
}

inline EtaResult relative_eta(const BoundaryProblem& p1, const BoundaryProblem& p2) {
  detail::require_shared_operator(p1, p2);
  detail::RatioSampler rs(p1, p2);
  return eta_result(eta_pipeline(detail::ratio_fn(rs), p1.plan, ray_start(p1.op, p1.plan), p1.basis(),
                                 detail::squared_basis(p1), p1.stability_tol));
}

// D*D for D = A d/dx + B.
inline OdeOperator induced_laplacian(const OdeOperator& d) {
  if (d.order != 1) fail(ErrorCode::NonSquare, "induced Laplacian needs a first-order operator");
  const MatrixPolynomial& a = d.coefficients[1];
  const MatrixPolynomial& b = d.coefficients[0];
  MatrixPolynomial as = a.adjoint(), bs = b.adjoint();
  MatrixPolynomial da = a.derivative(), db = b.derivative(), das = as.derivative();
  OdeOperator out;
  out.order = 2;
  out.rank = d.rank;
  out.beta = d.beta;
  out.label = d.label.empty() ? "induced_laplacian" : d.label + "*" + d.label;
  out.coefficients = {-(as * db) + bs * b - das * b, -(as * da) - as * b + bs * a - das * a, -(as * a)};
  return out;
}

// Frame of D*D on Cauchy data (psi, psi'): the original rows on psi plus the
// adjoint condition on (D psi(0), D psi(beta)). The adjoint rows are (sigma V)^*
// with V spanning ker[M N] and sigma = diag(A(0), -A(beta)) from Green's formula.
inline StiefelFrame induced_frame(const OdeOperator& d, const StiefelFrame& f) {
  const Eigen::Index n = d.rank;
  ComplexMatrix mn = f.stacked();
  Eigen::FullPivLU<ComplexMatrix> lu(mn);
  ComplexMatrix v = lu.kernel();
  if (v.cols() != n) fail(ErrorCode::RankDeficient, "frame kernel has wrong dimension");
  v = Eigen::HouseholderQR<ComplexMatrix>(v).householderQ() * ComplexMatrix::Identity(2 * n, n);
  ComplexMatrix a0 = d.coefficients[1].eval(0.0), ab = d.coefficients[1].eval(d.beta);
  ComplexMatrix b0 = d.coefficients[0].eval(0.0), bb = d.coefficients[0].eval(d.beta);
  ComplexMatrix sigma = ComplexMatrix::Zero(2 * n, 2 * n);
  sigma.topLeftCorner(n, n) = a0;
  sigma.bottomRightCorner(n, n) = -ab;
  ComplexMatrix adj = (sigma * v).adjoint();
  ComplexMatrix f0 = adj.leftCols(n), fb = adj.rightCols(n);
  StiefelFrame out{ComplexMatrix::Zero(2 * n, 2 * n), ComplexMatrix::Zero(2 * n, 2 * n)};
  out.m.topLeftCorner(n, n) = f.m;
  out.n_mat.topLeftCorner(n, n) = f.n_mat;
  out.m.bottomLeftCorner(n, n) = f0 * b0;
  out.m.bottomRightCorner(n, n) = f0 * a0;
  out.n_mat.bottomLeftCorner(n, n) = fb * bb;
  out.n_mat.bottomRightCorner(n, n) = fb * ab;
  return out;
}

enum class GraphGauge { BoundaryFactor, CauchyData };

inline const char* gauge_name(GraphGauge g) {
  return g == GraphGauge::BoundaryFactor ? "E0" : "H(D)";
}

namespace detail {

inline ComplexMatrix orthonormal_columns(const ComplexMatrix& a) {
  Eigen::HouseholderQR<ComplexMatrix> qr(a);
  return qr.householderQ() * ComplexMatrix::Identity(a.rows(), a.cols());
}

inline ComplexMatrix orthogonal_complement(const ComplexMatrix& u) {
  Eigen::HouseholderQR<ComplexMatrix> qr(u);
  ComplexMatrix q = qr.householderQ();
  return q.rightCols(u.rows() - u.cols());
}

// det(Q^{-1}(I + T* K)(I + K* T)) with T* = M^{-1}N over E0.
inline cplx graph_factor_e0(const StiefelFrame& f, const ComplexMatrix& k) {
  const Eigen::Index n = f.m.rows();
  ComplexMatrix ts = f.m.partialPivLu().solve(f.n_mat);
  ComplexMatrix t = ts.adjoint();
  ComplexMatrix q = ComplexMatrix::Identity(n, n) + ts * t;
  ComplexMatrix id = ComplexMatrix::Identity(n, n);
  return det(q.partialPivLu().solve((id + ts * k) * (id + k.adjoint() * t)));
}

// Same quantity in the H(D) gauge where K = 0: det(Q^{-1}) for the graph of ran P over H(D).
inline cplx graph_factor_hd(const StiefelFrame& f, const ComplexMatrix& e, const ComplexMatrix& eperp) {
  ComplexMatrix w = f.stacked().adjoint();
  ComplexMatrix a = e.adjoint() * w, b = eperp.adjoint() * w;
  if (condition_number(a) > 1e12)
    fail(ErrorCode::GraphCoordinateUnavailable, "range of P is not a graph over H(D)");
  ComplexMatrix t = b * a.partialPivLu().inverse();
  ComplexMatrix q = ComplexMatrix::Identity(t.cols(), t.cols()) + t.adjoint() * t;
  return 1.0 / det(q);
}

}  // namespace detail

struct TheoremAResult {
  cplx lhs;
  cplx rhs;
  double gap;
  GraphGauge gauge;
  RelativeDetResult lhs_detail;
  bool converged() const { return lhs_detail.converged(); }
};

inline cplx theorem_a_rhs(const OdeOperator& d, const StiefelFrame& f1, const StiefelFrame& f2,
                          GraphGauge* used = nullptr, std::optional<GraphGauge> force = std::nullopt) {
  TransportEvaluator ev(CompanionSystem(d), 0.0);
  ComplexMatrix k = ev.transport(d.beta);
  bool e0_ok = condition_number(f1.m) < 1e12 && condition_number(f2.m) < 1e12;
  GraphGauge g = force ? *force : (e0_ok ? GraphGauge::BoundaryFactor : GraphGauge::CauchyData);
  if (g == GraphGauge::BoundaryFactor && !e0_ok)
    fail(ErrorCode::GraphCoordinateUnavailable, "M is singular, range of P is not a graph over E0");
  if (used) *used = g;
  if (g == GraphGauge::BoundaryFactor) return detail::graph_factor_e0(f1, k) / detail::graph_factor_e0(f2, k);
  const Eigen::Index n = k.rows();
  ComplexMatrix gk(2 * n, n);
  gk << ComplexMatrix::Identity(n, n), k;
  ComplexMatrix e = detail::orthonormal_columns(gk);
  ComplexMatrix eperp = detail::orthogonal_complement(e);
  return detail::graph_factor_hd(f1, e, eperp) / detail::graph_factor_hd(f2, e, eperp);
}

inline TheoremAResult theorem_a_check(const BoundaryProblem& p1, const BoundaryProblem& p2) {
  detail::require_shared_operator(p1, p2);
  if (p1.op.order != 1) fail(ErrorCode::NonSquare, "Theorem A check needs a first-order operator");
  OdeOperator lap = induced_laplacian(p1.op);
  BoundaryProblem q1{lap, induced_frame(p1.op, p1.frame), SpectralCut(pi), p1.plan, std::nullopt,
                     p1.stability_tol, p1.tol};
  BoundaryProblem q2 = q1;
  q2.frame = induced_frame(p2.op, p2.frame);
  TheoremAResult out;
  out.lhs_detail = relative_zeta_det(q1, q2);
  out.lhs = out.lhs_detail.value;
  out.rhs = theorem_a_rhs(p1.op, p1.frame, p2.frame, &out.gauge);
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

}  // namespace specdet
