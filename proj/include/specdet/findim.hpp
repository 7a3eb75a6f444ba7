#pragma once

#include <vector>

#include "specdet/reglim.hpp"

namespace specdet {

struct MatrixPair {
  ComplexMatrix a1;
  ComplexMatrix a2;
  SpectralCut cut{};
};

struct BranchEntry {
  cplx eigenvalue;
  double arg;   // arg_theta of the eigenvalue
  int winding;  // arg = principal arg + 2 pi winding
};

struct MatrixZetaDet {
  cplx value;
  cplx log_value;
  std::vector<BranchEntry> branches;
};

namespace detail {

inline void require_off_cut(const std::vector<cplx>& ev, const SpectralCut& cut, const char* what) {
  for (cplx z : ev)
    if (cut.ray_distance(z) < 1e-10)
      fail(ErrorCode::SpectrumOnCut, std::string(what) + " has an eigenvalue on the cut ray");
}

inline double spectral_scale(const ComplexMatrix& m) {
  return Eigen::JacobiSVD<ComplexMatrix>(m).singularValues()(0);
}

}  // namespace detail

// exp(sum_i log_theta(lambda_i)).
inline MatrixZetaDet zeta_det_matrix(const ComplexMatrix& a, const SpectralCut& cut) {
  require_square(a, "zeta_det_matrix");
  auto ev = eigenvalues(a);
  detail::require_off_cut(ev, cut, "matrix");
  MatrixZetaDet out;
  out.log_value = 0.0;
  for (cplx z : ev) {
    double arg = cut.arg(z);
    int wind = static_cast<int>(std::lround((arg - std::arg(z)) / two_pi));
    out.branches.push_back({z, arg, wind});
    out.log_value += cplx(std::log(std::abs(z)), arg);
  }
  out.value = std::exp(out.log_value);
  return out;
}

struct ScatteringDetResult {
  cplx value;     // det_F(S_0) exp(-LIM)
  cplx det_s0;    // det(a^{-1} a q) = det q
  cplx lim_constant;
  cplx zeta_zero;
  LimResult diagnostics;
  RayFit ray;
  double start_radius = 0.0;
  bool converged() const { return diagnostics.converged; }
};

// Pipeline on lambda -> det((a - lambda)^{-1}(a q - lambda)).
inline ScatteringDetResult relative_det_via_scattering(const ComplexMatrix& a, const ComplexMatrix& q,
                                                       const SpectralCut& cut, const RayPlan& plan = {},
                                                       double tolerance = 1e-6) {
  require_square(a, "a");
  require_square(q, "q");
  if (a.rows() != q.rows()) fail(ErrorCode::NonSquare, "a and q differ in size");
  const ComplexMatrix aq = a * q;
  detail::require_off_cut(eigenvalues(a), cut, "a");
  detail::require_off_cut(eigenvalues(aq), cut, "a q");
  const Eigen::Index n = a.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  auto s = [&](cplx lam) -> LogScaled {
    ComplexMatrix x = (a - lam * id).partialPivLu().solve(aq - lam * id);
    return LogScaled::from_value(det(x));
  };
  ScatteringDetResult out;
  LogScaled s0 = s(0.0);
  if (s0.is_zero()) fail(ErrorCode::NonInvertibleProblem, "a q is singular");
  out.det_s0 = s0.mantissa;
  out.start_radius = std::max(plan.r0, 100.0 * std::max(detail::spectral_scale(a), detail::spectral_scale(aq)));
  try {
    out.ray = fit_along_ray(s, plan, cut.theta, out.start_radius, default_basis(1), tolerance);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ZeroValue) fail(ErrorCode::SpectrumOnCut, e.what());
    throw;
  }
  out.diagnostics = out.ray.lim;
  out.lim_constant = out.diagnostics.lim_constant;
  out.zeta_zero = out.diagnostics.zeta_zero;
  out.value = std::exp(std::log(out.det_s0) - out.lim_constant);
  return out;
}

struct HeatDetResult {
  cplx value;            // exp of the heat-regularized relative log determinant
  cplx log_value;
  cplx zeta_rel_zero;    // coefficient of -log epsilon
  double gamma_prime_one;
  cplx zeta_value;       // value * exp(zeta_rel(0) Gamma'(1))
  cplx pipeline_value;   // relative_det_via_scattering(a2, a2^{-1} a1)
  LimResult diagnostics;
  bool converged() const { return diagnostics.converged; }
};

namespace detail {

inline std::vector<double> positive_spectrum(const ComplexMatrix& a, const char* what) {
  require_square(a, what);
  if (!is_hermitian(a)) fail(ErrorCode::NotPositiveDefinite, std::string(what) + " is not Hermitian");
  auto ev = hermitian_eigenvalues(a);
  for (double v : ev)
    if (!(v > 0.0)) fail(ErrorCode::NotPositiveDefinite, std::string(what) + " has a non-positive eigenvalue");
  return ev;
}

}  // namespace detail

// LIM_{eps -> 0} of -int_eps^infty t^{-1} Tr(e^{-t a1} - e^{-t a2}) dt, eigenvalue-wise through E1.
inline HeatDetResult heat_relative_det(const ComplexMatrix& a1, const ComplexMatrix& a2, const RayPlan& plan = {},
                                       double tolerance = 1e-6) {
  auto e1 = detail::positive_spectrum(a1, "a1");
  auto e2 = detail::positive_spectrum(a2, "a2");
  if (a1.rows() != a2.rows()) fail(ErrorCode::NonSquare, "a1 and a2 differ in size");
  double top = 0.0;
  for (double v : e1) top = std::max(top, v);
  for (double v : e2) top = std::max(top, v);
  // Sample epsilon = 1/r along the positive reals; log epsilon = -log r.
  auto f = [&](cplx lam) -> LogScaled {
    double eps = 1.0 / std::abs(lam);
    double acc = 0.0;
    for (double v : e1) acc -= expint_e1(eps * v);
    for (double v : e2) acc += expint_e1(eps * v);
    return {cplx(acc, 0.0), 1.0};
  };
  RayFit fit = fit_along_ray(f, plan, pi, std::max(plan.r0, 100.0 * top), default_basis(1), tolerance);
  HeatDetResult out;
  out.diagnostics = fit.lim;
  out.log_value = fit.lim.lim_constant;
  out.value = std::exp(out.log_value);
  out.zeta_rel_zero = -fit.lim.zeta_zero;
  out.gamma_prime_one = digamma(1.0);
  out.zeta_value = out.value * std::exp(out.zeta_rel_zero * out.gamma_prime_one);
  ComplexMatrix q = a2.partialPivLu().solve(a1);
  out.pipeline_value = relative_det_via_scattering(a2, q, SpectralCut(pi), plan, tolerance).value;
  return out;
}

struct MatrixEtaResult {
  int eta = 0;          // signature difference
  int eta_tilde = 0;    // (eta + dim ker q1 - dim ker q2) / 2
  int kernel1 = 0, kernel2 = 0;
  bool integral = true;
};

inline MatrixEtaResult relative_eta_matrix(const ComplexMatrix& q1, const ComplexMatrix& q2) {
  require_square(q1, "q1");
  require_square(q2, "q2");
  if (q1.rows() != q2.rows()) fail(ErrorCode::NonSquare, "q1 and q2 differ in size");
  if (!is_hermitian(q1)) fail(ErrorCode::NotHermitian, "q1 is not Hermitian");
  if (!is_hermitian(q2)) fail(ErrorCode::NotHermitian, "q2 is not Hermitian");
  auto count = [](const ComplexMatrix& q, int& pos, int& neg, int& ker) {
    double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    pos = neg = ker = 0;
    for (double v : hermitian_eigenvalues(q)) {
      if (std::abs(v) <= 1e-12 * scale) ++ker;
      else if (v > 0) ++pos;
      else ++neg;
    }
  };
  int p1, n1, k1, p2, n2, k2;
  count(q1, p1, n1, k1);
  count(q2, p2, n2, k2);
  MatrixEtaResult out;
  out.eta = (p1 - n1) - (p2 - n2);
  out.kernel1 = k1;
  out.kernel2 = k2;
  int twice = out.eta + k1 - k2;
  out.integral = (twice % 2 == 0);
  if (!out.integral) fail(ErrorCode::NotHermitian, "relative eta-tilde is not an integer");
  out.eta_tilde = twice / 2;
  return out;
}

// The scattering eta pipeline applied to S_mu = (q2 - mu)^{-1}(q1 - mu).
inline EtaPipeline relative_eta_matrix_pipeline(const ComplexMatrix& q1, const ComplexMatrix& q2,
                                                const RayPlan& plan = {}, double tolerance = 1e-6) {
  relative_eta_matrix(q1, q2);
  const Eigen::Index n = q1.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  auto s = [&](cplx mu) -> LogScaled {
    ComplexMatrix x = (q2 - mu * id).partialPivLu().solve(q1 - mu * id);
    return LogScaled::from_value(det(x));
  };
  double start = std::max(plan.r0, 100.0 * std::max(detail::spectral_scale(q1), detail::spectral_scale(q2)));
  return eta_pipeline(s, plan, start, default_basis(1), default_basis(2), tolerance);
}

}  // namespace specdet
