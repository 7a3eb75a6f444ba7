#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "specdet/numerics.hpp"

namespace specdet {

// exp(log_scale) * mantissa. Only the mantissa phase is ever unwrapped; log_scale
// is assumed to vary continuously with the sample parameter.
struct LogScaled {
  cplx log_scale = 0.0;
  cplx mantissa = 1.0;

  static LogScaled from_value(cplx v) { return {0.0, v}; }

  cplx value() const { return std::exp(log_scale) * mantissa; }
  cplx principal_log() const { return log_scale + std::log(mantissa); }
  bool is_zero() const { return mantissa == cplx(0.0) || std::abs(mantissa) < 1e-300; }

  LogScaled operator*(const LogScaled& o) const { return {log_scale + o.log_scale, mantissa * o.mantissa}; }
  LogScaled operator/(const LogScaled& o) const { return {log_scale - o.log_scale, mantissa / o.mantissa}; }
};

struct RayPlan {
  SpectralCut cut{};
  double r0 = 10.0;
  double ratio = 1.3;
  int count = 48;
  int refinement_cap = 8;

  std::vector<double> radii(double start, int n) const {
    std::vector<double> r(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) r[k] = start * std::pow(ratio, k);
    return r;
  }

  // Extra samples needed so the refit window starts at twice the first radius.
  int window_shift() const { return std::max(1, static_cast<int>(std::ceil(std::log(2.0) / std::log(ratio) - 1e-12))); }

  void validate() const {
    if (!(r0 > 0.0) || !(ratio > 1.0) || count < 8 || refinement_cap < 0)
      fail(ErrorCode::InsufficientSamples, "ray plan needs r0 > 0, ratio > 1, count >= 8");
  }
};

struct Basis {
  std::vector<double> exponents;
  bool include_log = true;

  std::size_t size() const { return exponents.size() + (include_log ? 1 : 0) + 1; }
};

// Powers k/r for k = -j_tail..r without 0, plus the log term.
inline Basis default_basis(int order, int j_tail = 4) {
  Basis b;
  for (int k = -j_tail; k <= order; ++k)
    if (k != 0) b.exponents.push_back(static_cast<double>(k) / order);
  b.include_log = true;
  return b;
}

struct ExpansionModel {
  std::vector<double> exponents;
  bool include_log = true;
  std::vector<cplx> coefficients;  // one per exponent, in the (-lambda)^e normalization
  cplx c_log = 0.0;
  cplx c_const = 0.0;
  double residual_norm = 0.0;
  double condition = 1.0;
  double direction = pi;  // ray angle theta' the model was fitted on

  cplx evaluate(cplx lambda) const {
    cplx ml = -lambda;
    cplx logml(std::log(std::abs(ml)), std::arg(ml));
    cplx v = c_const;
    if (include_log) v += c_log * logml;
    for (std::size_t k = 0; k < exponents.size(); ++k) v += coefficients[k] * std::exp(exponents[k] * logml);
    return v;
  }

  cplx coefficient(double e) const {
    for (std::size_t k = 0; k < exponents.size(); ++k)
      if (std::abs(exponents[k] - e) < 1e-12) return coefficients[k];
    return 0.0;
  }
};

struct LimResult {
  cplx zeta_zero = 0.0;
  cplx lim_constant = 0.0;
  ExpansionModel model;
  double stability = 0.0;
  double tolerance = 1e-6;
  bool converged = true;

  const LimResult& require_converged() const {
    if (!converged)
      fail(ErrorCode::Unconverged, "constant-term drift " + std::to_string(stability) + " exceeds " +
                                       std::to_string(tolerance));
    return *this;
  }
};

inline std::vector<cplx> track_log(const std::vector<cplx>& values) {
  std::vector<cplx> out;
  out.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] == cplx(0.0)) fail(ErrorCode::ZeroValue, "zero value at sample " + std::to_string(k));
    if (k == 0) {
      out.push_back(std::log(values[0]));
    } else {
      cplx step = std::log(values[k] / values[k - 1]);
      if (std::abs(std::abs(step.imag()) - pi) < 1e-12)
        fail(ErrorCode::PhaseJumpUnresolved, "phase step of pi at sample " + std::to_string(k));
      out.push_back(cplx(std::log(std::abs(values[k])), out.back().imag() + step.imag()));
    }
  }
  return out;
}

inline std::vector<cplx> track_log(const std::vector<LogScaled>& values) {
  std::vector<cplx> out;
  out.reserve(values.size());
  double phase = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k].is_zero()) fail(ErrorCode::ZeroValue, "zero value at sample " + std::to_string(k));
    if (k == 0) {
      phase = std::arg(values[0].mantissa);
    } else {
      double step = std::arg(values[k].mantissa / values[k - 1].mantissa);
      if (std::abs(std::abs(step) - pi) < 1e-12)
        fail(ErrorCode::PhaseJumpUnresolved, "phase step of pi at sample " + std::to_string(k));
      phase += step;
    }
    out.push_back(values[k].log_scale + cplx(std::log(std::abs(values[k].mantissa)), phase));
  }
  return out;
}

inline int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("SPECDET_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return std::min(v, 256);
  }
  return hw;
}

// Evaluates fn(0..n-1) on up to worker_count() threads; the first failing index rethrows.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errs(n);
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  auto body = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

inline ExpansionModel fit_expansion(const std::vector<cplx>& logs, const std::vector<double>& radii,
                                    const Basis& basis, double direction = pi) {
  const std::size_t m = logs.size();
  const std::size_t p = basis.size();
  if (radii.size() != m) fail(ErrorCode::InsufficientSamples, "radii and logs differ in length");
  if (m < p + 4)
    fail(ErrorCode::InsufficientSamples,
         "need at least " + std::to_string(p + 4) + " samples, got " + std::to_string(m));
  for (double e : basis.exponents)
    if (e == 0.0) fail(ErrorCode::IllConditioned, "exponent 0 duplicates the constant slot");

  // Extended precision keeps the solve well below the round-off already in the data.
  using ld = long double;
  using MatrixL = Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorL = Eigen::Matrix<ld, Eigen::Dynamic, 1>;
  MatrixL design(m, p);
  for (std::size_t i = 0; i < m; ++i) {
    const ld r = radii[i];
    std::size_t c = 0;
    for (double e : basis.exponents) design(i, c++) = std::pow(r, static_cast<ld>(e));
    if (basis.include_log) design(i, c++) = std::log(r);
    design(i, c) = 1.0L;
  }
  const VectorL colscale_l = design.colwise().norm().transpose();
  for (std::size_t c = 0; c < p; ++c) design.col(c) /= colscale_l(c);

  Eigen::JacobiSVD<MatrixL> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = static_cast<double>(sv(0) / sv(sv.size() - 1));
  if (!(cond <= 1e10)) fail(ErrorCode::IllConditioned, "design condition number " + std::to_string(cond));

  VectorL yr(m), yi(m);
  for (std::size_t i = 0; i < m; ++i) {
    yr(i) = logs[i].real();
    yi(i) = logs[i].imag();
  }
  VectorL drl = svd.solve(yr), dil = svd.solve(yi);
  drl += svd.solve(VectorL(yr - design * drl));
  dil += svd.solve(VectorL(yi - design * dil));
  const VectorL fr = design * drl, fi = design * dil;
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    ss += static_cast<double>((yr(i) - fr(i)) * (yr(i) - fr(i)) + (yi(i) - fi(i)) * (yi(i) - fi(i)));
  const Eigen::VectorXd dr = drl.cast<double>(), di = dil.cast<double>(), colscale = colscale_l.cast<double>();

  ExpansionModel model;
  model.exponents = basis.exponents;
  model.include_log = basis.include_log;
  model.direction = direction;
  model.condition = cond;
  model.residual_norm = std::sqrt(ss / static_cast<double>(m));
  const double phi = direction - pi;  // arg(-lambda) on the ray
  std::size_t c = 0;
  for (double e : basis.exponents) {
    cplx d(dr(c) / colscale(c), di(c) / colscale(c));
    model.coefficients.push_back(d * std::polar(1.0, -e * phi));
    ++c;
  }
  cplx dlog = 0.0;
  if (basis.include_log) {
    dlog = cplx(dr(c) / colscale(c), di(c) / colscale(c));
    ++c;
  }
  cplx d1(dr(c) / colscale(c), di(c) / colscale(c));
  model.c_log = dlog;
  model.c_const = d1 - I_unit * phi * dlog;
  return model;
}

inline LimResult assess_limit(const ExpansionModel& model, const ExpansionModel& refit, double tolerance = 1e-6) {
  LimResult out;
  out.model = model;
  out.zeta_zero = model.c_log;
  out.lim_constant = model.c_const;
  out.stability = std::abs(model.c_const - refit.c_const);
  out.tolerance = tolerance;
  out.converged = out.stability <= tolerance;
  return out;
}

inline LimResult regularized_limit(const ExpansionModel& model, const ExpansionModel& refit,
                                   double tolerance = 1e-6) {
  LimResult out = assess_limit(model, refit, tolerance);
  out.require_converged();
  return out;
}

// Everything recorded along one ray; the fit uses the planned radii only,
// refinement samples serve phase tracking.
struct RayFit {
  double direction = pi;
  std::vector<double> radii;
  std::vector<cplx> lambdas;
  std::vector<LogScaled> values;
  std::vector<cplx> logs;
  int refinements = 0;
  ExpansionModel model;
  ExpansionModel refit;
  LimResult lim;
};

struct TrackedRay {
  std::vector<double> radii;
  std::vector<LogScaled> values;
  std::vector<cplx> logs;
  int refinements = 0;
};

// Samples fn at the given radii, inserting geometric midpoints wherever the
// mantissa phase moves by pi/2 or more, then unwraps.
inline TrackedRay sample_and_track(const std::function<LogScaled(double)>& fn, const std::vector<double>& radii,
                                   int refinement_cap) {
  std::vector<LogScaled> vals = parallel_map<LogScaled>(radii.size(), [&](std::size_t i) { return fn(radii[i]); });
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i].is_zero())
      fail(ErrorCode::ZeroValue, "value vanishes at radius " + std::to_string(radii[i]));

  struct Node {
    double r;
    LogScaled v;
    bool planned;
  };
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < radii.size(); ++i) nodes.push_back({radii[i], vals[i], true});

  int refinements = 0;
  for (int level = 0;; ++level) {
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      double step = std::abs(std::arg(nodes[i + 1].v.mantissa / nodes[i].v.mantissa));
      if (step >= pi / 2) bad.push_back(i);
    }
    if (bad.empty()) break;
    if (level >= refinement_cap)
      fail(ErrorCode::PhaseJumpUnresolved,
           "phase jump near radius " + std::to_string(nodes[bad.front()].r) + " after " +
               std::to_string(refinement_cap) + " refinements");
    std::vector<double> mids;
    for (std::size_t i : bad) mids.push_back(std::sqrt(nodes[i].r * nodes[i + 1].r));
    std::vector<LogScaled> mv = parallel_map<LogScaled>(mids.size(), [&](std::size_t i) { return fn(mids[i]); });
    for (std::size_t i = 0; i < mids.size(); ++i)
      if (mv[i].is_zero()) fail(ErrorCode::ZeroValue, "value vanishes at radius " + std::to_string(mids[i]));
    std::vector<Node> merged;
    std::size_t b = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      merged.push_back(nodes[i]);
      if (b < bad.size() && bad[b] == i) {
        merged.push_back({mids[b], mv[b], false});
        ++b;
      }
    }
    nodes.swap(merged);
    refinements += static_cast<int>(mids.size());
  }

  std::vector<LogScaled> all;
  for (const auto& n : nodes) all.push_back(n.v);
  std::vector<cplx> logs_all = track_log(all);
  TrackedRay out;
  out.refinements = refinements;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].planned) continue;
    out.radii.push_back(nodes[i].r);
    out.values.push_back(nodes[i].v);
    out.logs.push_back(logs_all[i]);
  }
  return out;
}

inline RayFit fit_tracked(TrackedRay tracked, const RayPlan& plan, double direction, const Basis& basis,
                          double tolerance) {
  const int shift = plan.window_shift();
  RayFit out;
  out.direction = direction;
  out.radii = std::move(tracked.radii);
  out.values = std::move(tracked.values);
  out.logs = std::move(tracked.logs);
  out.refinements = tracked.refinements;
  for (double r : out.radii) out.lambdas.push_back(r * std::polar(1.0, direction));
  const auto n = static_cast<std::size_t>(plan.count);
  std::vector<double> r1(out.radii.begin(), out.radii.begin() + n);
  std::vector<cplx> l1(out.logs.begin(), out.logs.begin() + n);
  std::vector<double> r2(out.radii.begin() + shift, out.radii.begin() + shift + n);
  std::vector<cplx> l2(out.logs.begin() + shift, out.logs.begin() + shift + n);
  out.model = fit_expansion(l1, r1, basis, direction);
  out.refit = fit_expansion(l2, r2, basis, direction);
  out.lim = assess_limit(out.model, out.refit, tolerance);
  return out;
}

// Full ray pipeline for fn(lambda) sampled at lambda = r e^{i direction}, r >= start.
inline RayFit fit_along_ray(const std::function<LogScaled(cplx)>& fn, const RayPlan& plan, double direction,
                            double start, const Basis& basis, double tolerance = 1e-6) {
  plan.validate();
  const int shift = plan.window_shift();
  std::vector<double> radii = plan.radii(start, plan.count + shift);
  const cplx dir = std::polar(1.0, direction);
  TrackedRay tracked =
      sample_and_track([&](double r) { return fn(r * dir); }, radii, plan.refinement_cap);
  return fit_tracked(std::move(tracked), plan, direction, basis, tolerance);
}

// Constant term in the radius variable: the model constant plus the log(-lambda) phase.
inline cplx radial_constant(const ExpansionModel& m) {
  return m.c_const + I_unit * (m.direction - pi) * m.c_log;
}

inline double wrap_symmetric(double x, double period) {
  double r = std::fmod(x + 0.5 * period, period);
  if (r < 0) r += period;
  return r - 0.5 * period;
}

// Scattering data for a self-adjoint pair: fits of log S along lambda = -i alpha and
// +i alpha, and of Phi(lambda) = log S_{lambda^{1/2}} + log S_{-lambda^{1/2}} along theta = pi.
struct EtaPipeline {
  RayFit minus;
  RayFit plus;
  cplx c_minus = 0.0, c_plus = 0.0;
  RayFit squared;
  cplx zeta_sq_zero = 0.0;
  cplx eta_tilde = 0.0;
  bool converged = true;
};

inline RayFit squared_ray_fit(const std::function<LogScaled(cplx)>& s, const RayPlan& plan, double alpha_start,
                              const Basis& basis_t, double tolerance) {
  plan.validate();
  const int shift = plan.window_shift();
  std::vector<double> t = plan.radii(std::max(plan.r0, alpha_start * alpha_start), plan.count + shift);
  std::vector<double> alpha;
  for (double v : t) alpha.push_back(std::sqrt(v));
  TrackedRay lo = sample_and_track([&](double a) { return s(cplx(0.0, -a)); }, alpha, plan.refinement_cap);
  TrackedRay hi = sample_and_track([&](double a) { return s(cplx(0.0, a)); }, alpha, plan.refinement_cap);
  TrackedRay sum;
  sum.radii = t;
  for (std::size_t k = 0; k < t.size(); ++k) {
    sum.values.push_back(lo.values[k] * hi.values[k]);
    sum.logs.push_back(lo.logs[k] + hi.logs[k]);
  }
  sum.refinements = lo.refinements + hi.refinements;
  return fit_tracked(std::move(sum), plan, pi, basis_t, tolerance);
}

inline EtaPipeline eta_pipeline(const std::function<LogScaled(cplx)>& s, const RayPlan& plan, double alpha_start,
                                const Basis& basis_alpha, const Basis& basis_t, double tolerance) {
  EtaPipeline out;
  out.minus = fit_along_ray(s, plan, 1.5 * pi, alpha_start, basis_alpha, tolerance);
  out.plus = fit_along_ray(s, plan, 0.5 * pi, alpha_start, basis_alpha, tolerance);
  out.c_minus = radial_constant(out.minus.model);
  out.c_plus = radial_constant(out.plus.model);
  out.squared = squared_ray_fit(s, plan, alpha_start, basis_t, tolerance);
  out.zeta_sq_zero = out.squared.lim.zeta_zero;
  out.eta_tilde = (out.c_minus - out.c_plus) / (two_pi * I_unit) + 0.5 * out.zeta_sq_zero;
  out.converged = out.minus.lim.converged && out.plus.lim.converged && out.squared.lim.converged;
  return out;
}

}  // namespace specdet
