#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "specdet/findim.hpp"
#include "specdet/oracle.hpp"
#include "specdet/problem_file.hpp"

namespace specdet::cli {

inline constexpr const char* kVersion = "1.0.0";

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline json cj(cplx z) { return json::array({z.real(), z.imag()}); }

inline json model_json(const ExpansionModel& m) {
  json terms = json::array();
  for (std::size_t k = 0; k < m.exponents.size(); ++k)
    terms.push_back({{"exponent", m.exponents[k]}, {"coefficient", cj(m.coefficients[k])}});
  return {{"terms", terms},
          {"c_log", cj(m.c_log)},
          {"c_const", cj(m.c_const)},
          {"include_log", m.include_log},
          {"residual_norm", m.residual_norm},
          {"condition", m.condition},
          {"direction", m.direction}};
}

inline json lim_json(const LimResult& l) {
  return {{"zeta_zero", cj(l.zeta_zero)},
          {"lim_constant", cj(l.lim_constant)},
          {"stability", l.stability},
          {"tolerance", l.tolerance},
          {"converged", l.converged},
          {"model", model_json(l.model)}};
}

inline json ray_json(const RayFit& r) {
  return {{"direction", r.direction},
          {"samples", r.radii.size()},
          {"first_radius", r.radii.empty() ? 0.0 : r.radii.front()},
          {"last_radius", r.radii.empty() ? 0.0 : r.radii.back()},
          {"refinements", r.refinements},
          {"refit", model_json(r.refit)},
          {"lim", lim_json(r.lim)}};
}

inline json pipeline_json(const EtaPipeline& p) {
  return {{"c_minus", cj(p.c_minus)},
          {"c_plus", cj(p.c_plus)},
          {"zeta_sq_zero", cj(p.zeta_sq_zero)},
          {"eta_tilde", cj(p.eta_tilde)},
          {"converged", p.converged},
          {"minus", ray_json(p.minus)},
          {"plus", ray_json(p.plus)},
          {"squared", ray_json(p.squared)}};
}

inline json branch_json(const SpectralCut& cut, double direction) {
  return {{"theta", cut.theta}, {"ray_direction", direction}, {"arg_minus_lambda_on_ray", direction - pi}};
}

struct Outcome {
  json results = json::object();
  json diagnostics = json::object();
  json expected = json::object();
  bool unconverged = false;
  std::optional<std::uint64_t> seed;
  std::string csv;  // set when the command emits CSV instead of JSON
};

namespace detail {

inline std::optional<double> twisted_eta_expectation(const NamedFrame& f1, const NamedFrame& f2) {
  if (!f1.twist || !f2.twist) return std::nullopt;
  double v = wrap_symmetric((*f2.twist - *f1.twist) / pi, 2.0);
  return v;
}

inline std::optional<double> twisted_sq_expectation(const NamedFrame& f1, const NamedFrame& f2) {
  if (!f1.twist || !f2.twist) return std::nullopt;
  return std::norm(1.0 - std::polar(1.0, -*f1.twist)) / std::norm(1.0 - std::polar(1.0, -*f2.twist));
}

inline Outcome zetadet_outcome(const ProblemFile& pf, const std::string& frame, const ZetaDetResult& r) {
  Outcome o;
  o.results = {{"value", cj(r.value)},
               {"det_at_zero", cj(r.det_at_zero)},
               {"lim_term", cj(r.lim_term)},
               {"zeta_zero", cj(r.zeta_zero)}};
  o.diagnostics = {{"start_radius", r.start_radius},
                   {"ray", ray_json(r.ray)},
                   {"branch", branch_json(pf.cut, r.ray.direction)}};
  o.unconverged = !r.converged();
  if (auto e = pf.frame(frame).expected) o.expected = {{"value", cj(*e)}};
  return o;
}

inline Outcome cmd_zetadet(const ProblemFile& pf, const std::string& frame) {
  return zetadet_outcome(pf, frame, zeta_det(pf.problem(frame)));
}

inline Outcome cmd_reldet(const ProblemFile& pf, const std::string& f1, const std::string& f2) {
  Outcome o;
  auto r = relative_zeta_det(pf.problem(f1), pf.problem(f2));
  o.results = {{"value", cj(r.value)},
               {"ratio_at_zero", cj(r.ratio_at_zero)},
               {"lim_term", cj(r.lim_term)},
               {"zeta_zero", cj(r.zeta_zero)}};
  o.diagnostics = {{"start_radius", r.start_radius},
                   {"ray", ray_json(r.ray)},
                   {"branch", branch_json(pf.cut, r.ray.direction)}};
  o.unconverged = !r.converged();
  auto e1 = pf.frame(f1).expected, e2 = pf.frame(f2).expected;
  if (e1 && e2) o.expected = {{"value", cj(*e1 / *e2)}};
  return o;
}

inline Outcome cmd_eta(const ProblemFile& pf, const std::string& f1, const std::string& f2) {
  Outcome o;
  auto r = relative_eta(pf.problem(f1), pf.problem(f2));
  o.results = {{"eta_rel_mod2", r.eta_rel_mod2},
               {"eta_tilde_mod1", r.eta_tilde_mod1},
               {"zeta_sq_zero", cj(r.zeta_sq_zero)}};
  o.diagnostics = {{"ray_limits", json::array({cj(r.ray_limits[0]), cj(r.ray_limits[1])})},
                   {"imag_residual", r.imag_residual},
                   {"pipeline", pipeline_json(r.pipeline)}};
  o.unconverged = !r.converged;
  if (auto e = twisted_eta_expectation(pf.frame(f1), pf.frame(f2))) o.expected = {{"eta_rel_mod2", *e}};
  return o;
}

inline Outcome cmd_sqdet(const ProblemFile& pf, const std::string& f1, const std::string& f2) {
  Outcome o;
  auto r = relative_det_squared(pf.problem(f1), pf.problem(f2));
  o.results = {{"value", r.value}, {"value_from_phi", r.value_from_phi}, {"zeta_sq_zero", cj(r.zeta_sq_zero)}};
  o.diagnostics = {{"ray_asymmetry", r.ray_asymmetry}, {"pipeline", pipeline_json(r.pipeline)}};
  o.unconverged = !r.converged();
  if (auto e = twisted_sq_expectation(pf.frame(f1), pf.frame(f2))) o.expected = {{"value", *e}};
  return o;
}

inline Outcome cmd_thma(const ProblemFile& pf, const std::string& f1, const std::string& f2) {
  Outcome o;
  auto r = theorem_a_check(pf.problem(f1), pf.problem(f2));
  o.results = {{"lhs", cj(r.lhs)}, {"rhs", cj(r.rhs)}, {"gap", r.gap}};
  o.diagnostics = {{"graph_gauge", r.gauge == GraphGauge::BoundaryFactor ? "E0" : "H(D)"},
                   {"lhs_ratio_at_zero", cj(r.lhs_detail.ratio_at_zero)},
                   {"lhs_ray", ray_json(r.lhs_detail.ray)}};
  o.unconverged = !r.converged();
  if (auto e = twisted_sq_expectation(pf.frame(f1), pf.frame(f2))) o.expected = {{"lhs", cj(*e)}};
  return o;
}

inline Outcome cmd_spectrum(const ProblemFile& pf, const std::string& frame, const std::vector<double>& region,
                            int max_count) {
  Outcome o;
  Rect rect{region[0], region[1], region[2], region[3]};
  if (!(rect.re0 < rect.re1) || !(rect.im0 < rect.im1)) throw ParseError("--region", "expected a < b and c < d");
  auto p = pf.problem(frame);
  Spectrum sp = spectrum_scan(p, rect, max_count);
  json ev = json::array(), cert = json::array();
  for (const auto& e : sp.eigenvalues) ev.push_back({{"value", cj(e.value)}, {"multiplicity", e.multiplicity}});
  for (const auto& c : sp.completeness_certificate)
    cert.push_back({{"cell", {c.cell.re0, c.cell.re1, c.cell.im0, c.cell.im1}}, {"count", c.count}});
  const auto& reg = sp.search_region;
  o.results = {{"eigenvalues", ev}, {"count", sp.size_with_multiplicity()}};
  o.diagnostics = {{"search_region", {reg.re0, reg.re1, reg.im0, reg.im1}},
                   {"winding_total", sp.total_count},
                   {"completeness_certificate", cert},
                   {"evaluations", sp.evaluations}};
  // Spectral zeta/eta oracle values where the family or the data allows them.
  json oracle = json::object();
  TailOptions tails = p.op.order % 2 == 0 ? TailOptions::semibounded() : TailOptions::two_sided();
  try {
    auto z = zeta_prime_at_zero(sp, p.op.order, pf.cut, tails);
    oracle["zeta_zero"] = cj(z.zeta_zero);
    oracle["det"] = cj(z.det);
    oracle["closed_form"] = z.closed_form;
    oracle["accuracy_target"] = z.accuracy_target;
    oracle["tail_residual"] = z.tail_residual;
  } catch (const Error& e) {
    oracle["zeta_unavailable"] = e.what();
  }
  try {
    auto et = eta_from_spectrum(sp, p.op.order, tails);
    oracle["eta"] = et.eta;
  } catch (const Error& e) {
    oracle["eta_unavailable"] = e.what();
  }
  o.diagnostics["oracle"] = oracle;
  if (std::holds_alternative<DirichletFamily>(sp.family) && reg.im0 < 0.0 && reg.im1 > 0.0 &&
      reg.re0 < std::pow(pi / p.op.beta, 2)) {
    o.expected = {{"weyl_count", static_cast<int>(std::floor(p.op.beta * std::sqrt(std::max(reg.re1, 0.0)) / pi))}};
  }
  return o;
}

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Outcome cmd_fitdiag(const ProblemFile& pf, const std::string& frame, bool csv) {
  auto p = pf.problem(frame);
  auto r = zeta_det(p);
  Outcome o = zetadet_outcome(pf, frame, r);
  const RayFit& ray = r.ray;
  const std::size_t n = static_cast<std::size_t>(p.plan.count);
  const std::size_t shift = static_cast<std::size_t>(p.plan.window_shift());
  auto window = [&](std::size_t i) {
    bool a = i < n, b = i >= shift;
    return a && b ? "both" : a ? "main" : "shifted";
  };
  json samples = json::array();
  for (std::size_t i = 0; i < ray.radii.size(); ++i)
    samples.push_back({{"r", ray.radii[i]},
                       {"lambda", cj(ray.lambdas[i])},
                       {"log_scale", cj(ray.values[i].log_scale)},
                       {"mantissa", cj(ray.values[i].mantissa)},
                       {"log", cj(ray.logs[i])},
                       {"window", window(i)}});
  o.results["samples"] = samples;
  o.results["model"] = model_json(ray.model);
  if (csv) {
    std::ostringstream os;
    os << "kind,index,window,r,lambda_re,lambda_im,log_re,log_im,term,exponent,coef_re,coef_im\n";
    for (std::size_t i = 0; i < ray.radii.size(); ++i)
      os << "sample," << i << "," << window(i) << "," << csv_number(ray.radii[i]) << ","
         << csv_number(ray.lambdas[i].real()) << "," << csv_number(ray.lambdas[i].imag()) << ","
         << csv_number(ray.logs[i].real()) << "," << csv_number(ray.logs[i].imag()) << ",,,,\n";
    const auto& m = ray.model;
    for (std::size_t k = 0; k < m.exponents.size(); ++k)
      os << "coef," << k << ",,,,,,,power," << csv_number(m.exponents[k]) << ","
         << csv_number(m.coefficients[k].real()) << "," << csv_number(m.coefficients[k].imag()) << "\n";
    if (m.include_log)
      os << "coef,,,,,,,,log,," << csv_number(m.c_log.real()) << "," << csv_number(m.c_log.imag()) << "\n";
    os << "coef,,,,,,,,const,," << csv_number(m.c_const.real()) << "," << csv_number(m.c_const.imag()) << "\n";
    os << "meta,,,,,,,,direction,," << csv_number(m.direction) << ",0\n";
    o.csv = os.str();
  }
  return o;
}

inline ComplexMatrix random_matrix(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = {nd(rng), nd(rng)};
  return a;
}

inline Outcome cmd_matrixlab(const json& j) {
  using namespace detail;
  check_keys(j, "", {"schema_version", "cut", "ray_plan", "cases"});
  parse_schema_version(j);
  SpectralCut cut(pi);
  if (j.contains("cut")) {
    check_keys(j["cut"], "cut", {"theta"});
    cut = SpectralCut(number(member(j["cut"], "cut", "theta"), "cut.theta"));
  }
  RayPlan plan;
  if (j.contains("ray_plan")) parse_plan(j["ray_plan"], "ray_plan", plan);
  const json& cases = member(j, "", "cases");
  if (!cases.is_array()) throw ParseError("cases", "expected an array");
  // Parse everything before computing so malformed input never yields partial work.
  struct Case {
    std::string kind;
    std::vector<ComplexMatrix> m;
  };
  std::vector<Case> todo;
  Outcome o;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const std::string cp = at_index("cases", k);
    const json& c = cases[k];
    require_object(c, cp);
    const json& kind = member(c, cp, "kind");
    if (!kind.is_string()) throw ParseError(join(cp, "kind"), "expected a string");
    Case cs{kind.get<std::string>(), {}};
    auto sq = [&](const char* key) { return square_matrix(member(c, cp, key), join(cp, key)); };
    if (cs.kind == "zetadet") {
      check_keys(c, cp, {"kind", "a"});
      cs.m = {sq("a")};
    } else if (cs.kind == "multiplicativity") {
      check_keys(c, cp, {"kind", "a", "q"});
      cs.m = {sq("a"), sq("q")};
    } else if (cs.kind == "heat") {
      check_keys(c, cp, {"kind", "a1", "a2"});
      cs.m = {sq("a1"), sq("a2")};
    } else if (cs.kind == "eta") {
      check_keys(c, cp, {"kind", "q1", "q2"});
      cs.m = {sq("q1"), sq("q2")};
    } else if (cs.kind == "random_multiplicativity") {
      check_keys(c, cp, {"kind", "seed", "dim", "count", "w_norm"});
      auto seed = static_cast<std::uint64_t>(integer(member(c, cp, "seed"), join(cp, "seed")));
      int dim = integer(member(c, cp, "dim"), join(cp, "dim"));
      int count = integer(member(c, cp, "count"), join(cp, "count"));
      double wn = number_or(c, cp, "w_norm", 0.2);
      if (dim < 1 || dim > 64) throw ParseError(join(cp, "dim"), "must lie in [1, 64]");
      if (count < 1 || count > 1000) throw ParseError(join(cp, "count"), "must lie in [1, 1000]");
      o.seed = seed;
      std::mt19937_64 rng(seed);
      for (int t = 0; t < count; ++t) {
        ComplexMatrix a = random_matrix(rng, dim) + 2.0 * std::sqrt(static_cast<double>(dim)) *
                                                        ComplexMatrix::Identity(dim, dim);
        ComplexMatrix w = random_matrix(rng, dim);
        w *= wn / Eigen::JacobiSVD<ComplexMatrix>(w).singularValues()(0);
        todo.push_back({"multiplicativity", {a, ComplexMatrix::Identity(dim, dim) + w}});
      }
      continue;
    } else {
      throw ParseError(join(cp, "kind"), "unknown case kind '" + cs.kind + "'");
    }
    for (std::size_t i = 1; i < cs.m.size(); ++i)
      if (cs.m[i].rows() != cs.m[0].rows()) throw ParseError(cp, "matrices differ in size");
    todo.push_back(std::move(cs));
  }
  json out = json::array();
  for (const auto& cs : todo) {
    json r = {{"kind", cs.kind}};
    try {
      if (cs.kind == "zetadet") {
        auto z = zeta_det_matrix(cs.m[0], cut);
        json br = json::array();
        for (const auto& b : z.branches)
          br.push_back({{"eigenvalue", cj(b.eigenvalue)}, {"arg", b.arg}, {"winding", b.winding}});
        r["value"] = cj(z.value);
        r["log_value"] = cj(z.log_value);
        r["branches"] = br;
      } else if (cs.kind == "multiplicativity") {
        auto s = relative_det_via_scattering(cs.m[0], cs.m[1], cut, plan);
        r["value"] = cj(s.value);
        r["det_q"] = cj(det(cs.m[1]));
        r["lim_constant"] = cj(s.lim_constant);
        r["zeta_zero"] = cj(s.zeta_zero);
        r["diagnostics"] = lim_json(s.diagnostics);
        o.unconverged |= !s.converged();
      } else if (cs.kind == "heat") {
        auto h = heat_relative_det(cs.m[0], cs.m[1], plan);
        r["value"] = cj(h.value);
        r["zeta_value"] = cj(h.zeta_value);
        r["pipeline_value"] = cj(h.pipeline_value);
        r["det_ratio"] = cj(det(cs.m[0]) / det(cs.m[1]));
        r["zeta_rel_zero"] = cj(h.zeta_rel_zero);
        r["gamma_prime_one"] = h.gamma_prime_one;
        r["diagnostics"] = lim_json(h.diagnostics);
        o.unconverged |= !h.converged();
      } else {
        auto e = relative_eta_matrix(cs.m[0], cs.m[1]);
        auto pl = relative_eta_matrix_pipeline(cs.m[0], cs.m[1], plan);
        r["eta"] = e.eta;
        r["eta_tilde"] = e.eta_tilde;
        r["kernel_dims"] = {e.kernel1, e.kernel2};
        r["pipeline_eta_tilde_mod1"] = wrap_symmetric(pl.eta_tilde.real(), 1.0);
        r["pipeline"] = pipeline_json(pl);
        o.unconverged |= !pl.converged;
      }
    } catch (const Error& e) {
      r["error"] = {{"code", e.name()}, {"message", e.what()}};
    }
    out.push_back(r);
  }
  o.results = {{"cases", out}};
  return o;
}

}  // namespace detail

inline json compose_report(const std::string& command, const std::vector<std::string>& argv,
                           const std::string& digest, const Outcome& o, double ms) {
  json rep;
  rep["command"] = command;
  rep["argv"] = argv;
  rep["inputs_digest"] = digest;
  rep["results"] = o.results;
  rep["diagnostics"] = o.diagnostics;
  if (!o.expected.empty()) rep["expected"] = o.expected;
  rep["unconverged"] = o.unconverged;
  rep["provenance"] = {{"tool", "specdet"},
                       {"version", kVersion},
                       {"seed", o.seed ? json(*o.seed) : json(nullptr)},
                       {"timing_ms", ms}};
  return rep;
}

// Entry point. Exit codes: 0 success (possibly unconverged), 2 malformed input, 3 numeric failure.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"zeta-regularized determinants and eta invariants of 1-D boundary problems", "specdet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string file, frame;
  std::vector<std::string> pair;
  std::vector<double> region;
  int max_count = 10000;
  bool csv = false;

  auto with_file = [&](CLI::App* sub) { sub->add_option("file", file, "problem file (JSON)")->required(); };
  auto* zetadet = app.add_subcommand("zetadet", "zeta determinant of one boundary problem");
  auto* reldet = app.add_subcommand("reldet", "relative zeta determinant of two frames");
  auto* eta = app.add_subcommand("eta", "relative eta invariant of two frames");
  auto* sqdet = app.add_subcommand("sqdet", "relative determinant of the squared operators");
  auto* thma = app.add_subcommand("thma", "both sides of the squared-determinant boundary formula");
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues inside a rectangle");
  auto* fitdiag = app.add_subcommand("fitdiag", "raw ray samples and fitted expansion");
  auto* matrixlab = app.add_subcommand("matrixlab", "finite-dimensional checks");
  for (auto* s : {zetadet, reldet, eta, sqdet, thma, spectrum, fitdiag, matrixlab}) with_file(s);
  for (auto* s : {zetadet, spectrum, fitdiag}) s->add_option("--frame", frame, "frame name");
  for (auto* s : {reldet, eta, sqdet, thma})
    s->add_option("--frames", pair, "two frame names")->expected(2)->required();
  spectrum->add_option("--region", region, "re_min re_max im_min im_max")->expected(4)->required();
  spectrum->add_option("--max-count", max_count, "largest admissible zero count");
  fitdiag->add_flag("--csv", csv, "emit CSV instead of JSON");

  std::vector<std::string> argv_full{"specdet"};
  argv_full.insert(argv_full.end(), args.begin(), args.end());
  std::vector<char*> cargs;
  for (auto& a : argv_full) cargs.push_back(a.data());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  std::string digest;
  try {
    const std::string text = read_file(file);
    // File contents plus the arguments, with the file path itself left out.
    std::string argstr;
    for (std::size_t i = 1; i < args.size(); ++i) {
      argstr += args[i] == file ? std::string("<file>") : args[i];
      argstr += '\0';
    }
    digest = hex64(fnv1a(argstr, fnv1a(text + '\0' + command)));
    const json doc = parse_json_text(text, file);
    if (command == "matrixlab") {
      o = detail::cmd_matrixlab(doc);
    } else {
      ProblemFile pf = parse_problem(doc);
      const std::string f = frame.empty() ? pf.default_frame : frame;
      if (!frame.empty()) pf.frame(frame);
      for (const auto& name : pair) pf.frame(name);
      if (command == "zetadet") o = detail::cmd_zetadet(pf, f);
      else if (command == "reldet") o = detail::cmd_reldet(pf, pair[0], pair[1]);
      else if (command == "eta") o = detail::cmd_eta(pf, pair[0], pair[1]);
      else if (command == "sqdet") o = detail::cmd_sqdet(pf, pair[0], pair[1]);
      else if (command == "thma") o = detail::cmd_thma(pf, pair[0], pair[1]);
      else if (command == "spectrum") o = detail::cmd_spectrum(pf, f, region, max_count);
      else o = detail::cmd_fitdiag(pf, f, csv);
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    json rep = compose_report(command, args, digest, o, ms);
    rep["error"] = {{"code", e.name()}, {"message", e.what()}};
    err << "error: " << e.what() << "\n";
    out << rep.dump(2) << "\n";
    return 3;
  }
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!o.csv.empty()) {
    out << o.csv;
  } else {
    out << compose_report(command, args, digest, o, ms).dump(2) << "\n";
  }
  out.flush();
  return 0;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::ostringstream out, err;
  int code = run(args, out, err);
  std::cout << out.str() << std::flush;
  std::cerr << err.str() << std::flush;
  return code;
}

}  // namespace specdet::cli
