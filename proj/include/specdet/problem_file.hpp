#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "specdet/builtins.hpp"

namespace specdet::cli {

using json = nlohmann::json;

// Malformed input; reported with exit code 2.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline std::string at_index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  require_object(j, path);
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ParseError(join(path, it.key()), "unknown key");
}

inline const json& member(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(join(path, key), "missing required key");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(path, "expected a finite number");
  return v;
}

inline int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<int>();
}

inline double number_or(const json& j, const std::string& path, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, join(path, key));
}

inline cplx complex_value(const json& j, const std::string& path) {
  if (j.is_number()) return number(j, path);
  if (!j.is_array() || j.size() != 2) throw ParseError(path, "expected a complex number [re, im]");
  return {number(j[0], at_index(path, 0)), number(j[1], at_index(path, 1))};
}

inline ComplexMatrix matrix(const json& j, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array()) throw ParseError(path, "expected a matrix as an array of rows");
  auto r = static_cast<Eigen::Index>(j.size());
  Eigen::Index c = r > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array()) throw ParseError(at_index(path, i), "expected a row array");
    if (static_cast<Eigen::Index>(j[i].size()) != c) throw ParseError(at_index(path, i), "ragged matrix rows");
  }
  if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols) || r == 0 || c == 0) {
    std::ostringstream os;
    os << "expected a " << (rows >= 0 ? std::to_string(rows) : "k") << "x"
       << (cols >= 0 ? std::to_string(cols) : "k") << " matrix, got " << r << "x" << c;
    throw ParseError(path, os.str());
  }
  ComplexMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k)
      m(i, k) = complex_value(j[i][k], at_index(at_index(path, i), k));
  return m;
}

// Square complex matrix of any size.
inline ComplexMatrix square_matrix(const json& j, const std::string& path) {
  ComplexMatrix m = matrix(j, path, -1, -1);
  if (m.rows() != m.cols()) throw ParseError(path, "expected a square matrix");
  return m;
}

}  // namespace detail

struct NamedFrame {
  StiefelFrame frame;
  std::optional<cplx> expected;  // closed-form zeta determinant when known
  std::optional<double> twist;   // a for twisted first-order frames
};

struct ProblemFile {
  int schema_version = 1;
  OdeOperator op;
  std::string builtin;  // empty for explicit operators
  std::map<std::string, NamedFrame> frames;
  std::string default_frame;
  SpectralCut cut{};
  RayPlan plan{};
  std::optional<Basis> basis;
  double stability_tol = 1e-6;
  Tolerance tol{};

  BoundaryProblem problem(const std::string& frame_name) const {
    auto it = frames.find(frame_name);
    if (it == frames.end()) throw ParseError("--frame", "no frame named '" + frame_name + "'");
    RayPlan p = plan;
    p.cut = cut;
    return BoundaryProblem{op, it->second.frame, cut, p, basis, stability_tol, tol};
  }

  const NamedFrame& frame(const std::string& name) const {
    auto it = frames.find(name);
    if (it == frames.end()) throw ParseError("--frame", "no frame named '" + name + "'");
    return it->second;
  }
};

namespace detail {

inline MatrixPolynomial polynomial(const json& j, const std::string& path, int rank) {
  if (!j.is_array() || j.empty()) throw ParseError(path, "expected a polynomial as a non-empty array of matrices");
  MatrixPolynomial p;
  for (std::size_t k = 0; k < j.size(); ++k) p.coeffs.push_back(matrix(j[k], at_index(path, k), rank, rank));
  return p;
}

inline void parse_operator(const json& j, const std::string& path, ProblemFile& pf) {
  require_object(j, path);
  if (j.contains("builtin")) {
    const json& b = j["builtin"];
    if (!b.is_string()) throw ParseError(join(path, "builtin"), "expected a string");
    pf.builtin = b.get<std::string>();
    const double beta = number_or(j, path, "beta", 1.0);
    if (!(beta > 0.0)) throw ParseError(join(path, "beta"), "must be positive");
    auto add = [&](const std::string& name, StiefelFrame f, std::optional<cplx> expected,
                   std::optional<double> twist = std::nullopt) {
      pf.frames[name] = NamedFrame{std::move(f), expected, twist};
    };
    if (pf.builtin == "dirichlet_laplacian" || pf.builtin == "antiperiodic_laplacian" ||
        pf.builtin == "robin_laplacian") {
      if (pf.builtin == "robin_laplacian")
        check_keys(j, path, {"builtin", "beta", "h0", "h1"});
      else
        check_keys(j, path, {"builtin", "beta"});
      pf.op = builtins::laplacian(beta);
      add("dirichlet", builtins::dirichlet_frame(), builtins::dirichlet_det(beta));
      add("antiperiodic", builtins::antiperiodic_frame(), builtins::antiperiodic_det());
      add("periodic", builtins::periodic_frame(), std::nullopt);
      pf.default_frame = pf.builtin == "antiperiodic_laplacian" ? "antiperiodic" : "dirichlet";
      if (pf.builtin == "robin_laplacian") {
        double h0 = number(member(j, path, "h0"), join(path, "h0"));
        double h1 = number(member(j, path, "h1"), join(path, "h1"));
        add("robin", builtins::robin_frame(h0, h1), builtins::robin_det(h0, h1, beta));
        pf.default_frame = "robin";
      }
    } else if (pf.builtin == "twisted_dirac") {
      check_keys(j, path, {"builtin", "beta", "a", "twists"});
      pf.op = builtins::dirac(beta);
      pf.cut = SpectralCut(0.5 * pi);
      auto twist = [&](const json& v, const std::string& where, const std::string& name) {
        double a = number(v, where);
        if (!(a > 0.0 && a < two_pi)) throw ParseError(where, "twist must lie in (0, 2 pi)");
        add(name, builtins::twisted_frame(a), std::nullopt, a);
      };
      if (j.contains("a")) {
        twist(j["a"], join(path, "a"), "twisted");
        pf.default_frame = "twisted";
      }
      if (j.contains("twists")) {
        const json& t = j["twists"];
        require_object(t, join(path, "twists"));
        for (auto it = t.begin(); it != t.end(); ++it) {
          if (pf.frames.count(it.key())) throw ParseError(join(join(path, "twists"), it.key()), "duplicate frame name");
          twist(*it, join(join(path, "twists"), it.key()), it.key());
        }
      }
      if (pf.frames.empty()) throw ParseError(path, "twisted_dirac needs 'a' or 'twists'");
    } else {
      throw ParseError(join(path, "builtin"), "unknown builtin '" + pf.builtin + "'");
    }
    pf.op.label = pf.builtin;
    return;
  }
  check_keys(j, path, {"order", "rank", "beta", "coefficients", "label"});
  OdeOperator op;
  op.order = integer(member(j, path, "order"), join(path, "order"));
  op.rank = integer(member(j, path, "rank"), join(path, "rank"));
  op.beta = number(member(j, path, "beta"), join(path, "beta"));
  if (op.order < 1) throw ParseError(join(path, "order"), "must be at least 1");
  if (op.rank < 1) throw ParseError(join(path, "rank"), "must be at least 1");
  if (!(op.beta > 0.0)) throw ParseError(join(path, "beta"), "must be positive");
  if (op.order * op.rank > 6) throw ParseError(path, "rank * order above 6 is not supported");
  const json& c = member(j, path, "coefficients");
  const std::string cp = join(path, "coefficients");
  if (!c.is_array() || static_cast<int>(c.size()) != op.order + 1)
    throw ParseError(cp, "expected order + 1 = " + std::to_string(op.order + 1) + " coefficient polynomials");
  for (std::size_t k = 0; k < c.size(); ++k) op.coefficients.push_back(polynomial(c[k], at_index(cp, k), op.rank));
  if (j.contains("label")) {
    if (!j["label"].is_string()) throw ParseError(join(path, "label"), "expected a string");
    op.label = j["label"].get<std::string>();
  }
  pf.op = std::move(op);
}

inline void parse_frames(const json& j, const std::string& path, ProblemFile& pf) {
  require_object(j, path);
  const Eigen::Index dim = pf.op.order * pf.op.rank;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string fp = join(path, it.key());
    if (pf.frames.count(it.key())) throw ParseError(fp, "duplicate frame name");
    check_keys(*it, fp, {"M", "N"});
    StiefelFrame f{matrix(member(*it, fp, "M"), join(fp, "M"), dim, dim),
                   matrix(member(*it, fp, "N"), join(fp, "N"), dim, dim)};
    try {
      f.validate(dim);
    } catch (const Error& e) {
      throw ParseError(fp, e.what());
    }
    pf.frames[it.key()] = NamedFrame{std::move(f), std::nullopt, std::nullopt};
    if (pf.default_frame.empty()) pf.default_frame = it.key();
  }
}

inline void parse_plan(const json& j, const std::string& path, RayPlan& plan) {
  check_keys(j, path, {"r0", "ratio", "count", "refinement_cap"});
  plan.r0 = number_or(j, path, "r0", plan.r0);
  plan.ratio = number_or(j, path, "ratio", plan.ratio);
  if (j.contains("count")) plan.count = integer(j["count"], join(path, "count"));
  if (j.contains("refinement_cap")) plan.refinement_cap = integer(j["refinement_cap"], join(path, "refinement_cap"));
  try {
    plan.validate();
  } catch (const Error& e) {
    throw ParseError(path, e.what());
  }
}

inline Basis parse_basis(const json& j, const std::string& path) {
  check_keys(j, path, {"exponents", "include_log"});
  Basis b;
  const json& e = member(j, path, "exponents");
  if (!e.is_array()) throw ParseError(join(path, "exponents"), "expected an array of numbers");
  for (std::size_t k = 0; k < e.size(); ++k) {
    double v = number(e[k], at_index(join(path, "exponents"), k));
    if (v == 0.0) throw ParseError(at_index(join(path, "exponents"), k), "exponent 0 is the constant slot");
    b.exponents.push_back(v);
  }
  if (j.contains("include_log")) {
    if (!j["include_log"].is_boolean()) throw ParseError(join(path, "include_log"), "expected a boolean");
    b.include_log = j["include_log"].get<bool>();
  }
  return b;
}

}  // namespace detail

inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + " (byte " + std::to_string(e.byte) + ")", "invalid JSON");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline int parse_schema_version(const json& j) {
  int v = detail::integer(detail::member(j, "", "schema_version"), "schema_version");
  if (v != 1) throw ParseError("schema_version", "unsupported version " + std::to_string(v));
  return v;
}

inline ProblemFile parse_problem(const json& j) {
  using namespace detail;
  check_keys(j, "", {"schema_version", "operator", "frames", "cut", "ray_plan", "tolerances", "basis"});
  ProblemFile pf;
  pf.schema_version = parse_schema_version(j);
  parse_operator(member(j, "", "operator"), "operator", pf);
  if (j.contains("frames")) parse_frames(j["frames"], "frames", pf);
  if (pf.frames.empty()) throw ParseError("frames", "no boundary frames defined");
  if (j.contains("cut")) {
    check_keys(j["cut"], "cut", {"theta"});
    double theta = number(member(j["cut"], "cut", "theta"), "cut.theta");
    if (!(theta > 0.0 && theta < two_pi)) throw ParseError("cut.theta", "must lie in (0, 2 pi)");
    pf.cut = SpectralCut(theta);
  }
  if (j.contains("ray_plan")) parse_plan(j["ray_plan"], "ray_plan", pf.plan);
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    check_keys(t, "tolerances", {"rtol", "atol", "stability"});
    pf.tol.rtol = number_or(t, "tolerances", "rtol", pf.tol.rtol);
    pf.tol.atol = number_or(t, "tolerances", "atol", pf.tol.atol);
    pf.stability_tol = number_or(t, "tolerances", "stability", pf.stability_tol);
    if (!(pf.tol.rtol > 0.0) || !(pf.tol.atol > 0.0) || !(pf.stability_tol > 0.0))
      throw ParseError("tolerances", "tolerances must be positive");
  }
  if (j.contains("basis")) pf.basis = parse_basis(j["basis"], "basis");
  // Twisted expectations depend on the cut.
  for (auto& [name, nf] : pf.frames)
    if (nf.twist && std::abs(std::sin(pf.cut.theta)) > 1e-12) nf.expected = builtins::twisted_det(*nf.twist, pf.cut.theta);
  try {
    pf.op.validate();
  } catch (const Error& e) {
    throw ParseError("operator", e.what());
  }
  return pf;
}

inline ProblemFile load_problem(const std::string& path) {
  return parse_problem(parse_json_text(read_file(path), path));
}

}  // namespace specdet::cli
