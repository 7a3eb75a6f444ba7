#include <gtest/gtest.h>

#include "specdet/oracle.hpp"

using namespace specdet;
using namespace specdet::builtins;

namespace {

Spectrum finite_spectrum(std::initializer_list<double> values) {
  Spectrum s;
  for (double v : values) s.eigenvalues.push_back({v, 1});
  return s;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

// -d^2/dx^2 + x with Dirichlet conditions on [0, 1].
BoundaryProblem linear_potential_problem() {
  OdeOperator op = laplacian(1.0);
  op.coefficients[0] = MatrixPolynomial({ComplexMatrix::Constant(1, 1, 0.0), ComplexMatrix::Constant(1, 1, 1.0)});
  op.label = "potential";
  return problem(op, dirichlet_frame(), pi);
}

// exp(-zeta'(0)) for the spectrum (a + 2 pi n)^2, n in Z: zeta(s) = (2 pi)^{-2s} [zeta(2s, x) + zeta(2s, 1 - x)].
double squared_twisted_det(double a) {
  double x = a / two_pi;
  cplx z = hurwitz_zeta(0.0, x) + hurwitz_zeta(0.0, 1.0 - x);
  cplx dz = hurwitz_zeta_ds(0.0, x) + hurwitz_zeta_ds(0.0, 1.0 - x);
  cplx zp = -2.0 * std::log(two_pi) * z + 2.0 * dz;
  return std::exp(-zp).real();
}

}  // namespace

TEST(SpectrumScan, Dirichlet) {
  Spectrum s = spectrum_scan(dirichlet_problem(1.0), {0.0, 120.0, -1.0, 1.0});
  ASSERT_EQ(s.eigenvalues.size(), 3u);
  for (int n = 1; n <= 3; ++n) {
    EXPECT_NEAR(std::abs(s.eigenvalues[n - 1].value - n * n * pi * pi), 0.0, 1e-8);
    EXPECT_EQ(s.eigenvalues[n - 1].multiplicity, 1);
  }
  EXPECT_NEAR(s.eigenvalues[0].value.real(), 9.8696, 1e-4);
  EXPECT_NEAR(s.eigenvalues[1].value.real(), 39.478, 1e-3);
  EXPECT_NEAR(s.eigenvalues[2].value.real(), 88.826, 1e-3);
}

TEST(SpectrumScan, Twisted) {
  Spectrum s = spectrum_scan(twisted_problem(pi / 2), {-10.0, 10.0, -1.0, 1.0});
  ASSERT_EQ(s.eigenvalues.size(), 3u);
  const double expected[] = {-1.5 * pi, 0.5 * pi, 2.5 * pi};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(s.eigenvalues[i].value - expected[i]), 0.0, 1e-9);
}

TEST(SpectrumScan, ReferenceFrameIsEmpty) {
  Spectrum s = spectrum_scan(problem(laplacian(1.0), reference_frame(2), pi), {-50.0, 500.0, -20.0, 20.0});
  EXPECT_TRUE(s.eigenvalues.empty());
  EXPECT_EQ(s.total_count, 0);
}

TEST(SpectrumScan, PeriodicMultiplicities) {
  Spectrum s = spectrum_scan(problem(laplacian(1.0), periodic_frame(), pi), {-1.0, 200.0, -1.0, 1.0});
  ASSERT_EQ(s.eigenvalues.size(), 3u);
  const double lam[] = {0.0, 4 * pi * pi, 16 * pi * pi};
  const int mult[] = {1, 2, 2};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::abs(s.eigenvalues[i].value - lam[i]), 0.0, 1e-7);
    EXPECT_EQ(s.eigenvalues[i].multiplicity, mult[i]);
  }
}

TEST(SpectrumScan, CertificateMatchesCount) {
  Spectrum s = spectrum_scan(robin_problem(0.7, 1.3), {-5.0, 1000.0, -2.0, 2.0});
  int cert = 0;
  for (const auto& c : s.completeness_certificate) {
    cert += c.count;
    int inside = 0;
    for (const auto& e : s.eigenvalues)
      if (c.cell.contains(e.value)) inside += e.multiplicity;
    EXPECT_EQ(inside, c.count);
  }
  EXPECT_EQ(cert, s.total_count);
  EXPECT_EQ(s.size_with_multiplicity(), s.total_count);
  EXPECT_EQ(s.total_count, 11);  // n pi < sqrt(1000) plus the low Robin mode
}

TEST(SpectrumScan, MaxCount) {
  try {
    spectrum_scan(dirichlet_problem(1.0), {0.0, 1000.0, -1.0, 1.0}, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
}

TEST(SpectrumScan, WeylCompleteness) {
  for (double beta : {0.5, 1.0, 2.0}) {
    for (double cap : {100.0, 1e4}) {
      Spectrum s = spectrum_scan(dirichlet_problem(beta), {-1.0, cap, -1.0, 1.0});
      int weyl = static_cast<int>(std::floor(beta * std::sqrt(cap) / pi));
      EXPECT_EQ(s.size_with_multiplicity(), weyl) << beta << " " << cap;
      for (std::size_t n = 0; n < s.eigenvalues.size(); ++n) {
        double e = std::pow((n + 1) * pi / beta, 2);
        EXPECT_LT(std::abs(s.eigenvalues[n].value - e), 1e-9 * e);
      }
    }
  }
}

TEST(ClassifyFamily, Builtins) {
  EXPECT_TRUE(std::holds_alternative<DirichletFamily>(classify_family(dirichlet_problem(2.0))));
  auto t = classify_family(twisted_problem(1.0));
  ASSERT_TRUE(std::holds_alternative<TwistedFamily>(t));
  EXPECT_NEAR(std::get<TwistedFamily>(t).a, 1.0, 1e-15);
  EXPECT_TRUE(std::holds_alternative<std::monostate>(classify_family(robin_problem(0.7, 1.3))));
  EXPECT_TRUE(std::holds_alternative<std::monostate>(classify_family(linear_potential_problem())));
}

TEST(ZetaOracle, FiniteSpectrum) {
  Spectrum s = finite_spectrum({1.0, 2.0});
  for (cplx z : {cplx(1.0), cplx(0.5, 2.0), cplx(-3.0)})
    EXPECT_LT(std::abs(zeta_from_spectrum(s, 2, z) - (1.0 + std::exp(-z * std::log(2.0)))), 1e-14);
  auto r = zeta_prime_at_zero(s, 2);
  EXPECT_LT(std::abs(r.det - 2.0), 1e-14);
  EXPECT_LT(std::abs(r.zeta_zero - 2.0), 1e-14);
}

TEST(ZetaOracle, DirichletClosedForm) {
  for (double beta : {0.5, 1.0, 2.0}) {
    Spectrum s = spectrum_scan(dirichlet_problem(beta), {0.0, 200.0, -1.0, 1.0});
    auto r = zeta_prime_at_zero(s, 2);
    EXPECT_TRUE(r.closed_form);
    EXPECT_NEAR(std::abs(r.zeta_zero + 0.5), 0.0, 1e-6);
    EXPECT_LT(rel(r.det, 2.0 * beta), 1e-10);
    // zeta(1) = (beta / pi)^2 zeta_R(2) = beta^2 / 6.
    EXPECT_LT(std::abs(zeta_from_spectrum(s, 2, 1.0) - beta * beta / 6.0), 1e-12);
  }
}

TEST(ZetaOracle, DirichletGenericTail) {
  Spectrum s = without_family(spectrum_scan(dirichlet_problem(1.0), {0.0, 1e4, -1.0, 1.0}));
  auto r = zeta_prime_at_zero(s, 2, SpectralCut(pi), TailOptions::semibounded());
  EXPECT_FALSE(r.closed_form);
  EXPECT_EQ(r.accuracy_target, 1e-3);
  EXPECT_NEAR(std::abs(r.zeta_zero + 0.5), 0.0, 1e-3);
  EXPECT_LT(rel(r.det, 2.0), 1e-5);
  EXPECT_LT(std::abs(zeta_from_spectrum(s, 2, 1.0, SpectralCut(pi), TailOptions::semibounded()) - 1.0 / 6.0), 1e-6);
}

TEST(ZetaOracle, TailOnFiniteHeadRejectsShortLists) {
  Spectrum s = finite_spectrum({1.0, 4.0});
  try {
    zeta_prime_at_zero(s, 2, SpectralCut(pi), TailOptions::semibounded());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TailFitPoor);
  }
}

TEST(ZetaOracle, TwistedClosedForm) {
  for (double a : {pi / 2, pi / 3, 2.0, 5.5}) {
    Spectrum s = spectrum_scan(twisted_problem(a), {-20.0, 20.0, -1.0, 1.0});
    auto r = zeta_prime_at_zero(s, 1, SpectralCut(0.5 * pi));
    EXPECT_TRUE(r.closed_form);
    EXPECT_LT(rel(r.det, twisted_det(a)), 1e-10) << a;
    EXPECT_LT(rel(zeta_prime_at_zero(s, 1, SpectralCut(1.5 * pi)).det, twisted_det(a, 1.5 * pi)), 1e-10);
  }
}

TEST(ZetaOracle, TwistedGenericTail) {
  const double a = pi / 2;
  Spectrum s = without_family(spectrum_scan(twisted_problem(a), {-400.0, 400.0, -1.0, 1.0}));
  auto r = zeta_prime_at_zero(s, 1, SpectralCut(0.5 * pi), TailOptions::two_sided());
  EXPECT_LT(rel(r.det, twisted_det(a)), 1e-5);
}

TEST(ZetaOracle, ZetaZeroMatchesPipeline) {
  auto d = zeta_det(dirichlet_problem(1.0));
  auto od = zeta_prime_at_zero(spectrum_scan(dirichlet_problem(1.0), {0.0, 200.0, -1.0, 1.0}), 2);
  EXPECT_LT(std::abs(d.zeta_zero - od.zeta_zero), 1e-3);
  auto t = zeta_det(twisted_problem(1.0));
  auto ot = zeta_prime_at_zero(spectrum_scan(twisted_problem(1.0), {-20.0, 20.0, -1.0, 1.0}), 1, SpectralCut(0.5 * pi));
  EXPECT_LT(std::abs(t.zeta_zero - ot.zeta_zero), 1e-3);
}

TEST(ZetaOracle, AgreesWithPipelineOnBuiltins) {
  struct Case {
    BoundaryProblem p;
    Rect region;
    TailOptions tails;
  };
  std::vector<Case> cases = {
      {dirichlet_problem(0.5), {0.0, 200.0, -1.0, 1.0}, {}},
      {dirichlet_problem(2.0), {0.0, 200.0, -1.0, 1.0}, {}},
      {twisted_problem(pi / 2), {-20.0, 20.0, -1.0, 1.0}, {}},
      {twisted_problem(2.5), {-20.0, 20.0, -1.0, 1.0}, {}},
      {antiperiodic_problem(), {-1.0, 1e4, -1.0, 1.0}, TailOptions::semibounded()},
      {robin_problem(0.7, 1.3), {-5.0, 1e4, -1.0, 1.0}, TailOptions::semibounded()},
  };
  for (const auto& c : cases) {
    cplx pipeline = zeta_det(c.p).value;
    Spectrum s = spectrum_scan(c.p, c.region);
    auto o = zeta_prime_at_zero(s, c.p.op.order, c.p.cut, c.tails);
    EXPECT_LT(rel(o.det, pipeline), 1e-5) << c.p.op.label << " " << c.p.frame.m;
  }
}

TEST(ZetaOracle, AgreesWithPipelineOnPotential) {
  BoundaryProblem p = linear_potential_problem();
  cplx pipeline = zeta_det(p).value;
  auto o = zeta_prime_at_zero(spectrum_scan(p, {-5.0, 1700.0, -1.0, 1.0}), 2, p.cut, TailOptions::semibounded());
  EXPECT_LT(rel(o.det, pipeline), 1e-5);
}

TEST(ZetaOracle, TheoremALeftSide) {
  const double a1 = pi / 3, a2 = pi / 4;
  auto r = theorem_a_check(twisted_problem(a1), twisted_problem(a2));
  double oracle = squared_twisted_det(a1) / squared_twisted_det(a2);
  EXPECT_LT(std::abs(r.lhs - oracle) / oracle, 1e-5);
  // The induced problem has spectrum (a + 2 pi n)^2.
  BoundaryProblem q = problem(induced_laplacian(dirac(1.0)), induced_frame(dirac(1.0), twisted_frame(a1)), pi);
  Spectrum s = spectrum_scan(q, {-1.0, 400.0, -1.0, 1.0});
  std::vector<double> expected;
  for (int n = -4; n <= 4; ++n) {
    double v = std::pow(a1 + two_pi * n, 2);
    if (v < 400.0) expected.push_back(v);
  }
  std::sort(expected.begin(), expected.end());
  ASSERT_EQ(s.eigenvalues.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_LT(std::abs(s.eigenvalues[i].value - expected[i]), 1e-7);
}

TEST(EtaOracle, Examples) {
  EXPECT_NEAR(eta_from_spectrum(finite_spectrum({-2.0, -1.0, 1.0, 2.0})).eta, 0.0, 1e-15);
  EXPECT_NEAR(eta_from_spectrum(finite_spectrum({1.0, 2.0, 3.0})).eta, 3.0, 1e-15);
  for (double a : {pi / 2, 1.0, 5.0}) {
    Spectrum s = spectrum_scan(twisted_problem(a), {-20.0, 20.0, -1.0, 1.0});
    auto r = eta_from_spectrum(s);
    EXPECT_TRUE(r.closed_form);
    EXPECT_NEAR(r.eta, 1.0 - a / pi, 1e-12);
  }
}

TEST(EtaOracle, GenericTwoSidedTail) {
  const double a = 1.0;
  Spectrum s = without_family(spectrum_scan(twisted_problem(a), {-400.0, 400.0, -1.0, 1.0}));
  auto r = eta_from_spectrum(s, 1, TailOptions::two_sided());
  EXPECT_NEAR(r.eta, 1.0 - a / pi, 1e-6);
}

TEST(EtaOracle, RejectsComplexSpectrum) {
  Spectrum s;
  s.eigenvalues.push_back({cplx(1.0, 1.0), 1});
  EXPECT_THROW(eta_from_spectrum(s), Error);
}

TEST(EtaOracle, MatchesPipeline) {
  const double a1 = pi / 3, a2 = pi / 4;
  auto p = relative_eta(twisted_problem(a1), twisted_problem(a2));
  double o1 = eta_from_spectrum(spectrum_scan(twisted_problem(a1), {-20.0, 20.0, -1.0, 1.0})).eta;
  double o2 = eta_from_spectrum(spectrum_scan(twisted_problem(a2), {-20.0, 20.0, -1.0, 1.0})).eta;
  EXPECT_LT(std::abs(wrap_symmetric(p.eta_rel_mod2 - (o1 - o2), 2.0)), 1e-6);
}
