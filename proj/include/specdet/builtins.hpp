#pragma once

#include <map>
#include <optional>
#include <string>

#include "specdet/bvp.hpp"

namespace specdet::builtins {

// -d^2/dx^2 on [0, beta].
inline OdeOperator laplacian(double beta) {
  OdeOperator op;
  op.order = 2;
  op.rank = 1;
  op.beta = beta;
  op.coefficients = {MatrixPolynomial::scalar(0.0), MatrixPolynomial::scalar(0.0), MatrixPolynomial::scalar(-1.0)};
  op.label = "laplacian";
  return op;
}

// -i d/dx on [0, beta].
inline OdeOperator dirac(double beta) {
  OdeOperator op;
  op.order = 1;
  op.rank = 1;
  op.beta = beta;
  op.coefficients = {MatrixPolynomial::scalar(0.0), MatrixPolynomial::scalar(-I_unit)};
  op.label = "dirac";
  return op;
}

inline StiefelFrame dirichlet_frame() {
  return {make_matrix(2, 2, {1, 0, 0, 0}), make_matrix(2, 2, {0, 0, 1, 0})};
}

inline StiefelFrame antiperiodic_frame() {
  return {ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2)};
}

inline StiefelFrame periodic_frame() {
  return {ComplexMatrix::Identity(2, 2), -ComplexMatrix::Identity(2, 2)};
}

// psi'(0) = h0 psi(0), psi'(beta) = -h1 psi(beta).
inline StiefelFrame robin_frame(double h0, double h1) {
  return {make_matrix(2, 2, {-h0, 1, 0, 0}), make_matrix(2, 2, {0, 0, h1, 1})};
}

// psi(0) = e^{-ia} psi(beta).
inline StiefelFrame twisted_frame(double a) {
  return {make_matrix(1, 1, {1.0}), make_matrix(1, 1, {-std::polar(1.0, -a)})};
}

inline StiefelFrame reference_frame(Eigen::Index dim) {
  return {ComplexMatrix::Identity(dim, dim), ComplexMatrix::Zero(dim, dim)};
}

inline BoundaryProblem problem(OdeOperator op, StiefelFrame f, double theta, RayPlan plan = {}) {
  plan.cut = SpectralCut(theta);
  return BoundaryProblem{std::move(op), std::move(f), SpectralCut(theta), plan, std::nullopt, 1e-6, {}};
}

inline BoundaryProblem dirichlet_problem(double beta, double theta = pi) {
  return problem(laplacian(beta), dirichlet_frame(), theta);
}

inline BoundaryProblem twisted_problem(double a, double theta = 0.5 * pi, double beta = 1.0) {
  return problem(dirac(beta), twisted_frame(a), theta);
}

inline BoundaryProblem antiperiodic_problem(double beta = 1.0, double theta = pi) {
  return problem(laplacian(beta), antiperiodic_frame(), theta);
}

inline BoundaryProblem robin_problem(double h0, double h1, double beta = 1.0, double theta = pi) {
  return problem(laplacian(beta), robin_frame(h0, h1), theta);
}

// Closed-form zeta determinants of the builtin families, used as report expectations.
inline cplx dirichlet_det(double beta) { return 2.0 * beta; }
inline cplx antiperiodic_det() { return 4.0; }
inline cplx robin_det(double h0, double h1, double beta) { return 2.0 * (h0 + h1 + h0 * h1 * beta); }

// theta = pi/2 branch; the 3pi/2 branch is the complex conjugate.
inline cplx twisted_det(double a, double theta = 0.5 * pi) {
  cplx v = 1.0 - std::polar(1.0, -a);
  return theta < pi ? v : std::conj(v);
}

}  // namespace specdet::builtins
