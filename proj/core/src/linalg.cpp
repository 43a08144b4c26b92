#include "fedtheory/linalg.hpp"

#include "fedtheory/errors.hpp"

#include <cmath>

namespace fedtheory {

double cosine(const ModelVector& a, const ModelVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

ModelVector mean_of(std::span<const ModelVector> vectors) {
  if (vectors.empty()) throw InputError("mean_of: empty list");
  ModelVector acc = ModelVector::Zero(vectors.front().size());
  for (const auto& v : vectors) {
    if (v.size() != acc.size()) throw InputError("mean_of: dimension mismatch");
    acc += v;
  }
  return acc / static_cast<double>(vectors.size());
}

ModelVector weighted_sum(std::span<const ModelVector> vectors,
                         std::span<const double> weights) {
  if (vectors.size() != weights.size())
    throw InputError("weighted_sum: vector/weight count mismatch");
  if (vectors.empty()) throw InputError("weighted_sum: empty list");
  ModelVector acc = ModelVector::Zero(vectors.front().size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != acc.size())
      throw InputError("weighted_sum: dimension mismatch");
    acc += weights[i] * vectors[i];
  }
  return acc;
}

SymmetricSpectrum symmetric_spectrum(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InputError("symmetric_spectrum: matrix must be square and nonempty");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw InputError("symmetric_spectrum: eigen-solve did not converge");
  const auto& ev = solver.eigenvalues();  // ascending
  return {ev(0), ev(ev.size() - 1)};
}

double asymmetry(const Matrix& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace fedtheory
