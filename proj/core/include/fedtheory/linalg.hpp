#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace fedtheory {

/// Dense model parameters x in R^d.
using ModelVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cosine of the angle between two vectors. The cosine with a zero vector is
/// defined as 0 so every diagnostic stays finite at convergence.
double cosine(const ModelVector& a, const ModelVector& b);

/// Unweighted mean of a nonempty list of equal-length vectors.
ModelVector mean_of(std::span<const ModelVector> vectors);

/// Weighted sum sum_i w_i v_i. Sizes must agree.
ModelVector weighted_sum(std::span<const ModelVector> vectors,
                         std::span<const double> weights);

struct SymmetricSpectrum {
  double min = 0.0;
  double max = 0.0;
};

/// Extreme eigenvalues of a symmetric matrix (self-adjoint QR/Jacobi-class
/// solver, accurate to ~1e-14 relative for the sizes used here).
SymmetricSpectrum symmetric_spectrum(const Matrix& m);

/// max |m_ij - m_ji|.
double asymmetry(const Matrix& m);

}  // namespace fedtheory
