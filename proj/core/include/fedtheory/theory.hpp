#pragma once

#include "fedtheory/local_solver.hpp"
#include "fedtheory/linalg.hpp"

#include <optional>
#include <span>
#include <vector>

namespace fedtheory {

/// What the server sees from one participating client in one round.
struct ClientRoundRecord {
  std::size_t client = 0;
  double weight = 0.0;      // rho_i^t
  ModelVector optimum;      // x*_i
  ModelVector delta;        // delta_{t,i} = x_t - x*_i
  ModelVector delta_end;    // delta^K_{t,i}
  double sigma = 0.0;       // ||delta_end|| / ||delta||
  ModelVector correction;   // eta_l^i K_i h_i (zero-length when absent)
};

ClientRoundRecord make_record(std::size_t client, double weight, const ModelVector& optimum,
                              const LocalRunResult& run);

/// A_ij = cos(delta_i, delta_j) - sigma_i sigma_j cos(delta^K_i, delta^K_j),
/// with the diagonal set to 1 - sigma_i^2.
Matrix compute_A(std::span<const ClientRoundRecord> records);

/// Delta = sum_ij rho_i rho_j ||delta_i|| ||delta_j|| A_ij. Positive means the
/// weighted center got closer. No 1/|S|^2 factor.
double compute_descent(std::span<const ClientRoundRecord> records);
double compute_descent(std::span<const ClientRoundRecord> records, const Matrix& a);

/// x*_S = sum rho_i x*_i.
ModelVector weighted_center(std::span<const ClientRoundRecord> records);

/// Mean of cos(delta_i, delta_j) over unordered pairs i != j.
double mean_pairwise_cosine(std::span<const ClientRoundRecord> records);

/// Extreme pairwise cosines over unordered pairs i != j.
struct CosineRange {
  double min = 0.0;
  double max = 0.0;
};
CosineRange pairwise_cosine_range(std::span<const ClientRoundRecord> records);

/// Mean half pairwise distance: (1 / (2|S|(|S|-1))) sum_{i != j} ||x*_j - x*_i||.
double region_radius(std::span<const ModelVector> optima);

/// cos(x - a, x - b): zero on the sphere with diameter [a, b], negative
/// inside, positive outside.
double boundary_cosine_check(const ModelVector& x, const ModelVector& a, const ModelVector& b);

struct IdentityCheck {
  double observed = 0.0;   // ||x_{t+1} - x*_S||^2
  double predicted = 0.0;
  double residual = 0.0;   // |observed - predicted|
  double scale = 1.0;      // denominator of the relative residual
  double relative() const { return residual / scale; }
  bool holds(double tol = 1e-9) const { return relative() <= tol; }
};

struct Theorem2Check : IdentityCheck {
  double descent = 0.0;
  double descent_prefactored = 0.0;  // Delta / |S|^2
  double start_sq = 0.0;             // ||x_t - x*_S||^2
};

/// ||x_{t+1} - x*_S||^2 = ||x_t - x*_S||^2 - Delta on a plain averaging round.
Theorem2Check verify_theorem2(const ModelVector& x_t, const ModelVector& x_next,
                              std::span<const ClientRoundRecord> records);

struct DCDiagnostics : IdentityCheck {
  double wp = 0.0;           // 2 (1 - eta) (1 - sigma_D cos(a, b))
  double hbar = 0.0;         // -eta sigma_D cos(a, H) + (eta - 1) cos(b, H)
  double eth = 0.0;          // 2 hbar ||b|| - eta ||H||
  double sigma_delta = 0.0;  // sqrt(max(0, ||b||^2 - Delta)) / ||b||
  double h_norm = 0.0;
  double descent = 0.0;
  bool effective = false;    // eth > 0: the correction shortens the step's distance
  bool direction_ok = false; // hbar > 0
  bool norm_ok = false;      // ||H|| < 2 hbar ||b|| / eta
  bool sigma_fallback = false;
};

/// Corrected update x_{t+1} = x_t - eta (G - H). With b = x_t - x*_S and
/// a = sum rho_i delta^K_i:
///   ||x_{t+1} - x*_S||^2 = (1 - eta wp) ||b||^2 - eta (eta Delta + eth ||H||).
/// When ||b||^2 - Delta is below rounding (e.g. all clients solved
/// exactly) sigma_D is taken from ||a|| directly and sigma_fallback is set.
DCDiagnostics verify_theorem3(const ModelVector& x_t, const ModelVector& x_next,
                              std::span<const ClientRoundRecord> records,
                              const ModelVector& correction, double eta);

struct SADiagnostics : IdentityCheck {
  double eta_hat = 0.0;  // eta_phi (1 - nu beta)
  double eta_mom = 0.0;  // -eta_phi nu beta
  double wp = 0.0;       // 2 eta_hat (1 - eta_hat) (1 - sigma_D cos(a, b))
  double hbar = 0.0;     // -eta_hat sigma_D cos(a, d) + (eta_hat - 1) cos(b, d)
  double eth = 0.0;      // eta_mom ||d|| - 2 hbar ||b||
  double sigma_delta = 0.0;
  double d_prev_norm = 0.0;
  double descent = 0.0;
  bool sigma_fallback = false;
};

/// Scalar-step QHM update x_{t+1} = x_t - eta_hat G + eta_mom d^{t-1}:
///   ||x_{t+1} - x*_S||^2 = (1 - wp) ||b||^2 - eta_hat^2 Delta + eta_mom eth ||d||.
SADiagnostics verify_theorem4(const ModelVector& x_t, const ModelVector& x_next,
                              std::span<const ClientRoundRecord> records,
                              const ModelVector& d_prev, double eta_phi, double nu, double beta);

struct RoundDiagnostics {
  Matrix A;
  ModelVector weighted_center;
  double descent = 0.0;
  double descent_prefactored = 0.0;
  std::optional<double> mean_pairwise_cos;
  double region_radius = 0.0;
  double distance_to_center = 0.0;  // ||x_t - mean(x*)|| over all clients
  bool in_region = false;
};

/// Per-round summary. `all_optima` are the optima of the whole population;
/// the region is centered at their unweighted mean.
RoundDiagnostics diagnose_round(const ModelVector& x_t,
                                std::span<const ClientRoundRecord> records,
                                std::span<const ModelVector> all_optima);

}  // namespace fedtheory
