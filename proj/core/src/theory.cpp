#include "fedtheory/theory.hpp"

#include "fedtheory/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedtheory {

namespace {

constexpr double kRadicandFloor = 1e-8;

void require_records(std::span<const ClientRoundRecord> records) {
  if (records.empty()) throw InputError("no client records");
  const auto d = records.front().delta.size();
  for (const auto& r : records)
    if (r.delta.size() != d || r.delta_end.size() != d || r.optimum.size() != d)
      throw InputError("client records disagree on dimension");
}

ModelVector weighted_end(std::span<const ClientRoundRecord> records) {
  ModelVector a = ModelVector::Zero(records.front().delta.size());
  for (const auto& r : records) a += r.weight * r.delta_end;
  return a;
}

double identity_scale(double start_sq, double observed, double step_sq) {
  return std::max({1.0, start_sq, observed, step_sq});
}

// sigma_D and the length it stands for, ||a|| = sigma_D ||b||.
struct SigmaDelta {
  double sigma = 0.0;
  bool fallback = false;
};

SigmaDelta sigma_delta(double b_sq, double descent, const ModelVector& a) {
  SigmaDelta out;
  if (b_sq <= 0.0) {
    out.fallback = true;
    return out;
  }
  const double radicand = b_sq - descent;
  if (radicand < kRadicandFloor * b_sq) {
    out.sigma = a.norm() / std::sqrt(b_sq);
    out.fallback = true;
  } else {
    out.sigma = std::sqrt(radicand) / std::sqrt(b_sq);
  }
  return out;
}

}  // namespace

ClientRoundRecord make_record(std::size_t client, double weight, const ModelVector& optimum,
                              const LocalRunResult& run) {
  ClientRoundRecord r;
  r.client = client;
  r.weight = weight;
  r.optimum = optimum;
  r.delta = run.delta_start;
  r.delta_end = run.delta_end;
  r.sigma = run.sigma;
  r.correction = run.applied_correction;
  return r;
}

Matrix compute_A(std::span<const ClientRoundRecord> records) {
  require_records(records);
  const auto n = static_cast<Eigen::Index>(records.size());
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ri = records[static_cast<std::size_t>(i)];
    a(i, i) = 1.0 - ri.sigma * ri.sigma;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& rj = records[static_cast<std::size_t>(j)];
      const double v = cosine(ri.delta, rj.delta) -
                       ri.sigma * rj.sigma * cosine(ri.delta_end, rj.delta_end);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

double compute_descent(std::span<const ClientRoundRecord> records, const Matrix& a) {
  require_records(records);
  const auto n = records.size();
  if (a.rows() != static_cast<Eigen::Index>(n) || a.cols() != static_cast<Eigen::Index>(n))
    throw InputError("compute_descent: A does not match record count");
  Eigen::VectorXd scaled(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    scaled(static_cast<Eigen::Index>(i)) = records[i].weight * records[i].delta.norm();
  return scaled.dot(a * scaled);
}

double compute_descent(std::span<const ClientRoundRecord> records) {
  return compute_descent(records, compute_A(records));
}

ModelVector weighted_center(std::span<const ClientRoundRecord> records) {
  require_records(records);
  ModelVector c = ModelVector::Zero(records.front().optimum.size());
  for (const auto& r : records) c += r.weight * r.optimum;
  return c;
}

double mean_pairwise_cosine(std::span<const ClientRoundRecord> records) {
  if (records.size() < 2) throw UndefinedQuantity("pairwise cosine needs at least 2 clients");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j, ++pairs)
      total += cosine(records[i].delta, records[j].delta);
  return total / static_cast<double>(pairs);
}

CosineRange pairwise_cosine_range(std::span<const ClientRoundRecord> records) {
  if (records.size() < 2) throw UndefinedQuantity("pairwise cosine needs at least 2 clients");
  CosineRange range{std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      const double c = cosine(records[i].delta, records[j].delta);
      range.min = std::min(range.min, c);
      range.max = std::max(range.max, c);
    }
  return range;
}

double region_radius(std::span<const ModelVector> optima) {
  const auto n = optima.size();
  if (n < 2) throw UndefinedQuantity("oscillatory region needs at least 2 optima");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += 2.0 * (optima[j] - optima[i]).norm();
  return total / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double boundary_cosine_check(const ModelVector& x, const ModelVector& a, const ModelVector& b) {
  if (x.size() != a.size() || x.size() != b.size())
    throw InputError("boundary_cosine_check: dimension mismatch");
  return cosine(x - a, x - b);
}

Theorem2Check verify_theorem2(const ModelVector& x_t, const ModelVector& x_next,
                              std::span<const ClientRoundRecord> records) {
  require_records(records);
  const ModelVector center = weighted_center(records);
  Theorem2Check out;
  out.descent = compute_descent(records);
  out.descent_prefactored =
      out.descent / static_cast<double>(records.size() * records.size());
  out.start_sq = (x_t - center).squaredNorm();
  out.observed = (x_next - center).squaredNorm();
  out.predicted = out.start_sq - out.descent;
  out.residual = std::abs(out.observed - out.predicted);
  out.scale = std::max(1.0, out.start_sq);
  return out;
}

DCDiagnostics verify_theorem3(const ModelVector& x_t, const ModelVector& x_next,
                              std::span<const ClientRoundRecord> records,
                              const ModelVector& correction, double eta) {
  require_records(records);
  if (correction.size() != x_t.size()) throw InputError("verify_theorem3: correction dimension");
  const ModelVector center = weighted_center(records);
  const ModelVector b = x_t - center;
  const ModelVector a = weighted_end(records);
  const double b_sq = b.squaredNorm();
  const double b_norm = std::sqrt(b_sq);

  DCDiagnostics out;
  out.descent = compute_descent(records);
  out.h_norm = correction.norm();
  const auto sd = sigma_delta(b_sq, out.descent, a);
  out.sigma_delta = sd.sigma;
  out.sigma_fallback = sd.fallback;

  out.wp = 2.0 * (1.0 - eta) * (1.0 - out.sigma_delta * cosine(a, b));
  out.hbar = -eta * out.sigma_delta * cosine(a, correction) + (eta - 1.0) * cosine(b, correction);
  out.eth = 2.0 * out.hbar * b_norm - eta * out.h_norm;
  out.direction_ok = out.hbar > 0.0;
  out.norm_ok = eta * out.h_norm < 2.0 * out.hbar * b_norm;
  out.effective = out.eth > 0.0 && out.h_norm > 0.0;

  if (b_sq > 0.0) {
    out.predicted = (1.0 - eta * out.wp) * b_sq - eta * (eta * out.descent + out.eth * out.h_norm);
  } else {
    // x_t sits on x*_S: only the local ends and the correction remain.
    out.predicted = (eta * (a + correction)).squaredNorm();
  }
  out.observed = (x_next - center).squaredNorm();
  out.residual = std::abs(out.observed - out.predicted);
  out.scale = identity_scale(b_sq, out.observed, (x_next - x_t).squaredNorm());
  return out;
}

SADiagnostics verify_theorem4(const ModelVector& x_t, const ModelVector& x_next,
                              std::span<const ClientRoundRecord> records,
                              const ModelVector& d_prev, double eta_phi, double nu, double beta) {
  require_records(records);
  if (d_prev.size() != x_t.size()) throw InputError("verify_theorem4: momentum dimension");
  const ModelVector center = weighted_center(records);
  const ModelVector b = x_t - center;
  const ModelVector a = weighted_end(records);
  const double b_sq = b.squaredNorm();
  const double b_norm = std::sqrt(b_sq);

  SADiagnostics out;
  out.eta_hat = eta_phi * (1.0 - nu * beta);
  out.eta_mom = -eta_phi * nu * beta;
  out.descent = compute_descent(records);
  out.d_prev_norm = d_prev.norm();
  const auto sd = sigma_delta(b_sq, out.descent, a);
  out.sigma_delta = sd.sigma;
  out.sigma_fallback = sd.fallback;

  const double eh = out.eta_hat;
  out.wp = 2.0 * eh * (1.0 - eh) * (1.0 - out.sigma_delta * cosine(a, b));
  out.hbar = -eh * out.sigma_delta * cosine(a, d_prev) + (eh - 1.0) * cosine(b, d_prev);
  out.eth = out.eta_mom * out.d_prev_norm - 2.0 * out.hbar * b_norm;

  if (b_sq > 0.0) {
    out.predicted = (1.0 - out.wp) * b_sq - eh * eh * out.descent +
                    out.eta_mom * out.eth * out.d_prev_norm;
  } else {
    out.predicted = (eh * a + out.eta_mom * d_prev).squaredNorm();
  }
  out.observed = (x_next - center).squaredNorm();
  out.residual = std::abs(out.observed - out.predicted);
  out.scale = identity_scale(b_sq, out.observed, (x_next - x_t).squaredNorm());
  return out;
}

RoundDiagnostics diagnose_round(const ModelVector& x_t,
                                std::span<const ClientRoundRecord> records,
                                std::span<const ModelVector> all_optima) {
  require_records(records);
  RoundDiagnostics out;
  out.A = compute_A(records);
  out.weighted_center = weighted_center(records);
  out.descent = compute_descent(records, out.A);
  out.descent_prefactored =
      out.descent / static_cast<double>(records.size() * records.size());
  if (records.size() >= 2) out.mean_pairwise_cos = mean_pairwise_cosine(records);
  const ModelVector center = mean_of(all_optima);
  out.distance_to_center = (x_t - center).norm();
  out.region_radius = all_optima.size() >= 2 ? region_radius(all_optima) : 0.0;
  out.in_region = out.distance_to_center <= out.region_radius;
  return out;
}

}  // namespace fedtheory
