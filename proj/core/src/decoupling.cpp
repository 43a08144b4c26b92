#include "fedtheory/decoupling.hpp"

#include "fedtheory/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fedtheory {

namespace {

// Welford running mean / variance.
class RunningStats {
 public:
  void add(double v) {
    ++n_;
    const double delta = v - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (v - mean_);
  }
  double mean() const { return mean_; }
  double stderr_of_mean() const {
    if (n_ < 2) return 0.0;
    return std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_));
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double quadratic_chaos(const Matrix& a, const std::vector<ModelVector>& x) {
  double total = 0.0;
  const auto n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && a(i, j) != 0.0)
        total += a(i, j) * x[static_cast<std::size_t>(i)].dot(x[static_cast<std::size_t>(j)]);
  return total;
}

}  // namespace

bool DecouplingBoundReport::equal_within(double k) const {
  return std::abs(mc_lhs - mc_rhs) <= k * mc_stderr + 1e-12 * std::max(1.0, std::abs(mc_lhs));
}

bool DecouplingBoundReport::contained(double k) const {
  return applicable && mc_lhs >= lower_bound - k * mc_stderr &&
         mc_lhs <= upper_bound + k * mc_stderr;
}

DecouplingBoundReport decoupling_check(const Matrix& a, const VectorFamilySampler& sample,
                                       std::size_t trials, std::uint64_t seed,
                                       SelectorMode selectors) {
  if (trials == 0) throw InputError("decoupling_check: zero trials");
  if (a.rows() != a.cols()) throw InputError("decoupling_check: matrix must be square");
  if (a.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw InputError("decoupling_check: matrix diagonal must be zero");
  const auto n = static_cast<std::size_t>(a.rows());

  Rng rng(mix_seed(seed));
  std::bernoulli_distribution coin(0.5);
  RunningStats lhs, rhs, diff;
  std::vector<char> in_i(n);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto x = sample(rng);
    const auto x_copy = sample(rng);
    if (x.size() != n || x_copy.size() != n)
      throw InputError("decoupling_check: sampler returned the wrong family size");

    const double l = quadratic_chaos(a, x);
    double r = 0.0;
    if (selectors == SelectorMode::sampled) {
      for (auto& s : in_i) s = coin(rng) ? 1 : 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!in_i[i]) continue;
        for (std::size_t j = 0; j < n; ++j)
          if (!in_i[j] && j != i)
            r += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[i].dot(x_copy[j]);
      }
      r *= 4.0;
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (j != i)
            r += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[i].dot(x_copy[j]);
    }
    lhs.add(l);
    rhs.add(r);
    diff.add(l - r);
  }

  DecouplingBoundReport out;
  out.trials = trials;
  out.mc_lhs = lhs.mean();
  out.mc_rhs = rhs.mean();
  out.mc_stderr = diff.stderr_of_mean();
  return out;
}

ModelVector uniform_in_ball(Rng& rng, Eigen::Index d, double radius) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModelVector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v(k) = gauss(rng);
  const double norm = v.norm();
  if (norm == 0.0) return ModelVector::Zero(d);
  const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(d));
  return v * (r / norm);
}

DecouplingBoundReport expected_descent_bounds(std::span<const ClientRoundRecord> records,
                                              std::size_t ball_trials, std::uint64_t seed) {
  if (records.empty()) throw InputError("expected_descent_bounds: no records");
  if (ball_trials < 2) throw InputError("expected_descent_bounds: need at least 2 trials");
  const auto n = records.size();
  const auto d = records.front().delta.size();
  const double count = static_cast<double>(n);
  const double prefactor = 1.0 / (count * count);

  DecouplingBoundReport out;
  out.trials = ball_trials;
  if (n >= 2) {
    const auto range = pairwise_cosine_range(records);
    out.min_cos = range.min;
    out.max_cos = range.max;
    out.applicable = range.min > 0.0;
  } else {
    out.min_cos = out.max_cos = 1.0;
  }

  ModelVector b = ModelVector::Zero(d);
  double ball_second_moment = 0.0;
  for (const auto& r : records) {
    b += r.weight * r.delta;
    ball_second_moment += r.weight * r.weight * r.delta.squaredNorm();
  }
  const double b_sq = b.squaredNorm();
  const double dd = static_cast<double>(d);
  out.analytic = prefactor * (b_sq - ball_second_moment * dd / (dd + 2.0));

  Rng rng(mix_seed(seed));
  RunningStats descent;
  std::vector<RunningStats> sigma_sq(n);
  for (std::size_t t = 0; t < ball_trials; ++t) {
    ModelVector a = ModelVector::Zero(d);
    for (std::size_t i = 0; i < n; ++i) {
      const double radius = records[i].delta.norm();
      const ModelVector u = uniform_in_ball(rng, d, radius);
      a += records[i].weight * u;
      sigma_sq[i].add(radius > 0.0 ? u.squaredNorm() / (radius * radius) : 0.0);
    }
    descent.add(prefactor * (b_sq - a.squaredNorm()));
  }
  out.mc_lhs = descent.mean();
  out.mc_rhs = out.analytic;
  out.mc_stderr = descent.stderr_of_mean();

  out.sigma_sq_min = sigma_sq.front().mean();
  out.sigma_sq_max = sigma_sq.front().mean();
  double rho_min = records.front().weight, rho_max = rho_min;
  double norm_min = records.front().delta.norm(), norm_max = norm_min;
  for (std::size_t i = 0; i < n; ++i) {
    out.sigma_sq_min = std::min(out.sigma_sq_min, sigma_sq[i].mean());
    out.sigma_sq_max = std::max(out.sigma_sq_max, sigma_sq[i].mean());
    rho_min = std::min(rho_min, records[i].weight);
    rho_max = std::max(rho_max, records[i].weight);
    norm_min = std::min(norm_min, records[i].delta.norm());
    norm_max = std::max(norm_max, records[i].delta.norm());
  }
  out.epsilon = 0.5 * (1.0 - 1.0 / std::sqrt(count));
  const double split = 4.0 * out.epsilon * (1.0 - out.epsilon);
  const double m_min = (1.0 - out.sigma_sq_max) / count + split * out.min_cos;
  const double m_max = (1.0 - out.sigma_sq_min) / count + out.max_cos;
  out.lower_bound = rho_min * rho_min * m_min * norm_min * norm_min;
  out.upper_bound = rho_max * rho_max * m_max * norm_max * norm_max;
  return out;
}

}  // namespace fedtheory
