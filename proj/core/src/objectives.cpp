#include "fedtheory/objectives.hpp"

#include "fedtheory/errors.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fedtheory {

namespace {

constexpr double kSymmetryTol = 1e-12;

}  // namespace

ModelVector Objective::batch_gradient(const ModelVector&,
                                      std::span<const std::size_t>) const {
  throw UnsupportedObjective("objective has no samples to batch over");
}

void Objective::check_dim(const ModelVector& x) const {
  if (x.size() != dim())
    throw InputError("dimension mismatch: objective has d=" + std::to_string(dim()) +
                     ", got " + std::to_string(x.size()));
}

// ---------------------------------------------------------------------------

QuadraticObjective::QuadraticObjective(ModelVector center, Matrix curvature,
                                       double offset)
    : center_(std::move(center)), curvature_(std::move(curvature)), offset_(offset) {
  if (center_.size() == 0) throw InputError("quadratic: empty center");
  if (curvature_.rows() != center_.size() || curvature_.cols() != center_.size())
    throw InputError("quadratic: curvature must be d x d");
  if (asymmetry(curvature_) > kSymmetryTol)
    throw InputError("quadratic: curvature is not symmetric");
  if (!(offset_ >= 0.0)) throw InputError("quadratic: offset must be >= 0");
  spectrum_ = symmetric_spectrum(curvature_);
  if (!(spectrum_.min > 0.0))
    throw InputError("quadratic: curvature is not positive definite");
}

QuadraticObjective QuadraticObjective::isotropic(ModelVector center, double scale,
                                                 double offset) {
  const auto d = center.size();
  return QuadraticObjective(std::move(center), scale * Matrix::Identity(d, d), offset);
}

double QuadraticObjective::evaluate(const ModelVector& x) const {
  check_dim(x);
  const ModelVector diff = x - center_;
  return offset_ + 0.5 * diff.dot(curvature_ * diff);
}

ModelVector QuadraticObjective::gradient(const ModelVector& x) const {
  check_dim(x);
  return curvature_ * (x - center_);
}

// ---------------------------------------------------------------------------

LogisticObjective::LogisticObjective(std::shared_ptr<const LabeledDataset> data,
                                     std::vector<std::size_t> rows, Options options)
    : data_(std::move(data)), rows_(std::move(rows)), options_(options) {
  if (!data_) throw InputError("logistic: null dataset");
  if (data_->num_classes < 2) throw InputError("logistic: need >= 2 classes");
  if (static_cast<std::size_t>(data_->features.rows()) != data_->labels.size())
    throw InputError("logistic: features/labels row mismatch");
  if (rows_.empty()) throw InputError("logistic: client has no samples");
  if (options_.l2_reg < 0.0) throw InputError("logistic: l2_reg must be >= 0");
  for (auto r : rows_) {
    if (r >= data_->labels.size()) throw InputError("logistic: row index out of range");
    const int y = data_->labels[r];
    if (y < 0 || y >= data_->num_classes)
      throw InputError("logistic: label out of range");
  }
}

LogisticObjective::LogisticObjective(std::shared_ptr<const LabeledDataset> data,
                                     Options options)
    : LogisticObjective(data, [&] {
        std::vector<std::size_t> all(data ? data->labels.size() : 0);
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
      }(), options) {}

Eigen::Index LogisticObjective::dim() const {
  return data_->num_classes * data_->feature_dim();
}

double LogisticObjective::evaluate(const ModelVector& x) const {
  check_dim(x);
  const auto p = data_->feature_dim();
  const auto k = data_->num_classes;
  double total = 0.0;
  Eigen::VectorXd logits(k);
  for (auto r : rows_) {
    const auto a = data_->features.row(static_cast<Eigen::Index>(r));
    for (int c = 0; c < k; ++c) logits(c) = x.segment(c * p, p).dot(a.transpose());
    const double top = logits.maxCoeff();
    const double lse = top + std::log((logits.array() - top).exp().sum());
    total += lse - logits(data_->labels[r]);
  }
  return total / static_cast<double>(rows_.size()) + 0.5 * options_.l2_reg * x.squaredNorm();
}

ModelVector LogisticObjective::batch_gradient(const ModelVector& x,
                                              std::span<const std::size_t> samples) const {
  check_dim(x);
  if (samples.empty()) throw InputError("logistic: empty batch");
  const auto p = data_->feature_dim();
  const auto k = data_->num_classes;
  ModelVector g = ModelVector::Zero(x.size());
  Eigen::VectorXd logits(k);
  for (auto s : samples) {
    if (s >= rows_.size()) throw InputError("logistic: batch index out of range");
    const auto r = static_cast<Eigen::Index>(rows_[s]);
    const auto a = data_->features.row(r);
    for (int c = 0; c < k; ++c) logits(c) = x.segment(c * p, p).dot(a.transpose());
    const double top = logits.maxCoeff();
    Eigen::VectorXd prob = (logits.array() - top).exp();
    prob /= prob.sum();
    prob(data_->labels[static_cast<std::size_t>(r)]) -= 1.0;
    for (int c = 0; c < k; ++c) g.segment(c * p, p) += prob(c) * a.transpose();
  }
  g /= static_cast<double>(samples.size());
  g += options_.l2_reg * x;
  return g;
}

ModelVector LogisticObjective::gradient(const ModelVector& x) const {
  std::vector<std::size_t> all(rows_.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return batch_gradient(x, all);
}

double LogisticObjective::accuracy(const ModelVector& x) const {
  check_dim(x);
  const auto p = data_->feature_dim();
  const auto k = data_->num_classes;
  std::size_t hits = 0;
  for (auto r : rows_) {
    const auto a = data_->features.row(static_cast<Eigen::Index>(r));
    int best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double v = x.segment(c * p, p).dot(a.transpose());
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    hits += best == data_->labels[r] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(rows_.size());
}

const ModelVector& LogisticObjective::optimum() const {
  std::call_once(optimum_once_, [this] { optimum_ = resolve_optimum(); });
  return *optimum_;
}

// Full-batch gradient descent with backtracking (Armijo, c = 1/2). The trial
// step doubles after every accepted step. Near the optimum f(x) stops
// resolving the Armijo decrease in double precision; there a step is accepted
// when f is flat to rounding and the gradient norm shrinks.
ModelVector LogisticObjective::resolve_optimum() const {
  if (options_.l2_reg <= 0.0)
    throw UnsupportedObjective("logistic: optimum is not unique without l2_reg > 0");
  ModelVector x = ModelVector::Zero(dim());
  double f = evaluate(x);
  ModelVector g = gradient(x);
  double gnorm = g.norm();
  double step = 1.0;
  for (std::size_t it = 0; it < options_.max_opt_iterations && gnorm > options_.opt_tol; ++it) {
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const ModelVector trial = x - step * g;
      const double ft = evaluate(trial);
      const bool armijo = ft <= f - 0.5 * step * gnorm * gnorm;
      bool flat_progress = false;
      if (!armijo && std::abs(ft - f) <= 1e-13 * std::max(1.0, std::abs(f))) {
        flat_progress = gradient(trial).norm() < gnorm;
      }
      if (armijo || flat_progress) {
        x = trial;
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    g = gradient(x);
    gnorm = g.norm();
    step = std::min(step * 2.0, 1e6);
  }
  if (gnorm > options_.opt_tol)
    throw std::runtime_error("logistic: optimum not resolved to tolerance (||grad|| = " +
                             std::to_string(gnorm) + ")");
  return x;
}

// ---------------------------------------------------------------------------

ClientPopulation::ClientPopulation(std::vector<ObjectivePtr> c, std::vector<double> w)
    : clients(std::move(c)), weights(std::move(w)) {
  if (clients.empty()) throw InputError("population: no clients");
  if (weights.size() != clients.size())
    throw InputError("population: weight count does not match client count");
  double total = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0)) throw InputError("population: negative weight");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InputError("population: weights must sum to 1");
  const auto d = clients.front()->dim();
  for (const auto& c : clients)
    if (!c || c->dim() != d) throw InputError("population: clients disagree on dimension");
}

ClientPopulation::ClientPopulation(std::vector<ObjectivePtr> c)
    : ClientPopulation(c, std::vector<double>(c.size(), c.empty() ? 0.0 : 1.0 / static_cast<double>(c.size()))) {}

Eigen::Index ClientPopulation::dim() const {
  if (clients.empty()) throw InputError("population: no clients");
  return clients.front()->dim();
}

std::vector<ModelVector> ClientPopulation::optima() const {
  std::vector<ModelVector> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(c->optimum());
  return out;
}

double global_objective(const ClientPopulation& pop, const ModelVector& x,
                        Averaging averaging) {
  if (pop.clients.empty()) throw InputError("global_objective: empty population");
  double total = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const double fi = pop.clients[i]->evaluate(x);
    total += averaging == Averaging::uniform ? fi : pop.weights[i] * fi;
  }
  return averaging == Averaging::uniform ? total / static_cast<double>(pop.size()) : total;
}

double heterogeneity(std::span<const ModelVector> optima) {
  const ModelVector center = mean_of(optima);
  double total = 0.0;
  for (const auto& o : optima) total += (o - center).squaredNorm();
  return total / static_cast<double>(optima.size());
}

double lower_bound(const ClientPopulation& pop, const ModelVector& x) {
  if (pop.clients.empty()) throw InputError("lower_bound: empty population");
  std::vector<const QuadraticObjective*> quads;
  for (const auto& c : pop.clients) {
    const auto* q = dynamic_cast<const QuadraticObjective*>(c.get());
    if (q == nullptr)
      throw UnsupportedObjective("lower_bound: only quadratic clients have an exact lambda_min");
    if (x.size() != q->dim()) throw InputError("lower_bound: dimension mismatch");
    quads.push_back(q);
  }
  const auto optima = pop.optima();
  const ModelVector center = mean_of(optima);
  const double dist_x = (x - center).norm();
  double total = 0.0;
  for (const auto* q : quads) {
    const double gap = (q->center() - center).norm() - dist_x;
    total += q->offset() + 0.5 * q->lambda_min() * gap * gap;
  }
  return total / static_cast<double>(quads.size());
}

}  // namespace fedtheory
