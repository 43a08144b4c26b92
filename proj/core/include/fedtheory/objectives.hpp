#pragma once

#include "fedtheory/linalg.hpp"

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace fedtheory {

/// A client objective f_i with gradient and exact-optimum oracles.
///
/// Evaluation is read-only and safe to call concurrently. Objectives whose
/// optimum is computed numerically resolve it once, on first request.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Eigen::Index dim() const = 0;
  virtual double evaluate(const ModelVector& x) const = 0;
  virtual ModelVector gradient(const ModelVector& x) const = 0;

  /// The client's local optimum x*_i.
  virtual const ModelVector& optimum() const = 0;

  /// Number of data samples backing the objective; 0 for closed-form
  /// objectives that have no dataset.
  virtual std::size_t sample_count() const { return 0; }

  /// Gradient of the loss restricted to the listed samples. Only meaningful
  /// when sample_count() > 0.
  virtual ModelVector batch_gradient(const ModelVector& x,
                                     std::span<const std::size_t> samples) const;

 protected:
  void check_dim(const ModelVector& x) const;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// f(x) = c + 1/2 (x - x*)^T Q (x - x*) with Q symmetric positive definite.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(ModelVector center, Matrix curvature, double offset = 0.0);

  /// Q = scale * I.
  static QuadraticObjective isotropic(ModelVector center, double scale = 1.0,
                                      double offset = 0.0);

  Eigen::Index dim() const override { return center_.size(); }
  double evaluate(const ModelVector& x) const override;
  ModelVector gradient(const ModelVector& x) const override;
  const ModelVector& optimum() const override { return center_; }

  const ModelVector& center() const { return center_; }
  const Matrix& curvature() const { return curvature_; }
  double offset() const { return offset_; }
  double lambda_min() const { return spectrum_.min; }
  double lambda_max() const { return spectrum_.max; }

 private:
  ModelVector center_;
  Matrix curvature_;
  double offset_;
  SymmetricSpectrum spectrum_;
};

/// A labeled dataset: one row of `features` per sample.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 2;

  std::size_t size() const { return labels.size(); }
  Eigen::Index feature_dim() const { return features.cols(); }
};

/// Multinomial logistic (softmax) regression with L2 regularization:
///   f(x) = mean_n [ logsumexp(W a_n) - (W a_n)_{y_n} ] + l2/2 ||x||^2,
/// where W is x reshaped class-major (num_classes rows of feature_dim).
/// With two classes this is ordinary binary logistic loss.
class LogisticObjective final : public Objective {
 public:
  struct Options {
    double l2_reg = 1e-2;
    double opt_tol = 1e-8;
    std::size_t max_opt_iterations = 200000;
  };

  LogisticObjective(std::shared_ptr<const LabeledDataset> data,
                    std::vector<std::size_t> rows, Options options);
  LogisticObjective(std::shared_ptr<const LabeledDataset> data, Options options);

  Eigen::Index dim() const override;
  double evaluate(const ModelVector& x) const override;
  ModelVector gradient(const ModelVector& x) const override;
  const ModelVector& optimum() const override;
  std::size_t sample_count() const override { return rows_.size(); }
  ModelVector batch_gradient(const ModelVector& x,
                             std::span<const std::size_t> samples) const override;

  /// Fraction of samples whose argmax class matches the label.
  double accuracy(const ModelVector& x) const;

  double l2_reg() const { return options_.l2_reg; }
  double opt_tol() const { return options_.opt_tol; }
  const std::vector<std::size_t>& rows() const { return rows_; }
  const LabeledDataset& data() const { return *data_; }

 private:
  ModelVector resolve_optimum() const;

  std::shared_ptr<const LabeledDataset> data_;
  std::vector<std::size_t> rows_;
  Options options_;
  mutable std::once_flag optimum_once_;
  mutable std::optional<ModelVector> optimum_;
};

/// Ordered clients with aggregation weights rho_i (nonnegative, summing to 1).
struct ClientPopulation {
  std::vector<ObjectivePtr> clients;
  std::vector<double> weights;

  ClientPopulation() = default;
  ClientPopulation(std::vector<ObjectivePtr> clients, std::vector<double> weights);
  /// Uniform weights.
  explicit ClientPopulation(std::vector<ObjectivePtr> clients);

  std::size_t size() const { return clients.size(); }
  Eigen::Index dim() const;
  std::vector<ModelVector> optima() const;
};

enum class Averaging {
  uniform,   // (1/|S|) sum f_i, the federated objective as usually stated
  weighted,  // sum rho_i f_i, what Algorithm-1 style aggregation targets
};

double global_objective(const ClientPopulation& pop, const ModelVector& x,
                        Averaging averaging = Averaging::uniform);

/// H = (1/|S|) sum ||x*_i - mean(x*)||^2.
double heterogeneity(std::span<const ModelVector> optima);

/// Curvature lower bound on the uniform global objective:
///   (1/|S|) sum [ f(x*_i) + lambda_min^i / 2 (||x*_i - c|| - ||x - c||)^2 ],
/// c = mean of the optima. Quadratic clients only.
double lower_bound(const ClientPopulation& pop, const ModelVector& x);

}  // namespace fedtheory
