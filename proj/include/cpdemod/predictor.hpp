#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "cpdemod/channel.hpp"
#include "cpdemod/mlp.hpp"
#include "cpdemod/random.hpp"

namespace cpdemod {

using Weights = MlpParameters<double>;
using Probabilities = Eigen::VectorXd;

/// Equally weighted members drawn from a posterior sampler.
struct Ensemble {
  std::vector<Weights> members;
};

/// Frequentist (single weight vector) or Bayesian (ensemble) predictor.
using Model = std::variant<Weights, Ensemble>;

/// Weights ~ N(0, 1/fan_in), biases zero.
Weights init_weights(const ModelArch& arch, Rng& rng);

/// Stacks the inputs of a dataset as a 2 x n batch, in dataset order.
InputBatch<double> to_batch(const Dataset& data);
InputBatch<double> to_batch(std::span<const ComplexSample> xs);

/// Sorts by (re, im, label). Trainers see data in this order so their output
/// does not depend on the order the caller supplied.
Dataset canonical_order(Dataset data);

Probabilities forward(const Weights& w, ComplexSample x);

double nll_loss(const Weights& w, const Dataset& data);
Weights grad(const Weights& w, const Dataset& data);

struct GdOptions {
  std::size_t steps = 120;
  double lr = 0.2;
};

/// Full-batch gradient descent from init_weights(seed).
Weights train_gd(const Dataset& data, const ModelArch& arch, const GdOptions& opts, Seed seed);

struct SgldOptions {
  std::size_t burn_in = 100;
  std::size_t ensemble_size = 20;
  double lr = 0.2;
  double prior_sigma = 10.0;
  bool use_prior = true;
  /// Multiplies the injected Gaussian noise; 1 is standard SGLD.
  double noise_scale = 1.0;
};

/// Full-batch Langevin dynamics on U = N * nll + |w|^2 / (2 sigma_p^2) with
/// step size eps = lr / N:
///   w <- w - (eps/2) grad U + sqrt(eps) xi,   xi ~ N(0, I)
/// keeping the last ensemble_size iterates. The noise stream is seeded
/// separately from the initialisation and never depends on the data.
Ensemble train_sgld(const Dataset& data, const ModelArch& arch, const SgldOptions& opts, Seed seed);

/// p(y | x, D): the softmax of a single model, or the mean of the members'
/// probability vectors.
Probabilities predictive(const Model& model, ComplexSample x);

/// Batched predictive, output_dim x batch.
Eigen::MatrixXd predictive(const Model& model, const InputBatch<double>& inputs);

enum class LearnerKind { frequentist, bayesian };

struct LearnerConfig {
  LearnerKind kind = LearnerKind::frequentist;
  ModelArch arch{};
  GdOptions gd{};
  SgldOptions sgld{};
};

Model fit_model(const LearnerConfig& learner, const Dataset& data, Seed seed);

const char* to_string(LearnerKind kind) noexcept;

}  // namespace cpdemod
