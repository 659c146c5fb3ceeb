#include "cpdemod/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace cpdemod {
namespace {

struct Batch {
  InputBatch<double> inputs;
  std::vector<int> labels;
};

Batch canonical_batch(const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("dataset must be nonempty");
  const Dataset sorted = canonical_order(data);
  Batch b{to_batch(sorted), {}};
  b.labels.reserve(sorted.size());
  for (const auto& s : sorted) b.labels.push_back(s.y);
  return b;
}

}  // namespace

Weights init_weights(const ModelArch& arch, Rng& rng) {
  Weights w(arch);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < kLayers; ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(arch.fan_in(l)));
    auto m = w.weight(l);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * normal(rng);
  }
  return w;
}

InputBatch<double> to_batch(const Dataset& data) {
  InputBatch<double> b(2, static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    b(0, static_cast<Eigen::Index>(i)) = data[i].x.real();
    b(1, static_cast<Eigen::Index>(i)) = data[i].x.imag();
  }
  return b;
}

InputBatch<double> to_batch(std::span<const ComplexSample> xs) {
  InputBatch<double> b(2, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    b(0, static_cast<Eigen::Index>(i)) = xs[i].real();
    b(1, static_cast<Eigen::Index>(i)) = xs[i].imag();
  }
  return b;
}

Dataset canonical_order(Dataset data) {
  std::sort(data.begin(), data.end(), [](const LabeledSample& a, const LabeledSample& b) {
    return std::make_tuple(a.x.real(), a.x.imag(), a.y) < std::make_tuple(b.x.real(), b.x.imag(), b.y);
  });
  return data;
}

Probabilities forward(const Weights& w, ComplexSample x) {
  Eigen::Vector2d in(x.real(), x.imag());
  return mlp_probabilities(w, in).col(0);
}

double nll_loss(const Weights& w, const Dataset& data) {
  const Batch b = canonical_batch(data);
  return mlp_loss_and_gradient<double>(w, b.inputs, b.labels, nullptr);
}

Weights grad(const Weights& w, const Dataset& data) {
  const Batch b = canonical_batch(data);
  Weights g(w.arch());
  mlp_loss_and_gradient<double>(w, b.inputs, b.labels, &g);
  return g;
}

Weights train_gd(const Dataset& data, const ModelArch& arch, const GdOptions& opts, Seed seed) {
  const Batch b = canonical_batch(data);
  Rng rng = make_rng(hash64({seed, 0}));
  Weights w = init_weights(arch, rng);
  Weights g(arch);
  for (std::size_t t = 0; t < opts.steps; ++t) {
    mlp_loss_and_gradient<double>(w, b.inputs, b.labels, &g);
    w.values() -= opts.lr * g.values();
  }
  return w;
}

Ensemble train_sgld(const Dataset& data, const ModelArch& arch, const SgldOptions& opts, Seed seed) {
  if (opts.ensemble_size == 0) throw std::invalid_argument("ensemble_size must be >= 1");
  const Batch b = canonical_batch(data);
  Rng init_rng = make_rng(hash64({seed, 0}));
  Rng noise_rng = make_rng(hash64({seed, 1}));
  std::normal_distribution<double> normal(0.0, 1.0);

  Weights w = init_weights(arch, init_rng);
  Weights g(arch);
  const double n = static_cast<double>(b.labels.size());
  // Step size per unit of the summed potential; the drift is then
  // (lr/2) * grad(mean nll) as in gradient descent.
  const double step = opts.lr / n;
  const double half_step = step / 2.0;
  const double noise_std = std::sqrt(step) * opts.noise_scale;
  const double prior_precision = 1.0 / (opts.prior_sigma * opts.prior_sigma);
  Eigen::VectorXd xi(w.values().size());

  Ensemble ensemble;
  ensemble.members.reserve(opts.ensemble_size);
  const std::size_t total = opts.burn_in + opts.ensemble_size;
  for (std::size_t t = 0; t < total; ++t) {
    mlp_loss_and_gradient<double>(w, b.inputs, b.labels, &g);
    Eigen::VectorXd grad_u = n * g.values();
    if (opts.use_prior) grad_u += prior_precision * w.values();
    w.values() -= half_step * grad_u;
    if (noise_std != 0.0) {
      for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(noise_rng);
      w.values() += noise_std * xi;
    }
    if (t >= opts.burn_in) ensemble.members.push_back(w);
  }
  return ensemble;
}

Eigen::MatrixXd predictive(const Model& model, const InputBatch<double>& inputs) {
  return std::visit(
      [&](const auto& m) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Weights>) {
          return mlp_probabilities(m, inputs);
        } else {
          if (m.members.empty()) throw std::invalid_argument("ensemble has no members");
          Eigen::MatrixXd acc = mlp_probabilities(m.members.front(), inputs);
          for (std::size_t k = 1; k < m.members.size(); ++k) acc += mlp_probabilities(m.members[k], inputs);
          return acc / static_cast<double>(m.members.size());
        }
      },
      model);
}

Probabilities predictive(const Model& model, ComplexSample x) {
  InputBatch<double> in(2, 1);
  in << x.real(), x.imag();
  return predictive(model, in).col(0);
}

Model fit_model(const LearnerConfig& learner, const Dataset& data, Seed seed) {
  switch (learner.kind) {
    case LearnerKind::frequentist:
      return train_gd(data, learner.arch, learner.gd, seed);
    case LearnerKind::bayesian:
      return train_sgld(data, learner.arch, learner.sgld, seed);
  }
  throw std::invalid_argument("unknown learner kind");
}

const char* to_string(LearnerKind kind) noexcept {
  return kind == LearnerKind::frequentist ? "frequentist" : "bayesian";
}

}  // namespace cpdemod
