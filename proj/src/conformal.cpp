#include "cpdemod/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cpdemod {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Absorbs representation error in products like 0.1 * 10.
constexpr double kIndexSlack = 1e-9;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

}  // namespace

bool PredictionSet::contains(Label y) const noexcept {
  return std::binary_search(members.begin(), members.end(), y);
}

Eigen::MatrixXd nc_scores(const Model& model, const InputBatch<double>& inputs) {
  return -predictive(model, inputs).array().max(kProbabilityFloor).log().matrix();
}

double nc_score(ComplexSample x, Label y, const Model& model) {
  const Probabilities p = predictive(model, x);
  if (y < 0 || y >= p.size()) throw std::out_of_range("label outside the output space");
  return -std::log(std::max(p[y], kProbabilityFloor));
}

std::size_t rank_threshold(std::size_t n, double alpha) {
  check_alpha(alpha);
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n + 1) + kIndexSlack));
}

std::size_t quantile_rank(std::size_t n, double alpha) { return n + 1 - rank_threshold(n, alpha); }

double order_statistic(std::span<const double> scores, std::size_t k) {
  if (k == 0) throw std::invalid_argument("order statistic rank is 1-based");
  if (k > scores.size()) return kInf;
  std::vector<double> v(scores.begin(), scores.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

double empirical_quantile(std::span<const double> scores, double alpha) {
  return order_statistic(scores, quantile_rank(scores.size(), alpha));
}

bool cv_includes(std::span<const double> candidate_scores, std::span<const double> validation_scores,
                 double alpha) {
  if (candidate_scores.size() != validation_scores.size())
    throw std::invalid_argument("candidate and validation score counts differ");
  std::size_t count = 0;
  for (std::size_t i = 0; i < candidate_scores.size(); ++i)
    if (candidate_scores[i] <= validation_scores[i]) ++count;
  return count >= rank_threshold(validation_scores.size(), alpha);
}

PredictionSet naive_set(const Probabilities& probs, double alpha) {
  check_alpha(alpha);
  std::vector<Label> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Label a, Label b) { return probs[a] > probs[b]; });

  PredictionSet set;
  const double target = 1.0 - alpha - kIndexSlack;
  double mass = 0.0;
  for (Label y : order) {
    if (mass >= target) break;
    set.members.push_back(y);
    mass += probs[y];
  }
  std::sort(set.members.begin(), set.members.end());
  return set;
}

PredictionSet naive_set(const Model& model, ComplexSample x, double alpha) {
  return naive_set(predictive(model, x), alpha);
}

Dataset canonical_shuffle(const Dataset& pilots, Seed seed) {
  Dataset d = canonical_order(pilots);
  Rng rng = make_rng(hash64({seed, 0x5348u}));
  std::shuffle(d.begin(), d.end(), rng);
  return d;
}

ValidationConformal::ValidationConformal(const Dataset& pilots, double alpha, const LearnerConfig& learner,
                                         Seed seed, double split_ratio) {
  check_alpha(alpha);
  const std::size_t n = pilots.size();
  const auto n_tr = static_cast<std::size_t>(std::ceil(split_ratio * static_cast<double>(n)));
  if (n_tr < 1 || n_tr >= n) throw std::invalid_argument("split leaves an empty training or validation set");

  const Dataset order = canonical_shuffle(pilots, seed);
  const Dataset train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_tr));
  const Dataset val(order.begin() + static_cast<std::ptrdiff_t>(n_tr), order.end());

  model_ = fit_model(learner, train, hash64({seed, 1}));
  labels_ = static_cast<std::size_t>(learner.arch.output_dim);

  const Eigen::MatrixXd s = nc_scores(model_, to_batch(val));
  validation_scores_.reserve(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) {
    const Label y = val[i].y;
    if (y < 0 || static_cast<std::size_t>(y) >= labels_) throw std::out_of_range("label outside the output space");
    validation_scores_.push_back(s(y, static_cast<Eigen::Index>(i)));
  }
  threshold_ = empirical_quantile(validation_scores_, alpha);
}

std::vector<PredictionSet> ValidationConformal::predict(std::span<const ComplexSample> xs) const {
  const Eigen::MatrixXd s = nc_scores(model_, to_batch(xs));
  std::vector<PredictionSet> out(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j)
    for (std::size_t y = 0; y < labels_; ++y)
      if (s(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(j)) <= threshold_)
        out[j].members.push_back(static_cast<Label>(y));
  return out;
}

PredictionSet ValidationConformal::predict(ComplexSample x) const { return predict(std::span(&x, 1)).front(); }

CrossConformal::CrossConformal(const Dataset& pilots, double alpha, const LearnerConfig& learner, Seed seed,
                               std::size_t folds)
    : alpha_(alpha), labels_(static_cast<std::size_t>(learner.arch.output_dim)) {
  check_alpha(alpha);
  const std::size_t n = pilots.size();
  if (folds < 2 || folds > n) throw std::invalid_argument("fold count must lie in {2, ..., N}");
  if (n % folds != 0) throw std::invalid_argument("pilot count must be divisible by the fold count");

  const Dataset order = canonical_shuffle(pilots, seed);
  const std::size_t fold_size = n / folds;
  fold_of_.resize(n);
  for (std::size_t i = 0; i < n; ++i) fold_of_[i] = i / fold_size;

  models_.reserve(folds);
  validation_scores_.resize(n);
  for (std::size_t k = 0; k < folds; ++k) {
    const auto lo = static_cast<std::ptrdiff_t>(k * fold_size);
    const auto hi = lo + static_cast<std::ptrdiff_t>(fold_size);
    Dataset train(order.begin(), order.begin() + lo);
    train.insert(train.end(), order.begin() + hi, order.end());
    models_.push_back(fit_model(learner, train, hash64({seed, 2, k})));

    const Dataset held(order.begin() + lo, order.begin() + hi);
    const Eigen::MatrixXd s = nc_scores(models_.back(), to_batch(held));
    for (std::size_t j = 0; j < held.size(); ++j) {
      const Label y = held[j].y;
      if (y < 0 || static_cast<std::size_t>(y) >= labels_) throw std::out_of_range("label outside the output space");
      validation_scores_[static_cast<std::size_t>(lo) + j] = s(y, static_cast<Eigen::Index>(j));
    }
  }
}

std::vector<PredictionSet> CrossConformal::predict(std::span<const ComplexSample> xs) const {
  const InputBatch<double> batch = to_batch(xs);
  std::vector<Eigen::MatrixXd> per_model;
  per_model.reserve(models_.size());
  for (const auto& m : models_) per_model.push_back(nc_scores(m, batch));

  const std::size_t n = validation_scores_.size();
  std::vector<double> candidate(n);
  std::vector<PredictionSet> out(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    for (std::size_t y = 0; y < labels_; ++y) {
      for (std::size_t i = 0; i < n; ++i)
        candidate[i] = per_model[fold_of_[i]](static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(j));
      if (cv_includes(candidate, validation_scores_, alpha_)) out[j].members.push_back(static_cast<Label>(y));
    }
  }
  return out;
}

PredictionSet CrossConformal::predict(ComplexSample x) const { return predict(std::span(&x, 1)).front(); }

PredictionSet vb_predict(const Dataset& pilots, ComplexSample x, double alpha, const LearnerConfig& learner,
                         Seed seed, double split_ratio) {
  return ValidationConformal(pilots, alpha, learner, seed, split_ratio).predict(x);
}

PredictionSet cv_predict(const Dataset& pilots, ComplexSample x, double alpha, const LearnerConfig& learner,
                         Seed seed) {
  if (pilots.size() < 2) throw std::invalid_argument("cross-validation needs at least 2 pilots");
  return CrossConformal(pilots, alpha, learner, seed, pilots.size()).predict(x);
}

PredictionSet kcv_predict(const Dataset& pilots, ComplexSample x, double alpha, std::size_t folds,
                          const LearnerConfig& learner, Seed seed) {
  return CrossConformal(pilots, alpha, learner, seed, folds).predict(x);
}

}  // namespace cpdemod
