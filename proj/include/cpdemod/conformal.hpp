#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cpdemod/channel.hpp"
#include "cpdemod/predictor.hpp"

namespace cpdemod {

/// Subset of the label space, kept sorted ascending.
struct PredictionSet {
  std::vector<Label> members;

  bool contains(Label y) const noexcept;
  std::size_t size() const noexcept { return members.size(); }
  bool empty() const noexcept { return members.empty(); }

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

/// Log-loss nonconformity score, -log max(p(y|x,D), 1e-12).
double nc_score(ComplexSample x, Label y, const Model& model);

/// Scores of every candidate label for a batch: |Y| x batch.
Eigen::MatrixXd nc_scores(const Model& model, const InputBatch<double>& inputs);

/// floor(alpha (n + 1)): how many validation scores a candidate must not
/// exceed to be kept. Throws std::invalid_argument unless 0 < alpha < 1.
std::size_t rank_threshold(std::size_t n, double alpha);

/// ceil((1 - alpha)(n + 1)), computed as n + 1 - rank_threshold(n, alpha)
/// so the quantile and rank rules agree exactly.
std::size_t quantile_rank(std::size_t n, double alpha);

/// k-th smallest (1-based) of scores plus {+inf}.
double order_statistic(std::span<const double> scores, std::size_t k);

/// The ceil((1-alpha)(N+1))-th smallest element of scores plus {+inf}.
double empirical_quantile(std::span<const double> scores, double alpha);

/// Cross-conformal membership: keep a candidate when
///   #{i : candidate_scores[i] <= validation_scores[i]} >= floor(alpha (N+1))
/// where candidate_scores[i] comes from the model that did not see point i.
bool cv_includes(std::span<const double> candidate_scores, std::span<const double> validation_scores,
                 double alpha);

/// Greedy highest-probability set whose mass reaches 1 - alpha. Ties go to
/// the smaller label.
PredictionSet naive_set(const Probabilities& probs, double alpha);
PredictionSet naive_set(const Model& model, ComplexSample x, double alpha);

/// Pilots in canonical order followed by a shuffle seeded from `seed`. All
/// splits and folds are taken from this order, so they depend on the pilot
/// multiset and the seed, not on the order the pilots arrived in.
Dataset canonical_shuffle(const Dataset& pilots, Seed seed);

/// Validation-based conformal predictor. One model is fit on the first
/// ceil(split_ratio N) pilots of the canonical shuffle; the rest calibrate.
class ValidationConformal {
 public:
  ValidationConformal(const Dataset& pilots, double alpha, const LearnerConfig& learner, Seed seed,
                      double split_ratio = 0.5);

  PredictionSet predict(ComplexSample x) const;
  std::vector<PredictionSet> predict(std::span<const ComplexSample> xs) const;

  const std::vector<double>& validation_scores() const noexcept { return validation_scores_; }
  double threshold() const noexcept { return threshold_; }
  const Model& model() const noexcept { return model_; }
  std::size_t label_count() const noexcept { return labels_; }

 private:
  Model model_;
  std::vector<double> validation_scores_;
  double threshold_ = 0.0;
  std::size_t labels_ = 0;
};

/// Cross-validation conformal predictor over `folds` contiguous blocks of
/// the canonical shuffle. folds == N is leave-one-out.
class CrossConformal {
 public:
  CrossConformal(const Dataset& pilots, double alpha, const LearnerConfig& learner, Seed seed,
                 std::size_t folds);

  PredictionSet predict(ComplexSample x) const;
  std::vector<PredictionSet> predict(std::span<const ComplexSample> xs) const;

  /// NC(z[i] | D minus the fold of z[i]) in canonical-shuffle order.
  const std::vector<double>& validation_scores() const noexcept { return validation_scores_; }
  std::size_t fold_of(std::size_t i) const noexcept { return fold_of_[i]; }
  std::size_t fold_count() const noexcept { return models_.size(); }

 private:
  double alpha_;
  std::size_t labels_;
  std::vector<Model> models_;
  std::vector<std::size_t> fold_of_;
  std::vector<double> validation_scores_;
};

PredictionSet vb_predict(const Dataset& pilots, ComplexSample x, double alpha, const LearnerConfig& learner,
                         Seed seed, double split_ratio = 0.5);
PredictionSet cv_predict(const Dataset& pilots, ComplexSample x, double alpha, const LearnerConfig& learner,
                         Seed seed);
PredictionSet kcv_predict(const Dataset& pilots, ComplexSample x, double alpha, std::size_t folds,
                          const LearnerConfig& learner, Seed seed);

}  // namespace cpdemod
