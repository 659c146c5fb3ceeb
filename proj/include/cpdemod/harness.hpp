#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpdemod/channel.hpp"
#include "cpdemod/conformal.hpp"
#include "cpdemod/predictor.hpp"

namespace cpdemod {

enum class Method { naive, vb, cv, kcv };

inline constexpr Method kAllMethods[] = {Method::naive, Method::vb, Method::cv, Method::kcv};
inline constexpr LearnerKind kAllLearners[] = {LearnerKind::frequentist, LearnerKind::bayesian};

const char* to_string(Method m) noexcept;
/// Throws std::invalid_argument on unknown names.
Method parse_method(const std::string& name);
LearnerKind parse_learner(const std::string& name);

struct ExperimentConfig {
  double snr_db = 5.0;
  std::vector<std::size_t> n_pilots_grid{10, 20, 40, 60};
  std::size_t n_test = 100;
  std::size_t n_frames = 50;
  double alpha = 0.1;
  std::vector<Method> methods{kAllMethods, kAllMethods + 4};
  std::vector<LearnerKind> learners{kAllLearners, kAllLearners + 2};
  /// Unset: K = 5, and kcv is skipped (with a warning) where 5 does not
  /// divide N. Set explicitly: every N must admit it.
  std::optional<std::size_t> k_folds;
  Seed master_seed = 0;
  double split_ratio = 0.5;
  /// Run cv/kcv at alpha/2.
  bool alpha_halving = false;
  /// 0 means std::thread::hardware_concurrency().
  unsigned threads = 0;
  ModelArch arch{};
  GdOptions gd{};
  SgldOptions sgld{};

  /// Throws std::invalid_argument on a violated invariant, including an
  /// explicit K that does not fit some N in the grid.
  void validate() const;
  LearnerConfig learner(LearnerKind kind) const;
};

inline constexpr std::size_t kDefaultFolds = 5;

struct MetricsRecord {
  Method method = Method::naive;
  LearnerKind learner = LearnerKind::frequentist;
  std::size_t n_pilots = 0;
  double alpha = 0.0;
  double coverage = 0.0;
  double inefficiency = 0.0;
  std::size_t n_frames = 0;
  Seed seed = 0;
};

struct FrameResult {
  std::size_t hits = 0;
  std::vector<std::size_t> sizes;
};

using SetPredictorFn = std::function<std::vector<PredictionSet>(std::span<const ComplexSample>)>;

/// Scores an arbitrary set predictor on the test pairs of a frame.
FrameResult evaluate_frame(const Frame& frame, const SetPredictorFn& predictor);

/// Fits `method` on the frame's pilots and scores it on the test pairs.
FrameResult evaluate_frame(const Frame& frame, Method method, const LearnerConfig& learner, double alpha,
                           std::size_t k_folds, Seed seed, double split_ratio = 0.5);

/// Builds the per-frame set predictor for `method`; the returned callable
/// owns any trained models.
SetPredictorFn make_set_predictor(const Dataset& pilots, Method method, const LearnerConfig& learner,
                                  double alpha, std::size_t k_folds, Seed seed, double split_ratio = 0.5);

/// hash64(master, method, learner, N, frame_index). Stable across versions.
Seed frame_seed(Seed master, Method method, LearnerKind learner, std::size_t n_pilots, std::size_t frame_index);

/// Frame `frame_index` of a cell, generated from its frame seed.
Frame make_frame(const ExperimentConfig& config, Method method, LearnerKind learner, std::size_t n_pilots,
                 std::size_t frame_index);

/// Effective miscoverage handed to `method` (alpha/2 for cv/kcv under
/// alpha halving).
double method_alpha(const ExperimentConfig& config, Method method);

/// One record per (learner, N, method) cell, pooled over frames.
std::vector<MetricsRecord> run_experiment(const ExperimentConfig& config);

std::string format_csv(const std::vector<MetricsRecord>& records);
std::string format_dat(const std::vector<MetricsRecord>& records);

/// Writes through a temporary sibling file and renames it into place.
/// Throws std::invalid_argument on empty input and std::runtime_error
/// (naming the path) on I/O failure.
void write_csv(const std::vector<MetricsRecord>& records, const std::string& path);
void write_dat(const std::vector<MetricsRecord>& records, const std::string& path);

}  // namespace cpdemod
