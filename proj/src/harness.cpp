#include "cpdemod/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace cpdemod {

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::naive: return "naive";
    case Method::vb: return "vb";
    case Method::cv: return "cv";
    case Method::kcv: return "kcv";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods)
    if (name == to_string(m)) return m;
  throw std::invalid_argument("unknown method: " + name);
}

LearnerKind parse_learner(const std::string& name) {
  for (LearnerKind k : kAllLearners)
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown learner: " + name);
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
  if (n_test < 1) throw std::invalid_argument("n_test must be >= 1");
  if (n_pilots_grid.empty()) throw std::invalid_argument("pilot grid is empty");
  if (methods.empty()) throw std::invalid_argument("no methods selected");
  if (learners.empty()) throw std::invalid_argument("no learners selected");
  arch.validate();
  const auto has = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  for (std::size_t n : n_pilots_grid) {
    if (n < 1) throw std::invalid_argument("pilot counts must be >= 1");
    if ((has(Method::vb) || has(Method::cv)) && n < 2)
      throw std::invalid_argument("vb and cv need at least 2 pilots");
    if (has(Method::vb)) {
      const auto n_tr = static_cast<std::size_t>(std::ceil(split_ratio * static_cast<double>(n)));
      if (n_tr < 1 || n_tr >= n) throw std::invalid_argument("split ratio leaves an empty partition at N=" + std::to_string(n));
    }
    if (has(Method::kcv) && k_folds) {
      const std::size_t k = *k_folds;
      if (k < 2 || k > n || n % k != 0)
        throw std::invalid_argument("K=" + std::to_string(k) + " is invalid for N=" + std::to_string(n));
    }
  }
}

LearnerConfig ExperimentConfig::learner(LearnerKind kind) const { return LearnerConfig{kind, arch, gd, sgld}; }

FrameResult evaluate_frame(const Frame& frame, const SetPredictorFn& predictor) {
  std::vector<ComplexSample> xs;
  xs.reserve(frame.tests.size());
  for (const auto& t : frame.tests) xs.push_back(t.x);
  const std::vector<PredictionSet> sets = predictor(xs);
  if (sets.size() != xs.size()) throw std::logic_error("set predictor returned the wrong number of sets");

  FrameResult r;
  r.sizes.reserve(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].contains(frame.tests[i].y)) ++r.hits;
    r.sizes.push_back(sets[i].size());
  }
  return r;
}

SetPredictorFn make_set_predictor(const Dataset& pilots, Method method, const LearnerConfig& learner,
                                  double alpha, std::size_t k_folds, Seed seed, double split_ratio) {
  switch (method) {
    case Method::naive: {
      auto model = std::make_shared<Model>(fit_model(learner, pilots, hash64({seed, 1})));
      return [model, alpha](std::span<const ComplexSample> xs) {
        const Eigen::MatrixXd p = predictive(*model, to_batch(xs));
        std::vector<PredictionSet> out;
        out.reserve(xs.size());
        for (Eigen::Index j = 0; j < p.cols(); ++j) out.push_back(naive_set(Probabilities(p.col(j)), alpha));
        return out;
      };
    }
    case Method::vb: {
      auto p = std::make_shared<ValidationConformal>(pilots, alpha, learner, seed, split_ratio);
      return [p](std::span<const ComplexSample> xs) { return p->predict(xs); };
    }
    case Method::cv:
    case Method::kcv: {
      const std::size_t folds = method == Method::cv ? pilots.size() : k_folds;
      auto p = std::make_shared<CrossConformal>(pilots, alpha, learner, seed, folds);
      return [p](std::span<const ComplexSample> xs) { return p->predict(xs); };
    }
  }
  throw std::invalid_argument("unknown method");
}

FrameResult evaluate_frame(const Frame& frame, Method method, const LearnerConfig& learner, double alpha,
                           std::size_t k_folds, Seed seed, double split_ratio) {
  return evaluate_frame(frame, make_set_predictor(frame.pilots, method, learner, alpha, k_folds, seed, split_ratio));
}

Seed frame_seed(Seed master, Method method, LearnerKind learner, std::size_t n_pilots, std::size_t frame_index) {
  return hash64({master, static_cast<std::uint64_t>(method), static_cast<std::uint64_t>(learner),
                 static_cast<std::uint64_t>(n_pilots), static_cast<std::uint64_t>(frame_index)});
}

Frame make_frame(const ExperimentConfig& config, Method method, LearnerKind learner, std::size_t n_pilots,
                 std::size_t frame_index) {
  Rng rng = make_rng(frame_seed(config.master_seed, method, learner, n_pilots, frame_index));
  return generate_frame(n_pilots, config.n_test, db_to_linear(config.snr_db), make_qpsk(), rng);
}

double method_alpha(const ExperimentConfig& config, Method method) {
  const bool cross = method == Method::cv || method == Method::kcv;
  return config.alpha_halving && cross ? config.alpha / 2.0 : config.alpha;
}

namespace {

// Runs fn(i) for i in [0, count) on up to `threads` workers; rethrows the
// first failure after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<MetricsRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<MetricsRecord> records;
  for (LearnerKind learner_kind : config.learners) {
    const LearnerConfig learner = config.learner(learner_kind);
    for (std::size_t n : config.n_pilots_grid) {
      for (Method method : config.methods) {
        const std::size_t k = config.k_folds.value_or(kDefaultFolds);
        if (method == Method::kcv && (k < 2 || k > n || n % k != 0)) {
          std::cerr << "warning: skipping kcv at N=" << n << " (K=" << k << " does not divide N)\n";
          continue;
        }
        const double alpha = method_alpha(config, method);
        std::vector<FrameResult> results(config.n_frames);
        parallel_for(config.n_frames, config.threads, [&](std::size_t f) {
          const Frame frame = make_frame(config, method, learner_kind, n, f);
          const Seed seed = frame_seed(config.master_seed, method, learner_kind, n, f);
          results[f] = evaluate_frame(frame, method, learner, alpha, k, seed, config.split_ratio);
        });

        std::size_t hits = 0, total = 0, size_sum = 0;
        for (const auto& r : results) {
          hits += r.hits;
          total += r.sizes.size();
          for (std::size_t s : r.sizes) size_sum += s;
        }
        records.push_back(MetricsRecord{method, learner_kind, n, config.alpha,
                                        static_cast<double>(hits) / static_cast<double>(total),
                                        static_cast<double>(size_sum) / static_cast<double>(total),
                                        config.n_frames, config.master_seed});
      }
    }
  }
  return records;
}

namespace {

constexpr const char* kColumns[] = {"method", "learner", "n_pilots", "alpha", "coverage", "inefficiency", "n_frames", "seed"};

std::string format_rows(const std::vector<MetricsRecord>& records, char sep, const char* header_prefix) {
  std::string out = header_prefix;
  for (std::size_t i = 0; i < std::size(kColumns); ++i) {
    if (i) out += sep;
    out += kColumns[i];
  }
  out += '\n';
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s%c%s%c%zu%c%.6f%c%.6f%c%.6f%c%zu%c%llu\n", to_string(r.method), sep,
                  to_string(r.learner), sep, r.n_pilots, sep, r.alpha, sep, r.coverage, sep, r.inefficiency, sep,
                  r.n_frames, sep, static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

void write_atomically(const std::string& content, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move results into " + path);
  }
}

}  // namespace

std::string format_csv(const std::vector<MetricsRecord>& records) { return format_rows(records, ',', ""); }

std::string format_dat(const std::vector<MetricsRecord>& records) { return format_rows(records, ' ', "# "); }

void write_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("no records to write");
  write_atomically(format_csv(records), path);
}

void write_dat(const std::vector<MetricsRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("no records to write");
  write_atomically(format_dat(records), path);
}

}  // namespace cpdemod
