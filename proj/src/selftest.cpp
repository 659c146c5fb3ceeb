#include "cpdemod/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "cpdemod/conformal.hpp"
#include "cpdemod/predictor.hpp"

namespace cpdemod {
namespace {

double shifted_quantile(std::span<const double> scores, double alpha, std::ptrdiff_t offset) {
  const auto k = static_cast<std::ptrdiff_t>(quantile_rank(scores.size(), alpha)) + offset;
  return order_statistic(scores, static_cast<std::size_t>(std::max<std::ptrdiff_t>(k, 1)));
}

// Sorts and indexes directly; shares nothing with order_statistic.
double sorted_quantile(std::vector<double> scores, double alpha) {
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n + 1) - 1e-9));
  std::sort(scores.begin(), scores.end());
  scores.push_back(std::numeric_limits<double>::infinity());
  return scores[k - 1];
}

}  // namespace

double gradient_check_error(Seed seed, double h) {
  Rng rng = make_rng(seed);
  const ModelArch arch{2, {5, 4, 3}, 4};
  const Weights w = init_weights(arch, rng);
  Weights perturbed = w;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < perturbed.values().size(); ++i) perturbed.values()[i] += 0.1 * normal(rng);

  Dataset data(12);
  std::uniform_int_distribution<Label> label(0, 3);
  for (auto& s : data) s = {{normal(rng), normal(rng)}, label(rng)};

  const Weights g = grad(perturbed, data);
  double worst = 0.0;
  Weights probe = perturbed;
  for (Eigen::Index i = 0; i < probe.values().size(); ++i) {
    const double orig = probe.values()[i];
    probe.values()[i] = orig + h;
    const double up = nll_loss(probe, data);
    probe.values()[i] = orig - h;
    const double down = nll_loss(probe, data);
    probe.values()[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = g.values()[i];
    worst = std::max(worst, std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8));
  }
  return worst;
}

double exchangeable_coverage(std::size_t n_val, double alpha, std::size_t trials, Seed seed,
                             std::ptrdiff_t rank_offset) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> val(n_val);
  std::size_t covered = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& v : val) v = u(rng);
    const double test = u(rng);
    if (test <= shifted_quantile(val, alpha, rank_offset)) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(trials);
}

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
  std::vector<CheckResult> out;

  {
    double worst = 0.0;
    for (Seed s = 0; s < 5; ++s) worst = std::max(worst, gradient_check_error(hash64({options.seed, 10, s})));
    std::ostringstream d;
    d << "max relative error " << worst;
    out.push_back({"gradient_finite_difference", worst < 1e-4, d.str()});
  }

  {
    Rng rng = make_rng(hash64({options.seed, 20}));
    std::uniform_int_distribution<int> size(0, 30);
    std::uniform_int_distribution<int> value(0, 9);
    std::uniform_real_distribution<double> alpha_dist(0.01, 0.99);
    std::size_t mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> scores(static_cast<std::size_t>(size(rng)));
      for (auto& s : scores) s = value(rng);
      const double alpha = alpha_dist(rng);
      if (shifted_quantile(scores, alpha, options.quantile_rank_offset) != sorted_quantile(scores, alpha))
        ++mismatches;
    }
    out.push_back({"quantile_sort_oracle", mismatches == 0, std::to_string(mismatches) + " of 1000 mismatched"});
  }

  {
    const std::pair<std::size_t, double> cases[] = {{9, 0.1}, {19, 0.1}, {19, 0.05}};
    bool ok = true;
    std::ostringstream d;
    for (std::size_t c = 0; c < std::size(cases); ++c) {
      const auto [n, alpha] = cases[c];
      const double cov = exchangeable_coverage(n, alpha, options.coverage_trials, hash64({options.seed, 30, c}),
                                               options.quantile_rank_offset);
      const double lo = 1.0 - alpha - 0.005;
      const double hi = 1.0 - alpha + 1.0 / static_cast<double>(n + 1) + 0.005;
      ok = ok && cov >= lo && cov <= hi;
      d << "(N_val=" << n << ", alpha=" << alpha << ") coverage " << cov << " in [" << lo << ", " << hi << "]; ";
    }
    out.push_back({"exchangeable_coverage", ok, d.str()});
  }
  return out;
}

bool report(const std::vector<CheckResult>& results, std::ostream& os) {
  bool all = true;
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
    all = all && r.passed;
  }
  return all;
}

}  // namespace cpdemod
