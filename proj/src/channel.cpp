#include "cpdemod/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cpdemod {

double Constellation::mean_energy() const noexcept {
  if (points.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& p : points) acc += std::norm(p);
  return acc / static_cast<double>(points.size());
}

void Constellation::validate() const {
  if (points.size() < 2) throw std::invalid_argument("constellation needs at least 2 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].real()) || !std::isfinite(points[i].imag()))
      throw std::invalid_argument("constellation point is not finite");
    for (std::size_t j = 0; j < i; ++j)
      if (points[i] == points[j]) throw std::invalid_argument("constellation points must be distinct");
  }
  if (std::abs(mean_energy() - 1.0) > 1e-9)
    throw std::invalid_argument("constellation must have unit average energy");
}

Constellation make_qpsk() {
  const double a = std::numbers::sqrt2 / 2.0;
  return Constellation{{{a, a}, {-a, a}, {-a, -a}, {a, -a}}};
}

double sample_beta(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

ChannelParams sample_channel_params(Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  ChannelParams p;
  p.psi = phase(rng);
  p.epsilon = kEpsilonMax * sample_beta(rng, 5.0, 2.0);
  p.delta = kDeltaMax * sample_beta(rng, 5.0, 2.0);
  return p;
}

ComplexSample apply_iq_imbalance(ComplexSample y, double epsilon, double delta) noexcept {
  const double c = std::cos(delta);
  const double s = std::sin(delta);
  // Both off-diagonal terms are -sin(delta); this is not a rotation.
  const double i = c * y.real() - s * y.imag();
  const double q = -s * y.real() + c * y.imag();
  return {(1.0 + epsilon) * i, (1.0 - epsilon) * q};
}

ComplexSample distort(ComplexSample symbol, const ChannelParams& params) noexcept {
  return std::polar(1.0, params.psi) * apply_iq_imbalance(symbol, params.epsilon, params.delta);
}

ComplexSample transmit(Label y, const Constellation& constellation, const ChannelParams& params,
                       double snr_linear, Rng& rng) {
  if (!(snr_linear > 0.0)) throw std::invalid_argument("snr_linear must be positive");
  std::normal_distribution<double> noise(0.0, std::sqrt(0.5 / snr_linear));
  const double re = noise(rng);
  const double im = noise(rng);
  return distort(constellation[y], params) + ComplexSample{re, im};
}

Frame generate_frame(std::size_t n_pilots, std::size_t n_test, double snr_linear,
                     const Constellation& constellation, Rng& rng) {
  if (n_pilots == 0 || n_test == 0) throw std::invalid_argument("frame needs at least one pilot and one test pair");
  if (!(snr_linear > 0.0)) throw std::invalid_argument("snr_linear must be positive");

  Frame frame;
  frame.params = sample_channel_params(rng);

  std::uniform_int_distribution<Label> label(0, static_cast<Label>(constellation.size()) - 1);
  std::vector<Label> labels(n_pilots + n_test);
  for (auto& y : labels) y = label(rng);

  frame.pilots.reserve(n_pilots);
  frame.tests.reserve(n_test);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    LabeledSample s{transmit(labels[i], constellation, frame.params, snr_linear, rng), labels[i]};
    (i < n_pilots ? frame.pilots : frame.tests).push_back(s);
  }
  return frame;
}

}  // namespace cpdemod
