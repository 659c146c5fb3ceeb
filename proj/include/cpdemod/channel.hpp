#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "cpdemod/random.hpp"

namespace cpdemod {

using ComplexSample = std::complex<double>;
using Label = int;

/// Ordered symbol alphabet. The label of a point is its index.
struct Constellation {
  std::vector<ComplexSample> points;

  std::size_t size() const noexcept { return points.size(); }
  const ComplexSample& operator[](Label y) const { return points.at(static_cast<std::size_t>(y)); }

  /// Throws std::invalid_argument unless there are >= 2 distinct finite
  /// points with unit average energy.
  void validate() const;
  double mean_energy() const noexcept;
};

/// Gray-labelled QPSK: 0:(+,+) 1:(-,+) 2:(-,-) 3:(+,-), unit energy.
Constellation make_qpsk();

/// Per-frame channel realisation: phase rotation psi, amplitude imbalance
/// epsilon and phase imbalance delta (radians).
struct ChannelParams {
  double psi = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
};

inline constexpr double kEpsilonMax = 0.15;
inline constexpr double kDeltaMax = 0.15 * 3.14159265358979323846 / 180.0;

struct LabeledSample {
  ComplexSample x;
  Label y = 0;
};

using Dataset = std::vector<LabeledSample>;

struct Frame {
  ChannelParams params;
  Dataset pilots;
  Dataset tests;
};

/// Draws a sample from Beta(a, b) as G_a / (G_a + G_b) with Gamma variates.
double sample_beta(Rng& rng, double a, double b);

/// psi ~ U[0, 2pi), epsilon = 0.15 Beta(5,2), delta = (0.15 deg) Beta(5,2).
ChannelParams sample_channel_params(Rng& rng);

/// Transmitter I/Q imbalance:
///   [I'; Q'] = diag(1+eps, 1-eps) * [[cos d, -sin d], [-sin d, cos d]] * [I; Q]
ComplexSample apply_iq_imbalance(ComplexSample y, double epsilon, double delta) noexcept;

/// Noiseless part of the channel, exp(j psi) f_IQ(symbol).
ComplexSample distort(ComplexSample symbol, const ChannelParams& params) noexcept;

/// Received sample for a transmitted label. Noise is CN(0, 1/snr_linear).
/// Throws std::invalid_argument when snr_linear <= 0.
ComplexSample transmit(Label y, const Constellation& constellation, const ChannelParams& params,
                       double snr_linear, Rng& rng);

/// One channel realisation shared by n_pilots pilots and n_test test pairs,
/// labels uniform over the constellation.
Frame generate_frame(std::size_t n_pilots, std::size_t n_test, double snr_linear,
                     const Constellation& constellation, Rng& rng);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace cpdemod
