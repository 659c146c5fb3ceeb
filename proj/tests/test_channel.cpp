#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cpdemod/channel.hpp"

using namespace cpdemod;

TEST_CASE("qpsk constellation") {
  const Constellation c = make_qpsk();
  REQUIRE(c.size() == 4);
  CHECK(c[0].real() == doctest::Approx(0.7071068).epsilon(1e-7));
  CHECK(c[0].imag() == doctest::Approx(0.7071068).epsilon(1e-7));
  CHECK(c[1].real() < 0);
  CHECK(c[1].imag() > 0);
  CHECK(c[2].real() < 0);
  CHECK(c[2].imag() < 0);
  CHECK(c[3].real() > 0);
  CHECK(c[3].imag() < 0);
  CHECK(c.mean_energy() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("constellation validation") {
  CHECK_THROWS_AS((Constellation{{{1, 0}}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Constellation{{{1, 0}, {1, 0}}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Constellation{{{2, 0}, {-2, 0}}}.validate()), std::invalid_argument);
  CHECK_NOTHROW((Constellation{{{1, 0}, {-1, 0}}}.validate()));
}

TEST_CASE("channel parameter distribution") {
  Rng rng = make_rng(11);
  constexpr int kDraws = 100000;
  double eps_sum = 0, psi_sum = 0, delta_sum = 0;
  double eps_delta = 0, eps_sq = 0, delta_sq = 0;
  for (int i = 0; i < kDraws; ++i) {
    const ChannelParams p = sample_channel_params(rng);
    REQUIRE(p.epsilon >= 0.0);
    REQUIRE(p.epsilon <= 0.15);
    REQUIRE(p.delta >= 0.0);
    REQUIRE(p.delta <= 0.15 * std::numbers::pi / 180.0);
    REQUIRE(p.psi >= 0.0);
    REQUIRE(p.psi < 2.0 * std::numbers::pi);
    eps_sum += p.epsilon;
    psi_sum += p.psi;
    delta_sum += p.delta;
    eps_delta += p.epsilon * p.delta;
    eps_sq += p.epsilon * p.epsilon;
    delta_sq += p.delta * p.delta;
  }
  const double eps_mean = eps_sum / kDraws, delta_mean = delta_sum / kDraws;
  // Beta(5,2) has mean 5/7.
  CHECK(std::abs(eps_mean - 0.15 * 5.0 / 7.0) < 0.002);
  CHECK(std::abs(psi_sum / kDraws - std::numbers::pi) < 0.02);
  CHECK(std::abs(delta_mean / kDeltaMax - 5.0 / 7.0) < 0.002 / 0.15);

  const double cov = eps_delta / kDraws - eps_mean * delta_mean;
  const double corr = cov / std::sqrt((eps_sq / kDraws - eps_mean * eps_mean) * (delta_sq / kDraws - delta_mean * delta_mean));
  CHECK(std::abs(corr) < 0.02);
}

TEST_CASE("beta sampler second moment") {
  // Var Beta(5,2) = ab / ((a+b)^2 (a+b+1)) = 10 / 392.
  Rng rng = make_rng(5);
  double s = 0, s2 = 0;
  constexpr int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double b = sample_beta(rng, 5.0, 2.0);
    s += b;
    s2 += b * b;
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(var == doctest::Approx(10.0 / 392.0).epsilon(0.03));
}

TEST_CASE("iq imbalance") {
  const ComplexSample a = apply_iq_imbalance({1, 1}, 0.0, 0.0);
  CHECK(a == ComplexSample{1, 1});

  const ComplexSample b = apply_iq_imbalance({1, 1}, 0.15, 0.0);
  CHECK(b.real() == doctest::Approx(1.15));
  CHECK(b.imag() == doctest::Approx(0.85));

  // cos = 0, sin = 1: [I; Q] = [[0, -1], [-1, 0]] [1; 0] = [0; -1]
  const ComplexSample c = apply_iq_imbalance({1, 0}, 0.0, std::numbers::pi / 2);
  CHECK(c.real() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(c.imag() == doctest::Approx(-1.0));

  // Symmetric matrix: (0,1) maps to (-sin d, cos d) before scaling.
  const double d = 0.3;
  const ComplexSample e = apply_iq_imbalance({0, 1}, 0.1, d);
  CHECK(e.real() == doctest::Approx(-1.1 * std::sin(d)));
  CHECK(e.imag() == doctest::Approx(0.9 * std::cos(d)));
}

TEST_CASE("iq imbalance with zero parameters is the identity") {
  Rng rng = make_rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const ComplexSample y{n(rng), n(rng)};
    CHECK(apply_iq_imbalance(y, 0.0, 0.0) == y);
  }
}

TEST_CASE("noiseless channel") {
  const Constellation c = make_qpsk();
  for (Label y = 0; y < 4; ++y) {
    CHECK(distort(c[y], {}) == c[y]);
    const ComplexSample half = distort(c[y], {std::numbers::pi, 0.0, 0.0});
    CHECK(half.real() == doctest::Approx(-c[y].real()).epsilon(1e-12));
    CHECK(half.imag() == doctest::Approx(-c[y].imag()).epsilon(1e-12));

    Rng rng = make_rng(1);
    const ComplexSample x = transmit(y, c, {}, 1e30, rng);
    CHECK(std::abs(x - c[y]) < 1e-12);
  }
}

TEST_CASE("transmit rejects non-positive snr") {
  Rng rng = make_rng(1);
  const Constellation c = make_qpsk();
  CHECK_THROWS_AS(transmit(0, c, {}, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(transmit(0, c, {}, -1.0, rng), std::invalid_argument);
}

TEST_CASE("noise power at 5 dB") {
  const Constellation c = make_qpsk();
  const double snr = db_to_linear(5.0);
  Rng rng = make_rng(99);
  constexpr int n = 100000;
  double vi = 0, vq = 0;
  for (int i = 0; i < n; ++i) {
    const ComplexSample v = transmit(2, c, {}, snr, rng) - c[2];
    vi += v.real() * v.real();
    vq += v.imag() * v.imag();
  }
  const double per_component = 1.0 / (2.0 * std::pow(10.0, 0.5));
  CHECK(per_component == doctest::Approx(0.15811).epsilon(1e-4));
  CHECK(vi / n == doctest::Approx(per_component).epsilon(0.01));
  CHECK(vq / n == doctest::Approx(per_component).epsilon(0.01));
  CHECK((vi + vq) / n == doctest::Approx(1.0 / snr).epsilon(0.01));
}

TEST_CASE("transmit is deterministic given the rng state") {
  const Constellation c = make_qpsk();
  const ChannelParams p{1.0, 0.1, 0.001};
  Rng a = make_rng(42), b = make_rng(42);
  for (int i = 0; i < 100; ++i) CHECK(transmit(i % 4, c, p, 3.0, a) == transmit(i % 4, c, p, 3.0, b));
}

TEST_CASE("frame generation") {
  const Constellation c = make_qpsk();
  SUBCASE("shape and shared parameters") {
    Rng rng = make_rng(8);
    const Frame f = generate_frame(10, 100, 1e30, c, rng);
    CHECK(f.pilots.size() == 10);
    CHECK(f.tests.size() == 100);
    for (const auto* set : {&f.pilots, &f.tests})
      for (const auto& s : *set) {
        REQUIRE(s.y >= 0);
        REQUIRE(s.y < 4);
        CHECK(std::abs(s.x - distort(c[s.y], f.params)) < 1e-12);
      }
  }
  SUBCASE("same seed gives identical frames") {
    Rng a = make_rng(77), b = make_rng(77);
    const Frame fa = generate_frame(20, 30, 3.16, c, a);
    const Frame fb = generate_frame(20, 30, 3.16, c, b);
    CHECK(fa.params.psi == fb.params.psi);
    CHECK(fa.params.epsilon == fb.params.epsilon);
    CHECK(fa.params.delta == fb.params.delta);
    for (std::size_t i = 0; i < fa.pilots.size(); ++i) {
      CHECK(fa.pilots[i].x == fb.pilots[i].x);
      CHECK(fa.pilots[i].y == fb.pilots[i].y);
    }
    for (std::size_t i = 0; i < fa.tests.size(); ++i) CHECK(fa.tests[i].x == fb.tests[i].x);
  }
  SUBCASE("zero counts rejected") {
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(generate_frame(0, 10, 1.0, c, rng), std::invalid_argument);
    CHECK_THROWS_AS(generate_frame(10, 0, 1.0, c, rng), std::invalid_argument);
  }
}

TEST_CASE("pilot labels are uniform") {
  const Constellation c = make_qpsk();
  Rng rng = make_rng(2024);
  std::array<double, 4> hist{};
  for (int f = 0; f < 10000; ++f) {
    const Frame frame = generate_frame(10, 1, 3.16, c, rng);
    for (const auto& p : frame.pilots) hist[static_cast<std::size_t>(p.y)] += 1;
  }
  const double expected = 10000.0 * 10.0 / 4.0;
  double chi2 = 0;
  for (double h : hist) chi2 += (h - expected) * (h - expected) / expected;
  // chi-square, 3 degrees of freedom, 0.01 upper quantile
  CHECK(chi2 < 11.345);
}
