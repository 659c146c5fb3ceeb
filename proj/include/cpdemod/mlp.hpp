#pragma once

// Fully connected ReLU network with a softmax head. Parameters live in one
// contiguous vector so optimisers act on them with plain vector expressions;
// per-layer matrices are Eigen::Map views into that storage.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace cpdemod {

inline constexpr std::size_t kHiddenLayers = 3;
inline constexpr std::size_t kLayers = kHiddenLayers + 1;

struct ModelArch {
  int input_dim = 2;
  std::array<int, kHiddenLayers> hidden{16, 16, 16};
  int output_dim = 4;

  int fan_in(std::size_t layer) const { return layer == 0 ? input_dim : hidden[layer - 1]; }
  int fan_out(std::size_t layer) const { return layer == kHiddenLayers ? output_dim : hidden[layer]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < kLayers; ++l)
      n += static_cast<std::size_t>(fan_out(l)) * static_cast<std::size_t>(fan_in(l) + 1);
    return n;
  }

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("layer widths must be >= 1");
    for (int h : hidden)
      if (h < 1) throw std::invalid_argument("layer widths must be >= 1");
  }

  friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

template <typename Scalar>
class MlpParameters {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  MlpParameters() = default;
  explicit MlpParameters(const ModelArch& arch)
      : arch_(arch), values_(Vector::Zero(static_cast<Eigen::Index>(arch.parameter_count()))) {
    arch_.validate();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < kLayers; ++l) {
      weight_offset_[l] = offset;
      offset += static_cast<std::size_t>(arch.fan_out(l) * arch.fan_in(l));
      bias_offset_[l] = offset;
      offset += static_cast<std::size_t>(arch.fan_out(l));
    }
  }

  const ModelArch& arch() const noexcept { return arch_; }

  /// Flat view of every weight and bias, layer by layer.
  Vector& values() noexcept { return values_; }
  const Vector& values() const noexcept { return values_; }

  MatrixMap weight(std::size_t l) {
    return MatrixMap(values_.data() + weight_offset_[l], arch_.fan_out(l), arch_.fan_in(l));
  }
  ConstMatrixMap weight(std::size_t l) const {
    return ConstMatrixMap(values_.data() + weight_offset_[l], arch_.fan_out(l), arch_.fan_in(l));
  }
  VectorMap bias(std::size_t l) { return VectorMap(values_.data() + bias_offset_[l], arch_.fan_out(l)); }
  ConstVectorMap bias(std::size_t l) const {
    return ConstVectorMap(values_.data() + bias_offset_[l], arch_.fan_out(l));
  }

  bool all_finite() const { return values_.allFinite(); }

  template <typename Other>
  MlpParameters<Other> cast() const {
    MlpParameters<Other> out(arch_);
    out.values() = values_.template cast<Other>();
    return out;
  }

  friend bool operator==(const MlpParameters& a, const MlpParameters& b) {
    return a.arch_ == b.arch_ && a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  ModelArch arch_;
  Vector values_;
  std::array<std::size_t, kLayers> weight_offset_{};
  std::array<std::size_t, kLayers> bias_offset_{};
};

template <typename Scalar>
using InputBatch = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

template <typename Scalar>
using ProbabilityMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Column-wise softmax with max subtraction.
template <typename Derived>
auto softmax_columns(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix shifted = logits.rowwise() - logits.colwise().maxCoeff();
  Matrix e = shifted.array().exp().matrix();
  return Matrix(e.array().rowwise() / e.colwise().sum().array());
}

/// Logits for a batch of inputs (one column per sample).
template <typename Scalar, typename Derived>
ProbabilityMatrix<Scalar> mlp_logits(const MlpParameters<Scalar>& w, const Eigen::MatrixBase<Derived>& inputs) {
  ProbabilityMatrix<Scalar> a = inputs;
  for (std::size_t l = 0; l < kLayers; ++l) {
    ProbabilityMatrix<Scalar> z = (w.weight(l) * a).colwise() + w.bias(l);
    if (l < kHiddenLayers) z = z.cwiseMax(Scalar(0));
    a = std::move(z);
  }
  return a;
}

/// Softmax output, output_dim x batch.
template <typename Scalar, typename Derived>
ProbabilityMatrix<Scalar> mlp_probabilities(const MlpParameters<Scalar>& w,
                                            const Eigen::MatrixBase<Derived>& inputs) {
  return softmax_columns(mlp_logits(w, inputs));
}

/// Probabilities below this are raised to it before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean clamped cross-entropy over a batch and its exact gradient. A sample
/// whose true-label probability sits on the floor contributes a constant to
/// the loss and nothing to the gradient.
template <typename Scalar, typename Derived>
Scalar mlp_loss_and_gradient(const MlpParameters<Scalar>& w, const Eigen::MatrixBase<Derived>& inputs,
                             std::span<const int> labels, MlpParameters<Scalar>* gradient) {
  using Matrix = ProbabilityMatrix<Scalar>;
  const Eigen::Index n = inputs.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("batch must be nonempty and match the label count");

  std::array<Matrix, kLayers + 1> act;  // act[0] = inputs, act[l+1] = output of layer l
  std::array<Matrix, kHiddenLayers> pre;
  act[0] = inputs;
  for (std::size_t l = 0; l < kLayers; ++l) {
    Matrix z = (w.weight(l) * act[l]).colwise() + w.bias(l);
    if (l < kHiddenLayers) {
      act[l + 1] = z.cwiseMax(Scalar(0));
      pre[l] = std::move(z);
    } else {
      act[l + 1] = softmax_columns(z);
    }
  }

  Matrix& probs = act[kLayers];
  const Scalar floor(kProbabilityFloor);
  Scalar loss(0);
  Matrix delta = probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probs.rows()) throw std::out_of_range("label outside the output space");
    const Scalar p = probs(y, i);
    if (p < floor) {
      loss -= std::log(floor);
      delta.col(i).setZero();
    } else {
      loss -= std::log(p);
      delta(y, i) -= Scalar(1);
    }
  }
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  loss *= inv_n;
  if (gradient == nullptr) return loss;

  if (!(gradient->arch() == w.arch())) *gradient = MlpParameters<Scalar>(w.arch());
  delta *= inv_n;
  for (std::size_t l = kLayers; l-- > 0;) {
    gradient->weight(l).noalias() = delta * act[l].transpose();
    gradient->bias(l) = delta.rowwise().sum();
    if (l == 0) break;
    Matrix back = w.weight(l).transpose() * delta;
    delta = (pre[l - 1].array() > Scalar(0)).select(back, Scalar(0));
  }
  return loss;
}

}  // namespace cpdemod
