#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tagopt/matrix.hpp"

namespace tagopt {

using Rng = std::mt19937_64;

/// Derives an independent seed from (seed, salt) with the splitmix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Flat views of the full model. Both always have length MultiHeadNet::param_count().
using ParamVector = std::vector<double>;
using GradVector = std::vector<double>;

/// One mini-batch drawn from a single task. Labels are local to the task's head.
struct TaskBatch {
  Matrix features;
  std::size_t task = 0;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

struct NetShape {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // trunk widths; empty means heads sit on the input
  std::size_t classes_per_task = 0;
  std::size_t num_tasks = 0;
};

struct LossAndGrad {
  double loss = 0.0;
  GradVector grad;
};

/// Feed-forward ReLU trunk shared by all tasks plus one linear classifier head per task.
///
/// All weights live in a single flat parameter vector laid out as
/// [trunk layer 0 W, b, trunk layer 1 W, b, ..., head 0 W, b, head 1 W, b, ...],
/// with every W stored row-major as (out x in). Dropout, when enabled, applies to the
/// trunk activations only and uses inverted scaling.
class MultiHeadNet {
 public:
  struct Block {
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    std::size_t out = 0;
    std::size_t in = 0;
    [[nodiscard]] std::size_t size() const noexcept { return out * in + out; }
  };

  MultiHeadNet(NetShape shape, double dropout_rate, std::uint64_t init_seed);

  [[nodiscard]] const NetShape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t param_count() const noexcept { return params_.size(); }
  [[nodiscard]] double dropout_rate() const noexcept { return dropout_rate_; }
  void set_dropout_rate(double rate);

  [[nodiscard]] std::span<const double> params() const noexcept { return params_; }
  [[nodiscard]] std::span<double> params() noexcept { return params_; }
  void set_params(std::span<const double> values);

  [[nodiscard]] const std::vector<Block>& trunk() const noexcept { return trunk_; }
  [[nodiscard]] const Block& head(std::size_t task) const;

  /// Logits (batch x classes_per_task) for head `task`. Passing an RNG selects train
  /// mode, where dropout masks are drawn from it; nullptr is evaluation mode.
  [[nodiscard]] Matrix forward(const Matrix& features, std::size_t task,
                               Rng* dropout_rng = nullptr) const;

  /// Mean softmax cross-entropy and its exact gradient for the realized dropout mask.
  [[nodiscard]] LossAndGrad loss_and_grad(const TaskBatch& batch, Rng* dropout_rng = nullptr) const;

  /// Evaluation-mode loss without the gradient.
  [[nodiscard]] double loss(const TaskBatch& batch) const;

  /// Number of rows whose argmax logit equals the label (evaluation mode).
  [[nodiscard]] std::size_t count_correct(const Matrix& features, std::span<const int> labels,
                                          std::size_t task) const;

 private:
  void check_input(const Matrix& features, std::size_t task) const;
  void check_batch(const TaskBatch& batch) const;

  NetShape shape_;
  double dropout_rate_ = 0.0;
  std::vector<Block> trunk_;
  std::vector<Block> heads_;
  ParamVector params_;
};

/// Central-difference gradient of the evaluation-mode loss; a test oracle for backprop.
GradVector finite_diff_grad(const MultiHeadNet& net, const TaskBatch& batch, double h);

/// Size-weighted combination of per-task batches, i.e. the mean loss over the union of
/// all rows with each row routed to its own head.
LossAndGrad mixed_loss_and_grad(const MultiHeadNet& net, std::span<const TaskBatch> batches,
                                Rng* dropout_rng = nullptr);

}  // namespace tagopt
