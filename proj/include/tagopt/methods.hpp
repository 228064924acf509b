#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tagopt/data.hpp"
#include "tagopt/net.hpp"
#include "tagopt/optim.hpp"

namespace tagopt {

// ---------------------------------------------------------------------------
// Episodic memory

struct MemoryExample {
  std::vector<double> features;
  std::size_t task = 0;
  int label = 0;

  friend bool operator==(const MemoryExample&, const MemoryExample&) = default;
};

/// Per-(task, class) reservoir buffers holding at most `capacity_per_class` examples each.
class EpisodicMemory {
 public:
  using Key = std::pair<std::size_t, int>;  // (task, class)

  EpisodicMemory(std::size_t capacity_per_class, std::uint64_t seed);

  /// Reservoir sampling: the k-th example of a class replaces a uniform slot with
  /// probability capacity / k once the buffer is full.
  void insert(std::span<const double> features, std::size_t task, int label);

  /// Uniform draw of `batch_size` stored examples from tasks other than `exclude_task`,
  /// grouped into one batch per task in ascending task order. Draws without replacement
  /// when enough examples are stored, otherwise with replacement. Empty when nothing
  /// outside the excluded task is stored.
  std::vector<TaskBatch> sample(std::size_t batch_size, std::size_t exclude_task);

  [[nodiscard]] std::size_t capacity_per_class() const noexcept { return capacity_; }
  [[nodiscard]] std::size_t size() const noexcept;
  [[nodiscard]] std::size_t seen(std::size_t task, int label) const;
  [[nodiscard]] const std::map<Key, std::vector<MemoryExample>>& buffers() const noexcept {
    return buffers_;
  }

  /// CSV with columns task, class, f0, f1, ... (task is 1-based).
  void write_csv(std::ostream& out) const;

 private:
  std::size_t capacity_;
  Rng rng_;
  std::map<Key, std::vector<MemoryExample>> buffers_;
  std::map<Key, std::size_t> seen_;
};

// ---------------------------------------------------------------------------
// EWC

struct FisherAnchor {
  std::size_t task = 0;
  std::vector<double> fisher;  // diagonal, >= 0
  ParamVector anchor;
};

/// Mean of squared per-example loss gradients (evaluation mode) over at most
/// `max_examples` examples; anchors at the current parameters.
FisherAnchor ewc_fisher_estimate(const MultiHeadNet& net, std::span<const TaskBatch> data,
                                 std::size_t max_examples = 1000);

/// g + lambda * sum_anchors F (theta - theta*)
GradVector ewc_penalized_grad(std::span<const double> g, std::span<const double> theta,
                              std::span<const FisherAnchor> anchors, double lambda);

// ---------------------------------------------------------------------------
// A-GEM, ER, Stable SGD

/// Projects g so it does not increase the reference loss to first order.
GradVector agem_project(std::span<const double> g, std::span<const double> g_ref);

/// (g_batch + g_mem) / 2
GradVector er_combined_grad(std::span<const double> g_batch, std::span<const double> g_mem);

struct StableSgdSchedule {
  double init_lr = 0.1;
  double decay_per_task = 0.9;
  double dropout = 0.0;

  void validate() const;
};

/// init_lr * decay^(task_index - 1), task_index is 1-based.
double stable_sgd_lr(const StableSgdSchedule& schedule, std::size_t task_index);

// ---------------------------------------------------------------------------
// Method composition

enum class MethodKind { kNone, kEwc, kAgem, kEr };

struct MethodConfig {
  MethodKind kind = MethodKind::kNone;
  double ewc_lambda = 1.0;
  std::size_t memory_per_class = 1;
  std::size_t memory_batch = 10;
  std::size_t fisher_max_examples = 1000;
  std::uint64_t seed = 0;
};

/// Gradient-modifying lifelong-learning method wrapped around any inner optimizer.
class ContinualMethod {
 public:
  explicit ContinualMethod(MethodConfig cfg);

  [[nodiscard]] MethodKind kind() const noexcept { return cfg_.kind; }
  [[nodiscard]] const MethodConfig& config() const noexcept { return cfg_; }

  /// One training step: method-adjusted gradient consumed by `inner`. Returns the batch loss.
  double step(MultiHeadNet& net, const TaskBatch& batch, Optimizer& inner, Rng* dropout_rng);

  /// Task-boundary bookkeeping (EWC anchors). `train` is the finished task's training data.
  void end_task(const MultiHeadNet& net, const LabeledDataset& train, std::size_t task);

  [[nodiscard]] const EpisodicMemory* memory() const noexcept {
    return memory_.has_value() ? &*memory_ : nullptr;
  }
  [[nodiscard]] const std::vector<FisherAnchor>& anchors() const noexcept { return anchors_; }

 private:
  MethodConfig cfg_;
  std::optional<EpisodicMemory> memory_;
  std::vector<FisherAnchor> anchors_;
};

/// Free-function form of ContinualMethod::step.
double hybrid_step(ContinualMethod& method, Optimizer& inner, MultiHeadNet& net,
                   const TaskBatch& batch, Rng* dropout_rng);

}  // namespace tagopt
