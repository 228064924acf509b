#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagopt/data.hpp"
#include "tagopt/methods.hpp"
#include "tagopt/metrics.hpp"
#include "tagopt/optim.hpp"

namespace tagopt {

/// A parsed method name such as "tag-rmsprop", "er" or "agem+tag-rmsprop".
struct MethodSpec {
  std::string name;
  MethodKind method = MethodKind::kNone;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  bool stable_sgd = false;
  bool multitask = false;
};

MethodSpec parse_method(std::string_view name);

/// beta2 used when a config leaves it unset: 0.999 for Adam variants, 0.99 otherwise.
double default_beta2(OptimizerKind kind);

enum class EvalSplit { kTest, kValidation };

struct RunConfig {
  std::string method = "naive-sgd";
  OptimConfig optim;
  std::optional<double> beta2;  // overrides optim.beta2; unset means default_beta2
  std::vector<std::size_t> hidden{32};
  std::size_t batch_size = 10;
  std::size_t epochs_per_task = 1;
  double dropout = 0.0;
  double lr_decay = 0.9;  // stable-sgd only
  double ewc_lambda = 1.0;
  std::size_t memory_per_class = 1;
  std::size_t memory_batch = 0;  // 0 means equal to batch_size
  std::size_t fisher_max_examples = 1000;
  AlphaTraceMode alpha_trace = AlphaTraceMode::kMean;
  EvalSplit eval_split = EvalSplit::kTest;
  bool keep_state = false;  // copy the final knowledge base / episodic memory into the result

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// optim with beta2 resolved for the method's optimizer.
  [[nodiscard]] OptimConfig resolved_optim() const;
};

struct RunResult {
  std::string method;
  std::uint64_t seed = 0;
  AccuracyMatrix accuracy;
  double final_accuracy = 0.0;
  std::optional<double> forgetting;  // absent for a single-task stream
  double learning_accuracy = 0.0;
  std::vector<std::size_t> task_steps;
  std::vector<double> task_seconds;
  AlphaTrace alpha;
  bool has_alpha = false;
  std::optional<KnowledgeBase> knowledge_base;
  std::optional<EpisodicMemory> memory;

  [[nodiscard]] double total_seconds() const;
};

/// Trains the stream's tasks in order and evaluates every seen task after each one.
RunResult run_stream(const TaskStream& stream, const RunConfig& cfg, std::uint64_t seed);

/// Trains on the union of all tasks with mixed batches routed to each row's head. Every
/// row of the returned matrix is the same jointly trained model's accuracies.
RunResult run_multitask(const TaskStream& stream, const RunConfig& cfg, std::uint64_t seed);

/// Mean test accuracy over all tasks after joint training.
double multitask_upper_bound(const TaskStream& stream, const RunConfig& cfg, std::uint64_t seed);

struct GridRow {
  std::size_t index = 0;  // position in the grid
  double validation_accuracy = 0.0;
  std::optional<double> validation_forgetting;
};

struct GridResult {
  std::vector<GridRow> rows;  // ranked best first
  std::size_t best_index = 0;
  std::vector<std::vector<RunResult>> runs;  // [config][seed], validation-split runs
};

/// Runs every config on a 90/10 split of each task's training data and ranks them by
/// final validation accuracy (mean over seeds), then lower forgetting, then grid order.
GridResult grid_search(const TaskStream& stream, std::span<const RunConfig> grid,
                       std::span<const std::uint64_t> seeds, double train_fraction = 0.9);

/// Runs fn(i) for i in [0, n) across OpenMP threads and rethrows the first failure.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tagopt
