#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace tagopt {

/// Lower-triangular a(t, tau), tau <= t, indexed 1-based as in the metric definitions.
/// Rows are appended in task order; row t holds accuracies on tasks 1..t after task t.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t num_tasks);

  [[nodiscard]] std::size_t num_tasks() const noexcept { return num_tasks_; }
  [[nodiscard]] std::size_t rows_filled() const noexcept { return rows_.size(); }

  /// Appends row t = rows_filled() + 1, which must hold exactly t entries in [0, 1].
  void push_row(std::span<const double> row);

  [[nodiscard]] double at(std::size_t t, std::size_t tau) const;
  [[nodiscard]] std::span<const double> row(std::size_t t) const;

  /// CSV with columns t, tau, accuracy (1-based).
  void write_csv(std::ostream& out) const;
  static AccuracyMatrix read_csv(std::istream& in, std::size_t num_tasks);

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  void require_row(std::size_t t, const char* what) const;

  std::size_t num_tasks_ = 0;
  std::vector<std::vector<double>> rows_;
};

/// Mean of row t.
double accuracy_at(const AccuracyMatrix& a, std::size_t t);
/// (1/(t-1)) sum_{tau<t} max_{t'<t} (a(t', tau) - a(t, tau)); DomainError when t < 2.
double forgetting_at(const AccuracyMatrix& a, std::size_t t);
/// Mean of the diagonal a(1,1) .. a(t,t).
double learning_accuracy_at(const AccuracyMatrix& a, std::size_t t);

enum class AlphaTraceMode { kOff, kMean, kFull };

/// Correlation weights recorded during a TAG run. Keeps a running mean per (t, tau) and,
/// in full mode, every step's weights.
class AlphaTrace {
 public:
  struct Step {
    std::size_t task = 0;  // t, 1-based
    std::size_t step = 0;  // within-task step, 1-based
    std::vector<double> alphas;  // tau = 1..t
  };

  AlphaTrace() = default;
  AlphaTrace(std::size_t num_tasks, AlphaTraceMode mode);

  [[nodiscard]] AlphaTraceMode mode() const noexcept { return mode_; }
  [[nodiscard]] bool empty() const noexcept;

  /// Records the weights used at one step of task t; `alphas` has length t.
  void record(std::size_t t, std::span<const double> alphas);

  [[nodiscard]] std::size_t count(std::size_t t) const;
  [[nodiscard]] double mean(std::size_t t, std::size_t tau) const;
  [[nodiscard]] const std::vector<Step>& steps() const noexcept { return steps_; }

  /// Columns t, tau, alpha_mean, alpha_min, alpha_max. The min and max are taken over the
  /// past tasks tau' < t of the mean weights for task t.
  void write_csv(std::ostream& out) const;
  /// Columns t, step, tau, alpha.
  void write_steps_csv(std::ostream& out) const;

 private:
  AlphaTraceMode mode_ = AlphaTraceMode::kOff;
  std::vector<std::vector<double>> sums_;  // [t-1][tau-1]
  std::vector<std::size_t> counts_;        // [t-1]
  std::vector<Step> steps_;
};

}  // namespace tagopt
