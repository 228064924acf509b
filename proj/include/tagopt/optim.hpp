#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tagopt {

struct OptimConfig {
  double eta = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double b = 5.0;  // correlation strength in the alpha weights

  void validate() const;
};

// ---------------------------------------------------------------------------
// Naive optimizers. Each updates theta in place.

void sgd_step(std::span<double> theta, std::span<const double> g, double eta);

/// v <- beta2 v + (1 - beta2) g^2 ; theta <- theta - eta g / sqrt(v + eps)
void rmsprop_step(std::span<double> theta, std::span<const double> g, std::span<double> v,
                  const OptimConfig& cfg);

/// v <- v + g^2 ; theta <- theta - eta g / sqrt(v + eps)
void adagrad_step(std::span<double> theta, std::span<const double> g, std::span<double> v,
                  const OptimConfig& cfg);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam with eps inside the square root:
/// theta <- theta - eta sqrt(1 - beta2^n) / (1 - beta1^n) * m / sqrt(v + eps)
void adam_step(std::span<double> theta, std::span<const double> g, AdamState& state,
               const OptimConfig& cfg);

// ---------------------------------------------------------------------------
// Task-based accumulated gradients.

enum class MomentAccumulation {
  kExponential,  // V <- beta2 V + (1 - beta2) g^2   (TAG-RMSProp, TAG-Adam)
  kCumulative,   // V <- V + g^2                     (TAG-Adagrad)
};

/// Per-task first and second moments. Moments of finished tasks are frozen on commit;
/// the running pair belongs to the current task and restarts from zero at each task.
class KnowledgeBase {
 public:
  struct TaskMoments {
    std::vector<double> first;
    std::vector<double> second;
    std::size_t steps = 0;

    friend bool operator==(const TaskMoments&, const TaskMoments&) = default;
  };

  KnowledgeBase(std::size_t param_count, MomentAccumulation mode);

  /// Advances the current task's moments by one gradient.
  void update(std::span<const double> g, const OptimConfig& cfg);
  /// Freezes the current task's moments and closes the task.
  void commit_task();
  /// Opens the next task with zeroed moments. Required after every commit.
  void begin_task();

  [[nodiscard]] std::size_t param_count() const noexcept { return current_.first.size(); }
  [[nodiscard]] MomentAccumulation mode() const noexcept { return mode_; }
  /// 1-based index of the current task; equals frozen().size() + 1 while active.
  [[nodiscard]] std::size_t task() const noexcept { return frozen_.size() + 1; }
  [[nodiscard]] std::size_t step() const noexcept { return current_.steps; }
  [[nodiscard]] bool active() const noexcept { return active_; }

  [[nodiscard]] const std::vector<TaskMoments>& frozen() const noexcept { return frozen_; }
  [[nodiscard]] std::span<const double> current_first() const noexcept { return current_.first; }
  [[nodiscard]] std::span<const double> current_second() const noexcept {
    return current_.second;
  }

  /// Snapshot as CSV: a '#' header line, then one row per (task, moment).
  void write_csv(std::ostream& out) const;
  static KnowledgeBase read_csv(std::istream& in);

 private:
  MomentAccumulation mode_;
  std::vector<TaskMoments> frozen_;
  TaskMoments current_;
  bool active_ = true;
};

/// exp(-b * cos(m_cur, m_prev)); 1 when either norm is below 1e-12.
double tag_alpha(std::span<const double> m_cur, std::span<const double> m_prev, double b);

/// alpha_n(t, tau) for tau = 1..t against the current first moment. The last entry is the
/// current task's self-weight exp(-b).
std::vector<double> tag_alphas(const KnowledgeBase& kb, double b);

/// Alpha-weighted combination of all task second moments. On the first task this is the
/// running second moment unchanged.
std::vector<double> tag_weighted_second_moment(const KnowledgeBase& kb,
                                               std::span<const double> alphas);
std::vector<double> tag_weighted_second_moment(const KnowledgeBase& kb, const OptimConfig& cfg);

// The TAG steps expect kb.update(g, cfg) to have run for this step's gradient. When
// `alphas_out` is given it receives the weights used (empty on the first task).
void tag_rmsprop_step(std::span<double> theta, std::span<const double> g,
                      const KnowledgeBase& kb, const OptimConfig& cfg,
                      std::vector<double>* alphas_out = nullptr);
void tag_adagrad_step(std::span<double> theta, std::span<const double> g,
                      const KnowledgeBase& kb, const OptimConfig& cfg,
                      std::vector<double>* alphas_out = nullptr);
void tag_adam_step(std::span<double> theta, std::span<const double> g, const KnowledgeBase& kb,
                   const OptimConfig& cfg, std::vector<double>* alphas_out = nullptr);

// ---------------------------------------------------------------------------
// Stateful optimizer objects used by the training loop.

enum class OptimizerKind { kSgd, kAdagrad, kRmsprop, kAdam, kTagAdagrad, kTagRmsprop, kTagAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);
bool is_tag(OptimizerKind kind);

class Optimizer {
 public:
  virtual ~Optimizer() = default;

  /// Consumes one gradient and updates theta in place.
  virtual void step(std::span<double> theta, std::span<const double> g) = 0;
  /// Called once when the current task ends (after its last step).
  virtual void end_task() {}
  /// Called once before every task after the first.
  virtual void begin_task() {}

  /// Weights used by the most recent TAG step; empty for naive optimizers and on task 1.
  [[nodiscard]] virtual std::span<const double> last_alphas() const { return {}; }
  [[nodiscard]] virtual const KnowledgeBase* knowledge_base() const { return nullptr; }

  [[nodiscard]] const OptimConfig& config() const noexcept { return cfg_; }
  void set_learning_rate(double eta);

 protected:
  explicit Optimizer(OptimConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  OptimConfig cfg_;
};

struct OptimizerOptions {
  // Naive Adagrad normally accumulates over the whole stream; this restarts it per task.
  bool adagrad_reset_per_task = false;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::size_t param_count,
                                          const OptimConfig& cfg,
                                          OptimizerOptions options = {});

}  // namespace tagopt
