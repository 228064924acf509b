#include "tagopt/optim.hpp"

#include <cmath>
#include <string>

#include "tagopt/errors.hpp"
#include "tagopt/kernels.hpp"

namespace tagopt {

void OptimConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("optim: eta must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optim: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optim: beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("optim: epsilon must be > 0");
  if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("optim: b must be >= 0");
}

void sgd_step(std::span<double> theta, std::span<const double> g, double eta) {
  kernels::axpy(theta, -eta, g);
}

void rmsprop_step(std::span<double> theta, std::span<const double> g, std::span<double> v,
                  const OptimConfig& cfg) {
  require_same_size(theta.size(), g.size(), "rmsprop_step");
  kernels::ema_square(v, g, cfg.beta2);
  kernels::scaled_rsqrt_step(theta, g, v, cfg.eta, cfg.epsilon);
}

void adagrad_step(std::span<double> theta, std::span<const double> g, std::span<double> v,
                  const OptimConfig& cfg) {
  require_same_size(theta.size(), g.size(), "adagrad_step");
  kernels::accumulate_square(v, g);
  kernels::scaled_rsqrt_step(theta, g, v, cfg.eta, cfg.epsilon);
}

namespace {

double adam_scale(const OptimConfig& cfg, std::size_t n) {
  const auto nd = static_cast<double>(n);
  return cfg.eta * std::sqrt(1.0 - std::pow(cfg.beta2, nd)) / (1.0 - std::pow(cfg.beta1, nd));
}

}  // namespace

void adam_step(std::span<double> theta, std::span<const double> g, AdamState& state,
               const OptimConfig& cfg) {
  require_same_size(theta.size(), g.size(), "adam_step");
  kernels::ema(state.m, g, cfg.beta1);
  kernels::ema_square(state.v, g, cfg.beta2);
  ++state.step;
  kernels::scaled_rsqrt_step(theta, state.m, state.v, adam_scale(cfg, state.step), cfg.epsilon);
}

void tag_rmsprop_step(std::span<double> theta, std::span<const double> g,
                      const KnowledgeBase& kb, const OptimConfig& cfg,
                      std::vector<double>* alphas_out) {
  require_same_size(theta.size(), g.size(), "tag_rmsprop_step");
  require_same_size(theta.size(), kb.param_count(), "tag_rmsprop_step");
  auto alphas = kb.task() > 1 ? tag_alphas(kb, cfg.b) : std::vector<double>{};
  const auto wv = tag_weighted_second_moment(kb, alphas);
  kernels::scaled_rsqrt_step(theta, g, wv, cfg.eta, cfg.epsilon);
  if (alphas_out) *alphas_out = std::move(alphas);
}

void tag_adagrad_step(std::span<double> theta, std::span<const double> g,
                      const KnowledgeBase& kb, const OptimConfig& cfg,
                      std::vector<double>* alphas_out) {
  if (kb.mode() != MomentAccumulation::kCumulative) {
    throw StateError("tag_adagrad_step: knowledge base must accumulate cumulatively");
  }
  tag_rmsprop_step(theta, g, kb, cfg, alphas_out);
}

void tag_adam_step(std::span<double> theta, std::span<const double> g, const KnowledgeBase& kb,
                   const OptimConfig& cfg, std::vector<double>* alphas_out) {
  require_same_size(theta.size(), g.size(), "tag_adam_step");
  require_same_size(theta.size(), kb.param_count(), "tag_adam_step");
  if (kb.step() == 0) throw StateError("tag_adam_step: knowledge base has no step for this task");
  auto alphas = kb.task() > 1 ? tag_alphas(kb, cfg.b) : std::vector<double>{};
  const auto wv = tag_weighted_second_moment(kb, alphas);
  kernels::scaled_rsqrt_step(theta, kb.current_first(), wv, adam_scale(cfg, kb.step()),
                             cfg.epsilon);
  if (alphas_out) *alphas_out = std::move(alphas);
}

// ---------------------------------------------------------------------------

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kAdagrad: return "adagrad";
    case OptimizerKind::kRmsprop: return "rmsprop";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kTagAdagrad: return "tag-adagrad";
    case OptimizerKind::kTagRmsprop: return "tag-rmsprop";
    case OptimizerKind::kTagAdam: return "tag-adam";
  }
  return "?";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  for (auto k : {OptimizerKind::kSgd, OptimizerKind::kAdagrad, OptimizerKind::kRmsprop,
                 OptimizerKind::kAdam, OptimizerKind::kTagAdagrad, OptimizerKind::kTagRmsprop,
                 OptimizerKind::kTagAdam}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

bool is_tag(OptimizerKind kind) {
  return kind == OptimizerKind::kTagAdagrad || kind == OptimizerKind::kTagRmsprop ||
         kind == OptimizerKind::kTagAdam;
}

void Optimizer::set_learning_rate(double eta) {
  OptimConfig next = cfg_;
  next.eta = eta;
  next.validate();
  cfg_ = next;
}

namespace {

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(const OptimConfig& cfg) : Optimizer(cfg) {}
  void step(std::span<double> theta, std::span<const double> g) override {
    require_same_size(theta.size(), g.size(), "sgd");
    sgd_step(theta, g, cfg_.eta);
  }
};

class AdagradOptimizer final : public Optimizer {
 public:
  AdagradOptimizer(std::size_t n, const OptimConfig& cfg, bool reset)
      : Optimizer(cfg), v_(n, 0.0), reset_(reset) {}
  void step(std::span<double> theta, std::span<const double> g) override {
    adagrad_step(theta, g, v_, cfg_);
  }
  void begin_task() override {
    if (reset_) v_.assign(v_.size(), 0.0);
  }

 private:
  std::vector<double> v_;
  bool reset_;
};

class RmspropOptimizer final : public Optimizer {
 public:
  RmspropOptimizer(std::size_t n, const OptimConfig& cfg) : Optimizer(cfg), v_(n, 0.0) {}
  void step(std::span<double> theta, std::span<const double> g) override {
    rmsprop_step(theta, g, v_, cfg_);
  }

 private:
  std::vector<double> v_;
};

class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(std::size_t n, const OptimConfig& cfg) : Optimizer(cfg), state_(n) {}
  void step(std::span<double> theta, std::span<const double> g) override {
    adam_step(theta, g, state_, cfg_);
  }

 private:
  AdamState state_;
};

class TagOptimizer final : public Optimizer {
 public:
  TagOptimizer(OptimizerKind kind, std::size_t n, const OptimConfig& cfg)
      : Optimizer(cfg),
        kind_(kind),
        kb_(n, kind == OptimizerKind::kTagAdagrad ? MomentAccumulation::kCumulative
                                                   : MomentAccumulation::kExponential) {}

  void step(std::span<double> theta, std::span<const double> g) override {
    kb_.update(g, cfg_);
    switch (kind_) {
      case OptimizerKind::kTagRmsprop: tag_rmsprop_step(theta, g, kb_, cfg_, &alphas_); break;
      case OptimizerKind::kTagAdagrad: tag_adagrad_step(theta, g, kb_, cfg_, &alphas_); break;
      case OptimizerKind::kTagAdam: tag_adam_step(theta, g, kb_, cfg_, &alphas_); break;
      default: throw StateError("TagOptimizer: not a TAG kind");
    }
  }
  void end_task() override { kb_.commit_task(); }
  void begin_task() override {
    kb_.begin_task();
    alphas_.clear();
  }
  [[nodiscard]] std::span<const double> last_alphas() const override { return alphas_; }
  [[nodiscard]] const KnowledgeBase* knowledge_base() const override { return &kb_; }

 private:
  OptimizerKind kind_;
  KnowledgeBase kb_;
  std::vector<double> alphas_;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::size_t param_count,
                                          const OptimConfig& cfg, OptimizerOptions options) {
  switch (kind) {
    case OptimizerKind::kSgd: return std::make_unique<SgdOptimizer>(cfg);
    case OptimizerKind::kAdagrad:
      return std::make_unique<AdagradOptimizer>(param_count, cfg, options.adagrad_reset_per_task);
    case OptimizerKind::kRmsprop: return std::make_unique<RmspropOptimizer>(param_count, cfg);
    case OptimizerKind::kAdam: return std::make_unique<AdamOptimizer>(param_count, cfg);
    case OptimizerKind::kTagAdagrad:
    case OptimizerKind::kTagRmsprop:
    case OptimizerKind::kTagAdam:
      return std::make_unique<TagOptimizer>(kind, param_count, cfg);
  }
  throw ConfigError("make_optimizer: unknown kind");
}

}  // namespace tagopt
