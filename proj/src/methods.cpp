#include "tagopt/methods.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "tagopt/errors.hpp"
#include "tagopt/io.hpp"
#include "tagopt/kernels.hpp"

namespace tagopt {

namespace {

constexpr double kRefNormFloor = 1e-12;

// Size-weighted mean gradient over per-task memory batches.
GradVector memory_gradient(const MultiHeadNet& net, std::span<const TaskBatch> groups,
                           Rng* dropout_rng) {
  return mixed_loss_and_grad(net, groups, dropout_rng).grad;
}

}  // namespace

// ---------------------------------------------------------------------------

EpisodicMemory::EpisodicMemory(std::size_t capacity_per_class, std::uint64_t seed)
    : capacity_(capacity_per_class), rng_(seed) {
  if (capacity_ == 0) throw ConfigError("episodic memory: capacity per class must be >= 1");
}

void EpisodicMemory::insert(std::span<const double> features, std::size_t task, int label) {
  const Key key{task, label};
  auto& buf = buffers_[key];
  const std::size_t k = ++seen_[key];
  MemoryExample ex{std::vector<double>(features.begin(), features.end()), task, label};
  if (buf.size() < capacity_) {
    buf.push_back(std::move(ex));
    return;
  }
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  const std::size_t j = pick(rng_);
  if (j < capacity_) buf[j] = std::move(ex);
}

std::size_t EpisodicMemory::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [key, buf] : buffers_) n += buf.size();
  return n;
}

std::size_t EpisodicMemory::seen(std::size_t task, int label) const {
  const auto it = seen_.find(Key{task, label});
  return it == seen_.end() ? 0 : it->second;
}

std::vector<TaskBatch> EpisodicMemory::sample(std::size_t batch_size, std::size_t exclude_task) {
  std::vector<const MemoryExample*> pool;
  for (const auto& [key, buf] : buffers_) {
    if (key.first == exclude_task) continue;
    for (const auto& ex : buf) pool.push_back(&ex);
  }
  if (pool.empty() || batch_size == 0) return {};

  std::vector<const MemoryExample*> chosen;
  if (pool.size() >= batch_size) {
    std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), batch_size, rng_);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < batch_size; ++i) chosen.push_back(pool[pick(rng_)]);
  }
  std::stable_sort(chosen.begin(), chosen.end(),
                   [](const auto* a, const auto* b) { return a->task < b->task; });

  std::vector<TaskBatch> groups;
  for (const auto* ex : chosen) {
    if (groups.empty() || groups.back().task != ex->task) {
      groups.push_back(TaskBatch{Matrix(0, ex->features.size()), ex->task, {}});
    }
    groups.back().features.append_row(ex->features);
    groups.back().labels.push_back(ex->label);
  }
  return groups;
}

void EpisodicMemory::write_csv(std::ostream& out) const {
  std::size_t width = 0;
  for (const auto& [key, buf] : buffers_) {
    if (!buf.empty()) width = buf.front().features.size();
  }
  out << "task,class";
  for (std::size_t j = 0; j < width; ++j) out << ",f" << j;
  out << '\n';
  for (const auto& [key, buf] : buffers_) {
    for (const auto& ex : buf) {
      out << ex.task + 1 << ',' << ex.label;
      for (double v : ex.features) out << ',' << io::format_double(v);
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

FisherAnchor ewc_fisher_estimate(const MultiHeadNet& net, std::span<const TaskBatch> data,
                                 std::size_t max_examples) {
  FisherAnchor out;
  out.fisher.assign(net.param_count(), 0.0);
  out.anchor.assign(net.params().begin(), net.params().end());
  std::size_t used = 0;
  for (const auto& batch : data) {
    if (used == 0) out.task = batch.task;
    for (std::size_t i = 0; i < batch.size() && used < max_examples; ++i, ++used) {
      TaskBatch one{Matrix(1, batch.features.cols(),
                           std::vector<double>(batch.features.row(i).begin(),
                                               batch.features.row(i).end())),
                    batch.task,
                    {batch.labels[i]}};
      const auto g = net.loss_and_grad(one).grad;
      kernels::accumulate_square(out.fisher, g);
    }
  }
  if (used == 0) throw DomainError("ewc_fisher_estimate: no examples");
  const double inv = 1.0 / static_cast<double>(used);
  for (double& f : out.fisher) f *= inv;
  return out;
}

GradVector ewc_penalized_grad(std::span<const double> g, std::span<const double> theta,
                              std::span<const FisherAnchor> anchors, double lambda) {
  require_same_size(g.size(), theta.size(), "ewc_penalized_grad");
  GradVector out(g.begin(), g.end());
  if (lambda == 0.0) return out;
  for (const auto& a : anchors) {
    require_same_size(a.fisher.size(), g.size(), "ewc_penalized_grad fisher");
    require_same_size(a.anchor.size(), g.size(), "ewc_penalized_grad anchor");
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += lambda * a.fisher[i] * (theta[i] - a.anchor[i]);
    }
  }
  return out;
}

GradVector agem_project(std::span<const double> g, std::span<const double> g_ref) {
  require_same_size(g.size(), g_ref.size(), "agem_project");
  GradVector out(g.begin(), g.end());
  const double ref_sq = kernels::squared_norm(g_ref);
  if (std::sqrt(ref_sq) < kRefNormFloor) return out;
  const double d = kernels::dot(g, g_ref);
  if (d >= 0.0) return out;
  kernels::axpy(out, -d / ref_sq, g_ref);
  return out;
}

GradVector er_combined_grad(std::span<const double> g_batch, std::span<const double> g_mem) {
  require_same_size(g_batch.size(), g_mem.size(), "er_combined_grad");
  GradVector out(g_batch.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (g_batch[i] + g_mem[i]) / 2.0;
  return out;
}

void StableSgdSchedule::validate() const {
  if (!(init_lr > 0.0)) throw ConfigError("stable-sgd: init_lr must be > 0");
  if (!(decay_per_task > 0.0 && decay_per_task <= 1.0)) {
    throw ConfigError("stable-sgd: decay must be in (0, 1]");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("stable-sgd: dropout must be in [0, 1)");
}

double stable_sgd_lr(const StableSgdSchedule& schedule, std::size_t task_index) {
  if (task_index < 1) throw DomainError("stable_sgd_lr: task index must be >= 1");
  schedule.validate();
  return schedule.init_lr * std::pow(schedule.decay_per_task, static_cast<double>(task_index - 1));
}

// ---------------------------------------------------------------------------

ContinualMethod::ContinualMethod(MethodConfig cfg) : cfg_(cfg) {
  if (cfg_.kind == MethodKind::kAgem || cfg_.kind == MethodKind::kEr) {
    if (cfg_.memory_batch == 0) throw ConfigError("memory batch size must be >= 1");
    memory_.emplace(cfg_.memory_per_class, cfg_.seed);
  }
  if (cfg_.kind == MethodKind::kEwc && !(cfg_.ewc_lambda >= 0.0)) {
    throw ConfigError("ewc: lambda must be >= 0");
  }
}

double ContinualMethod::step(MultiHeadNet& net, const TaskBatch& batch, Optimizer& inner,
                             Rng* dropout_rng) {
  // Replay batches are drawn before the current-task forward pass.
  std::vector<TaskBatch> replay;
  if (memory_) replay = memory_->sample(cfg_.memory_batch, batch.task);

  auto [loss, g] = net.loss_and_grad(batch, dropout_rng);
  switch (cfg_.kind) {
    case MethodKind::kNone: break;
    case MethodKind::kEwc:
      g = ewc_penalized_grad(g, net.params(), anchors_, cfg_.ewc_lambda);
      break;
    case MethodKind::kAgem:
      if (!replay.empty()) g = agem_project(g, memory_gradient(net, replay, dropout_rng));
      break;
    case MethodKind::kEr:
      if (!replay.empty()) g = er_combined_grad(g, memory_gradient(net, replay, dropout_rng));
      break;
  }
  inner.step(net.params(), g);

  if (memory_) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      memory_->insert(batch.features.row(i), batch.task, batch.labels[i]);
    }
  }
  return loss;
}

void ContinualMethod::end_task(const MultiHeadNet& net, const LabeledDataset& train,
                               std::size_t task) {
  if (cfg_.kind != MethodKind::kEwc) return;
  const std::size_t n = std::min(train.size(), cfg_.fisher_max_examples);
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  const TaskBatch all = make_batch(train, rows, task);
  auto anchor = ewc_fisher_estimate(net, std::span<const TaskBatch>(&all, 1),
                                    cfg_.fisher_max_examples);
  anchor.task = task;
  anchors_.push_back(std::move(anchor));
}

double hybrid_step(ContinualMethod& method, Optimizer& inner, MultiHeadNet& net,
                   const TaskBatch& batch, Rng* dropout_rng) {
  return method.step(net, batch, inner, dropout_rng);
}

}  // namespace tagopt
