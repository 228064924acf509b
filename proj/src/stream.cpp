#include "tagopt/stream.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>

#include "tagopt/errors.hpp"
#include "tagopt/net.hpp"

namespace tagopt {

namespace {

constexpr std::uint64_t kNetSalt = 1;
constexpr std::uint64_t kMemorySalt = 2;
constexpr std::uint64_t kDropoutSalt = 3;
constexpr std::uint64_t kShuffleSalt = 100;
constexpr std::uint64_t kSplitSalt = 7;

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

OptimizerKind parse_inner(std::string_view name) {
  if (starts_with(name, "naive-")) {
    const auto k = parse_optimizer_kind(name.substr(6));
    if (is_tag(k)) throw ConfigError("naive prefix on a TAG optimizer");
    return k;
  }
  return parse_optimizer_kind(name);
}

const LabeledDataset& eval_data(const Task& task, EvalSplit split) {
  const auto& ds = split == EvalSplit::kTest ? task.test : task.validation;
  if (ds.size() == 0) {
    throw ConfigError(split == EvalSplit::kTest ? "task has no test data"
                                                : "task has no validation data");
  }
  return ds;
}

double evaluate(const MultiHeadNet& net, const LabeledDataset& ds, std::size_t task) {
  const auto correct = net.count_correct(ds.features, ds.labels, task);
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

NetShape net_shape(const TaskStream& stream, const RunConfig& cfg) {
  return NetShape{stream.input_dim(), cfg.hidden, stream.classes_per_task(), stream.num_tasks()};
}

void finish_metrics(RunResult& r) {
  const std::size_t t = r.accuracy.rows_filled();
  r.final_accuracy = accuracy_at(r.accuracy, t);
  r.learning_accuracy = learning_accuracy_at(r.accuracy, t);
  if (t >= 2) r.forgetting = forgetting_at(r.accuracy, t);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

MethodSpec parse_method(std::string_view name) {
  MethodSpec s;
  s.name = std::string(name);
  const auto plus = name.find('+');
  std::string_view head = name.substr(0, plus);
  std::string_view inner = plus == std::string_view::npos ? "sgd" : name.substr(plus + 1);

  auto fail = [&]() -> MethodSpec {
    throw ConfigError("unknown method '" + std::string(name) + "'");
  };
  if (head == "ewc") {
    s.method = MethodKind::kEwc;
  } else if (head == "agem") {
    s.method = MethodKind::kAgem;
  } else if (head == "er") {
    s.method = MethodKind::kEr;
  } else if (head == "multitask") {
    s.multitask = true;
  } else if (plus == std::string_view::npos && head == "stable-sgd") {
    s.stable_sgd = true;
  } else if (plus == std::string_view::npos &&
             (starts_with(head, "naive-") || starts_with(head, "tag-"))) {
    try {
      s.optimizer = parse_inner(head);
    } catch (const ConfigError&) {
      return fail();
    }
    if (starts_with(head, "naive-") == is_tag(s.optimizer)) return fail();
    return s;
  } else {
    return fail();
  }
  try {
    s.optimizer = parse_inner(inner);
  } catch (const ConfigError&) {
    return fail();
  }
  return s;
}

double default_beta2(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam || kind == OptimizerKind::kTagAdam ? 0.999 : 0.99;
}

void RunConfig::validate() const {
  const auto spec = parse_method(method);
  resolved_optim().validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs_per_task == 0) throw ConfigError("epochs must be >= 1");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer widths must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (spec.stable_sgd) StableSgdSchedule{optim.eta, lr_decay, dropout}.validate();
  if (!(ewc_lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (memory_per_class == 0) throw ConfigError("memory_per_class must be >= 1");
  if (fisher_max_examples == 0) throw ConfigError("fisher_max_examples must be >= 1");
}

OptimConfig RunConfig::resolved_optim() const {
  OptimConfig c = optim;
  c.beta2 = beta2.value_or(default_beta2(parse_method(method).optimizer));
  return c;
}

double RunResult::total_seconds() const {
  return std::accumulate(task_seconds.begin(), task_seconds.end(), 0.0);
}

RunResult run_stream(const TaskStream& stream, const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  stream.validate();
  const auto spec = parse_method(cfg.method);
  if (spec.multitask) return run_multitask(stream, cfg, seed);

  const std::size_t T = stream.num_tasks();
  MultiHeadNet net(net_shape(stream, cfg), cfg.dropout, mix_seed(seed, kNetSalt));
  auto opt = make_optimizer(spec.optimizer, net.param_count(), cfg.resolved_optim());

  MethodConfig mc;
  mc.kind = spec.method;
  mc.ewc_lambda = cfg.ewc_lambda;
  mc.memory_per_class = cfg.memory_per_class;
  mc.memory_batch = cfg.memory_batch == 0 ? cfg.batch_size : cfg.memory_batch;
  mc.fisher_max_examples = cfg.fisher_max_examples;
  mc.seed = mix_seed(seed, kMemorySalt);
  ContinualMethod method(mc);

  Rng dropout_rng(mix_seed(seed, kDropoutSalt));
  Rng* drng = cfg.dropout > 0.0 ? &dropout_rng : nullptr;
  const StableSgdSchedule schedule{cfg.optim.eta, cfg.lr_decay, cfg.dropout};

  RunResult r;
  r.method = cfg.method;
  r.seed = seed;
  r.accuracy = AccuracyMatrix(T);
  r.has_alpha = is_tag(spec.optimizer) && cfg.alpha_trace != AlphaTraceMode::kOff;
  r.alpha = AlphaTrace(T, r.has_alpha ? cfg.alpha_trace : AlphaTraceMode::kOff);

  for (std::size_t t = 0; t < T; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto& train = stream.tasks[t].train;
    if (train.size() == 0) throw ConfigError("task " + std::to_string(t + 1) + " has no training data");
    if (t > 0) opt->begin_task();
    if (spec.stable_sgd) opt->set_learning_rate(stable_sgd_lr(schedule, t + 1));

    Rng shuffle_rng(mix_seed(seed, kShuffleSalt + t));
    std::vector<std::size_t> order(train.size());
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
        const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
        const auto batch =
            make_batch(train, std::span<const std::size_t>(order).subspan(lo, hi - lo), t);
        method.step(net, batch, *opt, drng);
        ++steps;
        if (r.has_alpha && !opt->last_alphas().empty()) r.alpha.record(t + 1, opt->last_alphas());
      }
    }
    opt->end_task();
    method.end_task(net, train, t);

    std::vector<double> row(t + 1);
    for (std::size_t tau = 0; tau <= t; ++tau) {
      row[tau] = evaluate(net, eval_data(stream.tasks[tau], cfg.eval_split), tau);
    }
    r.accuracy.push_row(row);
    r.task_steps.push_back(steps);
    r.task_seconds.push_back(seconds_since(start));
  }
  if (cfg.keep_state) {
    if (opt->knowledge_base() != nullptr) r.knowledge_base = *opt->knowledge_base();
    if (method.memory() != nullptr) r.memory = *method.memory();
  }
  finish_metrics(r);
  return r;
}

RunResult run_multitask(const TaskStream& stream, const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  stream.validate();
  const auto spec = parse_method(cfg.method);
  const std::size_t T = stream.num_tasks();
  const auto start = std::chrono::steady_clock::now();

  MultiHeadNet net(net_shape(stream, cfg), cfg.dropout, mix_seed(seed, kNetSalt));
  auto opt = make_optimizer(spec.optimizer, net.param_count(), cfg.resolved_optim());
  Rng dropout_rng(mix_seed(seed, kDropoutSalt));
  Rng* drng = cfg.dropout > 0.0 ? &dropout_rng : nullptr;

  std::vector<std::pair<std::size_t, std::size_t>> order;  // (task, row)
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < stream.tasks[t].train.size(); ++i) order.emplace_back(t, i);
  }
  if (order.empty()) throw ConfigError("multitask: no training data");

  Rng shuffle_rng(mix_seed(seed, kShuffleSalt));
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      std::vector<std::pair<std::size_t, std::size_t>> chunk(order.begin() + static_cast<long>(lo),
                                                             order.begin() + static_cast<long>(hi));
      std::stable_sort(chunk.begin(), chunk.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<TaskBatch> groups;
      for (std::size_t i = 0; i < chunk.size();) {
        std::size_t j = i;
        std::vector<std::size_t> rows;
        while (j < chunk.size() && chunk[j].first == chunk[i].first) rows.push_back(chunk[j++].second);
        groups.push_back(make_batch(stream.tasks[chunk[i].first].train, rows, chunk[i].first));
        i = j;
      }
      const auto lg = mixed_loss_and_grad(net, groups, drng);
      opt->step(net.params(), lg.grad);
      ++steps;
    }
  }

  std::vector<double> acc(T);
  for (std::size_t t = 0; t < T; ++t) acc[t] = evaluate(net, eval_data(stream.tasks[t], cfg.eval_split), t);

  RunResult r;
  r.method = cfg.method;
  r.seed = seed;
  r.accuracy = AccuracyMatrix(T);
  for (std::size_t t = 0; t < T; ++t) r.accuracy.push_row(std::span<const double>(acc).first(t + 1));
  r.task_steps.push_back(steps);
  r.task_seconds.push_back(seconds_since(start));
  r.alpha = AlphaTrace(T, AlphaTraceMode::kOff);
  finish_metrics(r);
  return r;
}

double multitask_upper_bound(const TaskStream& stream, const RunConfig& cfg, std::uint64_t seed) {
  return run_multitask(stream, cfg, seed).final_accuracy;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::exception_ptr failure;
  std::mutex mu;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      const std::lock_guard<std::mutex> lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

GridResult grid_search(const TaskStream& stream, std::span<const RunConfig> grid,
                       std::span<const std::uint64_t> seeds, double train_fraction) {
  if (grid.empty()) throw ConfigError("grid search needs at least one configuration");
  if (seeds.empty()) throw ConfigError("grid search needs at least one seed");
  for (const auto& cfg : grid) cfg.validate();

  std::vector<TaskStream> splits;
  for (auto s : seeds) splits.push_back(with_validation_split(stream, train_fraction, mix_seed(s, kSplitSalt)));

  const std::size_t cells = grid.size() * seeds.size();
  std::vector<RunResult> results(cells);
  parallel_for(cells, [&](std::size_t k) {
    RunConfig cfg = grid[k / seeds.size()];
    cfg.eval_split = EvalSplit::kValidation;
    cfg.alpha_trace = AlphaTraceMode::kOff;
    results[k] = run_stream(splits[k % seeds.size()], cfg, seeds[k % seeds.size()]);
  });

  GridResult out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    GridRow row;
    row.index = g;
    double acc = 0.0;
    double fgt = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& r = results[g * seeds.size() + s];
      acc += r.final_accuracy;
      if (r.forgetting) fgt += *r.forgetting;
    }
    row.validation_accuracy = acc / static_cast<double>(seeds.size());
    if (results[g * seeds.size()].forgetting) {
      row.validation_forgetting = fgt / static_cast<double>(seeds.size());
    }
    out.rows.push_back(row);
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.validation_accuracy != b.validation_accuracy) {
      return a.validation_accuracy > b.validation_accuracy;
    }
    return a.validation_forgetting.value_or(0.0) < b.validation_forgetting.value_or(0.0);
  });
  out.best_index = out.rows.front().index;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.runs.emplace_back(std::make_move_iterator(results.begin() + static_cast<long>(g * seeds.size())),
                          std::make_move_iterator(results.begin() + static_cast<long>((g + 1) * seeds.size())));
  }
  return out;
}

}  // namespace tagopt
