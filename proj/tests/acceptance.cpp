// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tagopt/experiment.hpp"
#include "tagopt/methods.hpp"
#include "tagopt/metrics.hpp"
#include "tagopt/optim.hpp"
#include "tagopt/stream.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace tagopt;
using testing_util::max_abs_diff;
using testing_util::random_batch;
using testing_util::random_vector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Desk stream: five rotated two-class tasks, d = 16, 200/100 per class.
SyntheticStreamSpec desk_spec() {
  SyntheticStreamSpec s;
  s.antipodal = true;
  s.separation = 3.0;
  s.noise = 1.0;
  s.seed = 0;
  return s;
}

RunConfig desk_run(const std::string& method, double lr) {
  RunConfig c;
  c.method = method;
  c.optim.eta = lr;
  c.optim.b = 5.0;
  c.hidden = {32};
  c.batch_size = 10;
  c.epochs_per_task = 1;
  return c;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

Outcome gradient_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  int nets = 0;
  for (; nets < 24; ++nets) {
    std::uniform_int_distribution<std::size_t> dim(2, 6), width(2, 8), depth(0, 2);
    NetShape shape{dim(rng), {}, dim(rng), 3};
    for (std::size_t l = depth(rng); l > 0; --l) shape.hidden.push_back(width(rng));
    MultiHeadNet net(shape, 0.0, rng());
    net.set_params(random_vector(net.param_count(), rng, 0.5));
    const auto b = random_batch(shape, 1 + nets % 8, nets % 3, rng);
    const auto a = net.loss_and_grad(b).grad;
    const auto f = finite_diff_grad(net, b, 1e-5);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num = std::max(num, std::abs(a[i] - f[i]));
      den = std::max({den, std::abs(a[i]), std::abs(f[i])});
    }
    worst = std::max(worst, den > 0.0 ? num / den : num);
  }
  return {worst < 1e-5, std::to_string(nets) + " nets, worst relative sup error " +
                            fmt("%.2e", worst)};
}

Outcome single_task_reduction() {
  auto spec = desk_spec();
  spec.num_tasks = 1;
  const auto stream = make_synthetic_stream(spec);
  const auto& train = stream.tasks[0].train;
  struct Pairing {
    OptimizerKind tag, naive;
  };
  double worst = 0.0;
  std::size_t steps = 0;
  for (auto [tag, naive] : {Pairing{OptimizerKind::kTagRmsprop, OptimizerKind::kRmsprop},
                            Pairing{OptimizerKind::kTagAdagrad, OptimizerKind::kAdagrad},
                            Pairing{OptimizerKind::kTagAdam, OptimizerKind::kAdam}}) {
    OptimConfig c;
    c.eta = 0.005;
    c.beta2 = default_beta2(naive);
    MultiHeadNet a({16, {32}, 2, 1}, 0.0, 7), b = a;
    auto oa = make_optimizer(tag, a.param_count(), c);
    auto ob = make_optimizer(naive, b.param_count(), c, {.adagrad_reset_per_task = true});
    steps = 0;
    for (int pass = 0; pass < 3; ++pass) {
      for (std::size_t lo = 0; lo + 10 <= train.size(); lo += 10, ++steps) {
        std::vector<std::size_t> rows(10);
        for (std::size_t i = 0; i < 10; ++i) rows[i] = lo + i;
        const auto batch = make_batch(train, rows, 0);
        oa->step(a.params(), a.loss_and_grad(batch).grad);
        ob->step(b.params(), b.loss_and_grad(batch).grad);
        worst = std::max(worst, max_abs_diff(a.params(), b.params()));
      }
    }
  }
  return {worst <= 1e-12 && steps >= 100,
          "3 optimizers x " + std::to_string(steps) + " steps, max deviation " +
              fmt("%.1e", worst)};
}

Outcome alpha_properties() {
  Rng rng(31);
  std::uniform_real_distribution<double> pos(1e-3, 1e3);
  std::size_t bad = 0;
  for (double b : {1.0, 3.0, 5.0, 7.0}) {
    for (int i = 0; i < 1000; ++i) {
      const auto x = random_vector(12, rng), y = random_vector(12, rng);
      const double al = tag_alpha(x, y, b);
      if (al < std::exp(-b) * (1 - 1e-15) || al > std::exp(b) * (1 + 1e-15)) ++bad;
      if (std::abs(tag_alpha(x, x, b) - std::exp(-b)) > 1e-12) ++bad;
      auto o = y;  // Gram-Schmidt against x
      double xx = 0.0, xo = 0.0;
      for (std::size_t k = 0; k < 12; ++k) xx += x[k] * x[k], xo += x[k] * o[k];
      for (std::size_t k = 0; k < 12; ++k) o[k] -= xo / xx * x[k];
      if (std::abs(tag_alpha(x, o, b) - 1.0) > 1e-12) ++bad;
      auto xs = x, ys = y;
      const double c = pos(rng), d = pos(rng);
      for (double& v : xs) v *= c;
      for (double& v : ys) v *= d;
      if (std::abs(tag_alpha(xs, ys, b) - al) > 1e-12) ++bad;
    }
  }
  return {bad == 0, "4000 pairs over b in {1,3,5,7}, " + std::to_string(bad) + " violations"};
}

Outcome metric_oracles() {
  AccuracyMatrix a(3);
  a.push_row(std::vector<double>{0.9});
  a.push_row(std::vector<double>{0.8, 0.7});
  a.push_row(std::vector<double>{0.6, 0.5, 0.8});
  bool ok = std::abs(accuracy_at(a, 3) - 1.9 / 3.0) <= 1e-12 &&
            std::abs(forgetting_at(a, 3) - 0.25) <= 1e-12 &&
            std::abs(learning_accuracy_at(a, 3) - 0.8) <= 1e-12;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + trial % 8;
    std::vector<std::vector<double>> m;
    AccuracyMatrix acc(T);
    for (std::size_t t = 1; t <= T; ++t) {
      std::vector<double> row(t);
      for (double& v : row) v = u(rng);
      m.push_back(row);
      acc.push_row(row);
    }
    // Direct evaluation of the definitions at t = T.
    double A = 0.0, L = 0.0, F = 0.0;
    for (std::size_t j = 0; j < T; ++j) A += m[T - 1][j] / double(T);
    for (std::size_t j = 0; j < T; ++j) L += m[j][j] / double(T);
    for (std::size_t tau = 0; tau + 1 < T; ++tau) {
      double best = -2.0;
      for (std::size_t tp = tau; tp + 1 < T; ++tp) best = std::max(best, m[tp][tau] - m[T - 1][tau]);
      F += best / double(T - 1);
    }
    worst = std::max({worst, std::abs(A - accuracy_at(acc, T)),
                      std::abs(L - learning_accuracy_at(acc, T)),
                      std::abs(F - forgetting_at(acc, T))});
  }
  ok = ok && worst <= 1e-12;
  return {ok, "hand matrix (0.6333, 0.25, 0.8) and 100 random matrices, max gap " +
                  fmt("%.1e", worst)};
}

Outcome agem_constraint() {
  Rng rng(77);
  double worst_dot = 0.0, worst_idem = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto g = random_vector(20, rng), r = random_vector(20, rng);
    const auto p = agem_project(g, r);
    double d = 0.0;
    for (std::size_t k = 0; k < 20; ++k) d += p[k] * r[k];
    worst_dot = std::min(worst_dot, d);
    worst_idem = std::max(worst_idem, max_abs_diff(agem_project(p, r), p));
  }
  return {worst_dot >= -1e-12 && worst_idem <= 1e-12,
          "1000 pairs, min dot " + fmt("%.1e", worst_dot) + ", idempotence gap " +
              fmt("%.1e", worst_idem)};
}

Outcome reservoir_statistics() {
  const int trials = 10000;
  std::vector<int> hits(10, 0);
  for (int t = 0; t < trials; ++t) {
    EpisodicMemory mem(2, mix_seed(99, static_cast<std::uint64_t>(t)));
    for (int i = 0; i < 10; ++i) mem.insert(std::vector<double>{double(i)}, 0, 0);
    for (const auto& ex : mem.buffers().at({0, 0})) ++hits[static_cast<int>(ex.features[0])];
  }
  const double sd = std::sqrt(trials * 0.2 * 0.8);
  double worst = 0.0;
  for (int h : hits) worst = std::max(worst, std::abs(h - trials * 0.2) / sd);
  return {worst <= 3.0, "10000 trials, worst deviation " + fmt("%.2f", worst) + " sd"};
}

struct Selected {
  double lr = 0.0;
  double mean_a = 0.0;
  double mean_f = 0.0;
};

Selected select_and_test(const TaskStream& stream, const std::string& method,
                         const std::vector<double>& lrs) {
  std::vector<RunConfig> grid;
  for (double lr : lrs) grid.push_back(desk_run(method, lr));
  const auto g = grid_search(stream, grid, kSeeds);
  Selected s;
  s.lr = lrs[g.best_index];
  std::vector<RunResult> runs(kSeeds.size());
  parallel_for(kSeeds.size(), [&](std::size_t i) {
    runs[i] = run_stream(stream, grid[g.best_index], kSeeds[i]);
  });
  for (const auto& r : runs) {
    s.mean_a += r.final_accuracy / double(runs.size());
    s.mean_f += *r.forgetting / double(runs.size());
  }
  return s;
}

Outcome directional_reproduction() {
  const auto stream = make_synthetic_stream(desk_spec());
  const auto naive = select_and_test(stream, "naive-rmsprop",
                                     {0.01, 0.005, 0.001, 0.0005, 0.0001, 0.00005, 0.00001});
  const auto tag = select_and_test(
      stream, "tag-rmsprop", {0.005, 0.001, 0.0005, 0.00025, 0.0001, 0.00005, 0.000025, 0.00001});
  const bool a_ok = tag.mean_a >= naive.mean_a;
  const bool f_ok = tag.mean_f <= naive.mean_f;
  std::ostringstream d;
  d << "TAG lr " << tag.lr << " A5 " << fmt("%.4f", tag.mean_a) << " F5 " << fmt("%.4f", tag.mean_f)
    << " vs naive lr " << naive.lr << " A5 " << fmt("%.4f", naive.mean_a) << " F5 "
    << fmt("%.4f", naive.mean_f) << " (A " << (a_ok ? "ok" : "lower") << ", F "
    << (f_ok ? "ok" : "higher") << ")";
  return {a_ok && f_ok, d.str()};
}

Outcome hybrid_noops() {
  auto spec = desk_spec();
  spec.num_tasks = 2;
  spec.train_per_class = 100;
  const auto stream = make_synthetic_stream(spec);
  double worst = 0.0;

  // EWC with zero penalty around TAG-RMSProp, across a task boundary.
  {
    OptimConfig c;
    c.eta = 0.005;
    MultiHeadNet a({16, {32}, 2, 2}, 0.0, 3), b = a;
    auto oa = make_optimizer(OptimizerKind::kTagRmsprop, a.param_count(), c);
    auto ob = make_optimizer(OptimizerKind::kTagRmsprop, b.param_count(), c);
    ContinualMethod ewc({MethodKind::kEwc, 0.0});
    for (std::size_t t = 0; t < 2; ++t) {
      if (t > 0) oa->begin_task(), ob->begin_task();
      const auto& train = stream.tasks[t].train;
      for (std::size_t lo = 0; lo < train.size(); lo += 10) {
        std::vector<std::size_t> rows;
        for (std::size_t i = lo; i < std::min(train.size(), lo + 10); ++i) rows.push_back(i);
        const auto batch = make_batch(train, rows, t);
        hybrid_step(ewc, *oa, a, batch, nullptr);
        ob->step(b.params(), b.loss_and_grad(batch).grad);
        worst = std::max(worst, max_abs_diff(a.params(), b.params()));
      }
      oa->end_task(), ob->end_task();
      ewc.end_task(a, train, t);
    }
  }
  // ER while the memory holds nothing from other tasks, around RMSProp.
  {
    OptimConfig c;
    c.eta = 0.005;
    MultiHeadNet a({16, {32}, 2, 2}, 0.0, 4), b = a;
    auto oa = make_optimizer(OptimizerKind::kRmsprop, a.param_count(), c);
    auto ob = make_optimizer(OptimizerKind::kRmsprop, b.param_count(), c);
    ContinualMethod er({MethodKind::kEr, 1.0, 5, 10, 1000, 8});
    const auto& train = stream.tasks[0].train;
    for (std::size_t lo = 0; lo < train.size(); lo += 10) {
      std::vector<std::size_t> rows;
      for (std::size_t i = lo; i < lo + 10; ++i) rows.push_back(i);
      const auto batch = make_batch(train, rows, 0);
      hybrid_step(er, *oa, a, batch, nullptr);
      ob->step(b.params(), b.loss_and_grad(batch).grad);
      worst = std::max(worst, max_abs_diff(a.params(), b.params()));
    }
  }
  return {worst <= 1e-12, "EWC(lambda=0)+TAG-RMSProp and ER(empty)+RMSProp, max deviation " +
                              fmt("%.1e", worst)};
}

bool same_tree_csvs(const fs::path& a, const fs::path& b, std::size_t& files) {
  files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel)) return false;
    if (testing_util::slurp(e.path()) != testing_util::slurp(b / rel)) return false;
    ++files;
  }
  return files > 0;
}

Outcome determinism() {
  testing_util::TempDir dir("accept");
  CommandOptions o;
  o.config_path = fs::path(TAGOPT_SOURCE_DIR) / "configs" / "desk.ini";
  o.seeds = {1, 2};
  o.alpha_trace = AlphaTraceMode::kFull;
  std::ostringstream log;
  o.out_dir = dir.path / "first";
  (void)cmd_run(o, log);
  o.out_dir = dir.path / "second";
  (void)cmd_run(o, log);
  std::size_t files = 0;
  const bool ok = same_tree_csvs(dir.path / "first", dir.path / "second", files);
  return {ok, "configs/desk.ini, seeds 1 2, " + std::to_string(files) + " CSV files compared"};
}

Outcome multi_pass() {
  const auto stream = make_synthetic_stream(desk_spec());
  auto one = desk_run("tag-rmsprop", 0.005);
  auto five = one;
  five.epochs_per_task = 5;
  const auto r1 = run_stream(stream, one, 1);
  const auto r5 = run_stream(stream, five, 1);
  bool ok = r1.task_steps.size() == r5.task_steps.size();
  for (std::size_t t = 0; ok && t < r1.task_steps.size(); ++t) {
    ok = r5.task_steps[t] == 5 * r1.task_steps[t];
  }
  ok = ok && std::isfinite(r5.final_accuracy) && std::isfinite(*r5.forgetting) &&
       std::isfinite(r5.learning_accuracy);
  return {ok, "steps per task " + std::to_string(r1.task_steps[0]) + " -> " +
                  std::to_string(r5.task_steps[0]) + ", A5 " + fmt("%.4f", r5.final_accuracy)};
}

Outcome memory_sweep() {
  const auto stream = make_synthetic_stream(desk_spec());
  const std::vector<std::size_t> sizes{1, 5, 10};
  std::vector<double> mean(3, 0.0), var(3, 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    auto cfg = desk_run("er", 0.1);
    cfg.memory_per_class = sizes[k];
    std::vector<double> a(kSeeds.size());
    parallel_for(kSeeds.size(), [&](std::size_t i) {
      a[i] = run_stream(stream, cfg, kSeeds[i]).final_accuracy;
    });
    for (double v : a) mean[k] += v / double(a.size());
    for (double v : a) var[k] += (v - mean[k]) * (v - mean[k]) / double(a.size() - 1);
  }
  const double pooled = std::sqrt((var[0] + var[1] + var[2]) / 3.0);
  const bool ok = mean[1] >= mean[0] - pooled && mean[2] >= mean[1] - pooled;
  return {ok, "A5 " + fmt("%.4f", mean[0]) + " / " + fmt("%.4f", mean[1]) + " / " +
                  fmt("%.4f", mean[2]) + " for M = 1/5/10, pooled sd " + fmt("%.4f", pooled)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
    double budget_seconds;
  };
  const std::vector<Criterion> criteria{
      {"gradient oracle", gradient_oracle, 10.0},
      {"single-task reduction", single_task_reduction, 0.0},
      {"alpha properties", alpha_properties, 0.0},
      {"metric oracles", metric_oracles, 0.0},
      {"A-GEM constraint", agem_constraint, 0.0},
      {"reservoir statistics", reservoir_statistics, 0.0},
      {"TAG-RMSProp vs naive RMSProp direction", directional_reproduction, 120.0},
      {"hybrid no-op reductions", hybrid_noops, 0.0},
      {"determinism", determinism, 0.0},
      {"multi-pass path", multi_pass, 0.0},
      {"ER memory sweep direction", memory_sweep, 0.0},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0.0 && secs >= c.budget_seconds) {
      o.pass = false;
      o.detail += " (over the " + fmt("%.0f", c.budget_seconds) + " s budget)";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s  %2zu  %-40s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
