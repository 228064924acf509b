#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "tagopt/stream.hpp"
#include "test_util.hpp"

namespace tagopt {
namespace {

RunConfig config_for(const std::string& method, double lr) {
  RunConfig c;
  c.method = method;
  c.optim.eta = lr;
  c.hidden = {16};
  return c;
}

TEST(ParseMethod, Names) {
  EXPECT_EQ(parse_method("tag-rmsprop").optimizer, OptimizerKind::kTagRmsprop);
  EXPECT_EQ(parse_method("naive-adam").optimizer, OptimizerKind::kAdam);
  EXPECT_EQ(parse_method("er").method, MethodKind::kEr);
  EXPECT_EQ(parse_method("er").optimizer, OptimizerKind::kSgd);
  const auto h = parse_method("agem+tag-adam");
  EXPECT_EQ(h.method, MethodKind::kAgem);
  EXPECT_EQ(h.optimizer, OptimizerKind::kTagAdam);
  EXPECT_TRUE(parse_method("stable-sgd").stable_sgd);
  EXPECT_TRUE(parse_method("multitask").multitask);
  for (const char* bad : {"naive-tag-adam", "tag-sgd", "er+ewc", "adamw", "", "er+naive-tag-adam"}) {
    EXPECT_THROW((void)parse_method(bad), ConfigError) << bad;
  }
  EXPECT_EQ(default_beta2(OptimizerKind::kAdam), 0.999);
  EXPECT_EQ(default_beta2(OptimizerKind::kTagRmsprop), 0.99);
}

TEST(RunStream, SameSeedIsBitwiseIdentical) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(3));
  for (const char* m : {"tag-adam", "er", "ewc+tag-rmsprop", "stable-sgd"}) {
    auto cfg = config_for(m, 0.01);
    cfg.keep_state = true;
    cfg.dropout = std::string(m) == "stable-sgd" ? 0.2 : 0.0;
    const auto a = run_stream(s, cfg, 5), b = run_stream(s, cfg, 5);
    EXPECT_EQ(a.accuracy, b.accuracy) << m;
    EXPECT_EQ(a.task_steps, b.task_steps);
    if (a.knowledge_base) {
      EXPECT_EQ(a.knowledge_base->frozen(), b.knowledge_base->frozen());
    }
    if (a.memory) {
      EXPECT_EQ(a.memory->buffers(), b.memory->buffers());
    }
  }
}

TEST(RunStream, StepCounts) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(2));  // 60 train rows per task
  auto cfg = config_for("naive-sgd", 0.1);
  cfg.batch_size = 7;
  EXPECT_EQ(run_stream(s, cfg, 1).task_steps, (std::vector<std::size_t>{9, 9}));
  cfg.epochs_per_task = 3;
  const auto r = run_stream(s, cfg, 1);
  EXPECT_EQ(r.task_steps, (std::vector<std::size_t>{27, 27}));
  EXPECT_TRUE(std::isfinite(r.final_accuracy));
}

TEST(RunStream, SingleTaskStream) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(1));
  const auto r = run_stream(s, config_for("tag-rmsprop", 0.01), 1);
  EXPECT_FALSE(r.forgetting.has_value());
  EXPECT_EQ(r.final_accuracy, r.accuracy.at(1, 1));
  EXPECT_EQ(r.learning_accuracy, r.accuracy.at(1, 1));
}

TEST(RunStream, SingleTaskTagMatchesNaive) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(1));
  const auto a = run_stream(s, config_for("naive-rmsprop", 0.01), 3);
  const auto b = run_stream(s, config_for("tag-rmsprop", 0.01), 3);
  EXPECT_NEAR(a.final_accuracy, b.final_accuracy, 1e-12);
}

TEST(RunStream, TestLabelsNeverReachTraining) {
  auto s = make_synthetic_stream(testing_util::tiny_spec(3));
  auto cfg = config_for("tag-rmsprop", 0.01);
  cfg.keep_state = true;
  const auto a = run_stream(s, cfg, 2);
  for (auto& t : s.tasks) {
    for (int& y : t.test.labels) y = 1 - y;
  }
  const auto b = run_stream(s, cfg, 2);
  EXPECT_EQ(a.knowledge_base->frozen(), b.knowledge_base->frozen());
  EXPECT_NEAR(a.accuracy.at(3, 3), 1.0 - b.accuracy.at(3, 3), 1e-12);
}

TEST(RunStream, DuplicatedTaskBarelyForgets) {
  auto spec = testing_util::tiny_spec(2);
  spec.rotation_angles = {0.0, 0.0};
  spec.separation = 6.0;
  spec.noise = 0.5;
  spec.train_per_class = 100;
  spec.test_per_class = 100;
  const auto s = make_synthetic_stream(spec);
  const auto r = run_stream(s, config_for("naive-sgd", 0.1), 1);
  EXPECT_GT(r.accuracy.at(1, 1), 0.9);
  // Binomial noise on 200 test points is about 0.02.
  EXPECT_NEAR(r.accuracy.at(2, 1), r.accuracy.at(1, 1), 0.06);
}

TEST(RunStream, AlphaTraceRecorded) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(3));
  auto cfg = config_for("tag-rmsprop", 0.01);
  cfg.alpha_trace = AlphaTraceMode::kFull;
  const auto r = run_stream(s, cfg, 1);
  ASSERT_TRUE(r.has_alpha);
  EXPECT_EQ(r.alpha.count(1), 0u);
  EXPECT_EQ(r.alpha.count(2), r.task_steps[1]);
  EXPECT_NEAR(r.alpha.mean(3, 3), std::exp(-5.0), 1e-12);
  EXPECT_EQ(r.alpha.steps().size(), r.task_steps[1] + r.task_steps[2]);
  EXPECT_FALSE(run_stream(s, config_for("naive-rmsprop", 0.01), 1).has_alpha);
}

TEST(RunStream, ConfigValidation) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(1));
  auto cfg = config_for("tag-rmsprop", 0.01);
  cfg.batch_size = 0;
  EXPECT_THROW((void)run_stream(s, cfg, 1), ConfigError);
  cfg = config_for("warp-drive", 0.01);
  EXPECT_THROW((void)run_stream(s, cfg, 1), ConfigError);
  cfg = config_for("tag-rmsprop", 0.01);
  cfg.dropout = 1.0;
  EXPECT_THROW((void)run_stream(s, cfg, 1), ConfigError);
}

TEST(GridSearch, SingletonAndZeroRate) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(2));
  const std::vector<std::uint64_t> seeds{1, 2};
  const std::vector<RunConfig> one{config_for("naive-sgd", 0.1)};
  EXPECT_EQ(grid_search(s, one, seeds).best_index, 0u);

  const std::vector<RunConfig> grid{config_for("naive-sgd", 0.0), config_for("naive-sgd", 0.1)};
  const auto g = grid_search(s, grid, seeds);
  EXPECT_EQ(g.best_index, 1u);
  EXPECT_GT(g.rows[0].validation_accuracy, 0.6);
  EXPECT_EQ(g.rows[0].index, 1u);
  ASSERT_EQ(g.runs.size(), 2u);
  EXPECT_EQ(g.runs[0].size(), 2u);

  const auto again = grid_search(s, grid, seeds);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(again.rows[i].validation_accuracy, g.rows[i].validation_accuracy);
  }
}

TEST(GridSearch, UsesValidationNotTest) {
  auto s = make_synthetic_stream(testing_util::tiny_spec(2));
  const std::vector<std::uint64_t> seeds{1};
  const std::vector<RunConfig> grid{config_for("naive-sgd", 0.05)};
  const auto a = grid_search(s, grid, seeds);
  for (auto& t : s.tasks) {
    for (int& y : t.test.labels) y = 1 - y;
  }
  const auto b = grid_search(s, grid, seeds);
  EXPECT_EQ(a.rows[0].validation_accuracy, b.rows[0].validation_accuracy);
}

TEST(Multitask, SingleTaskEqualsSequential) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(1));
  const auto cfg = config_for("naive-sgd", 0.1);
  EXPECT_NEAR(multitask_upper_bound(s, cfg, 4), run_stream(s, cfg, 4).final_accuracy, 1e-12);
}

TEST(Multitask, DeterministicAndNoForgetting) {
  const auto s = make_synthetic_stream(testing_util::tiny_spec(3));
  auto cfg = config_for("multitask", 0.1);
  const auto a = run_stream(s, cfg, 2), b = run_stream(s, cfg, 2);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(*a.forgetting, 0.0);
  EXPECT_EQ(a.final_accuracy, multitask_upper_bound(s, cfg, 2));
}

// Desk-scale stream shared with configs/desk.ini.
SyntheticStreamSpec desk_spec() {
  SyntheticStreamSpec spec;
  spec.antipodal = true;
  spec.separation = 3.0;
  spec.noise = 1.0;
  return spec;
}

TEST(Multitask, BeatsSequentialSgdOnDeskStream) {
  const auto s = make_synthetic_stream(desk_spec());
  auto cfg = config_for("naive-sgd", 0.1);
  cfg.hidden = {32};
  double joint = 0.0, seq = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    joint += multitask_upper_bound(s, cfg, seed);
    seq += run_stream(s, cfg, seed).final_accuracy;
  }
  EXPECT_GE(joint, seq);
}

TEST(ParallelFor, RethrowsFailure) {
  std::vector<int> out(100, 0);
  parallel_for(100, [&](std::size_t i) { out[i] = static_cast<int>(i); });
  EXPECT_EQ(std::accumulate(out.begin(), out.end(), 0), 4950);
  EXPECT_THROW(parallel_for(10,
                            [](std::size_t i) {
                              if (i == 7) throw DomainError("boom");
                            }),
               DomainError);
}

}  // namespace
}  // namespace tagopt
