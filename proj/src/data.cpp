#include "tagopt/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "tagopt/errors.hpp"

namespace tagopt {

namespace {

constexpr double kStdFloor = 1e-12;


std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm < 1e-24);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Rotates consecutive coordinate pairs (0,1), (2,3), ... by `angle`.
void rotate_pairs(std::span<double> x, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
    const double a = x[i];
    const double b = x[i + 1];
    x[i] = c * a - s * b;
    x[i + 1] = s * a + c * b;
  }
}

}  // namespace

void LabeledDataset::validate() const {
  require_same_size(features.rows(), labels.size(), "dataset: rows vs labels");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DomainError("dataset: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw DomainError("dataset: non-finite feature");
  }
}

std::size_t TaskStream::classes_per_task() const {
  if (tasks.empty()) throw StateError("stream: no tasks");
  return tasks.front().num_classes;
}

std::size_t TaskStream::input_dim() const {
  if (tasks.empty()) throw StateError("stream: no tasks");
  return tasks.front().train.dim();
}

void TaskStream::validate() const {
  if (tasks.empty()) throw ConfigError("stream: no tasks");
  const auto c = classes_per_task();
  const auto d = input_dim();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const auto where = "stream task " + std::to_string(t + 1);
    if (task.num_classes != c) throw ConfigError(where + ": class count differs across tasks");
    if (task.train.size() == 0) throw ConfigError(where + ": empty training set");
    for (const auto* ds : {&task.train, &task.validation, &task.test}) {
      if (ds->size() == 0) continue;
      if (ds->dim() != d) throw ConfigError(where + ": feature width differs across tasks");
      if (ds->num_classes != c) throw ConfigError(where + ": split class count mismatch");
      ds->validate();
    }
  }
}

// ---------------------------------------------------------------------------

NormalizationStats fit_normalization(const LabeledDataset& train) {
  const std::size_t n = train.size();
  const std::size_t d = train.dim();
  NormalizationStats stats{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (n == 0) return stats;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] += train.features(i, j);
  }
  for (double& m : stats.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = train.features(i, j) - stats.mean[j];
      var[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    stats.stddev[j] = sd < kStdFloor ? 1.0 : sd;
  }
  return stats;
}

void apply_normalization(LabeledDataset& ds, const NormalizationStats& stats) {
  if (ds.size() == 0) {
    ds.normalization = stats;
    return;
  }
  require_same_size(ds.dim(), stats.mean.size(), "apply_normalization");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = (row[j] - stats.mean[j]) / stats.stddev[j];
    }
  }
  ds.normalization = stats;
}

void normalize_task(Task& task) {
  const auto stats = fit_normalization(task.train);
  apply_normalization(task.train, stats);
  apply_normalization(task.validation, stats);
  apply_normalization(task.test, stats);
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  out.normalization = ds.normalization;
  out.features = Matrix(0, ds.dim());
  out.labels.reserve(rows.size());
  std::vector<double> values;
  values.reserve(rows.size() * ds.dim());
  for (auto r : rows) {
    if (r >= ds.size()) throw ShapeError("subset: row index out of range");
    const auto row = ds.features.row(r);
    values.insert(values.end(), row.begin(), row.end());
    out.labels.push_back(ds.labels[r]);
  }
  out.features = Matrix(rows.size(), ds.dim(), std::move(values));
  return out;
}

TaskBatch make_batch(const LabeledDataset& ds, std::span<const std::size_t> rows,
                     std::size_t task) {
  auto part = subset(ds, rows);
  return TaskBatch{std::move(part.features), task, std::move(part.labels)};
}

std::pair<LabeledDataset, LabeledDataset> split_train_validation(const LabeledDataset& ds,
                                                                 double fraction,
                                                                 std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("split_train_validation: fraction must be in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_first = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  const std::size_t n_second = n - std::min(n, n_first);
  if (n_first == 0 || n_second == 0) {
    throw ConfigError("split_train_validation: one side of the split would be empty");
  }

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  for (auto& rows : by_class) std::shuffle(rows.begin(), rows.end(), rng);

  // Per-class second-side quotas: floors first, then largest remainders.
  const double share = static_cast<double>(n_second) / static_cast<double>(n);
  std::vector<std::size_t> quota(by_class.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = share * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n_second && k < remainders.size(); ++k) {
    const auto c = remainders[k].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& rows = by_class[c];
    second.insert(second.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    first.insert(first.end(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]), rows.end());
  }
  std::shuffle(first.begin(), first.end(), rng);
  std::shuffle(second.begin(), second.end(), rng);
  return {subset(ds, first), subset(ds, second)};
}

TaskStream with_validation_split(const TaskStream& stream, double fraction, std::uint64_t seed) {
  TaskStream out = stream;
  for (std::size_t t = 0; t < out.tasks.size(); ++t) {
    auto [train, val] = split_train_validation(stream.tasks[t].train, fraction, mix_seed(seed, t));
    out.tasks[t].train = std::move(train);
    out.tasks[t].validation = std::move(val);
  }
  return out;
}

// ---------------------------------------------------------------------------

void SyntheticStreamSpec::validate() const {
  if (num_tasks == 0) throw ConfigError("synthetic: tasks must be positive");
  if (classes_per_task < 2) throw ConfigError("synthetic: classes_per_task must be >= 2");
  if (train_per_class == 0) throw ConfigError("synthetic: train_per_class must be positive");
  if (test_per_class == 0) throw ConfigError("synthetic: test_per_class must be positive");
  if (input_dim == 0) throw ConfigError("synthetic: input_dim must be positive");
  if (clusters_per_class == 0) throw ConfigError("synthetic: clusters_per_class must be positive");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw ConfigError("synthetic: separation must be >= 0");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("synthetic: noise must be >= 0");
  if (!rotation_angles.empty()) {
    if (rotation_angles.size() != num_tasks) {
      throw ConfigError("synthetic: need one rotation angle per task");
    }
    for (double a : rotation_angles) {
      if (!(a >= 0.0 && a < std::numbers::pi)) {
        throw ConfigError("synthetic: rotation angles must lie in [0, pi)");
      }
    }
  }
}

double SyntheticStreamSpec::angle(std::size_t task) const {
  if (!rotation_angles.empty()) return rotation_angles.at(task);
  return static_cast<double>(task) * std::numbers::pi / static_cast<double>(num_tasks);
}

TaskStream make_synthetic_stream(const SyntheticStreamSpec& spec) {
  spec.validate();
  const std::size_t d = spec.input_dim;
  const std::size_t c = spec.classes_per_task;

  Rng centroid_rng(mix_seed(spec.seed, 0));
  auto draw_centroids = [&]() {
    std::vector<std::vector<double>> cs;
    for (std::size_t k = 0; k < c * spec.clusters_per_class; ++k) {
      auto u = random_unit(centroid_rng, d);
      for (double& x : u) x *= spec.separation;
      cs.push_back(std::move(u));
    }
    return cs;
  };
  const auto base_centroids = draw_centroids();

  TaskStream stream;
  for (std::size_t t = 0; t < spec.num_tasks; ++t) {
    const auto centroids =
        spec.transform == TaskTransform::kFreshClusters && t > 0 ? draw_centroids() : base_centroids;

    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng task_rng(mix_seed(spec.seed, 1000 + t));
    if (spec.transform == TaskTransform::kPermutation && t > 0) {
      std::shuffle(perm.begin(), perm.end(), task_rng);
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    auto sample = [&](std::size_t per_class) {
      LabeledDataset ds;
      ds.num_classes = c;
      ds.features = Matrix(0, d);
      std::vector<double> values;
      std::vector<double> x(d);
      std::vector<double> y(d);
      for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
          const auto& mu = centroids[k * spec.clusters_per_class + i % spec.clusters_per_class];
          const double sign = spec.antipodal && (i / spec.clusters_per_class) % 2 == 1 ? -1.0 : 1.0;
          for (std::size_t j = 0; j < d; ++j) x[j] = sign * mu[j] + spec.noise * normal(task_rng);
          if (spec.transform == TaskTransform::kRotation) rotate_pairs(x, spec.angle(t));
          for (std::size_t j = 0; j < d; ++j) y[j] = x[perm[j]];
          values.insert(values.end(), y.begin(), y.end());
          ds.labels.push_back(static_cast<int>(k));
        }
      }
      ds.features = Matrix(ds.labels.size(), d, std::move(values));
      return ds;
    };

    Task task;
    task.num_classes = c;
    task.train = sample(spec.train_per_class);
    task.test = sample(spec.test_per_class);
    task.validation.num_classes = c;
    task.validation.features = Matrix(0, d);
    for (std::size_t k = 0; k < c; ++k) task.source_classes.push_back(static_cast<int>(t * c + k));
    normalize_task(task);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream class_split(const LabeledDataset& train, const LabeledDataset& test,
                       std::size_t num_tasks, std::size_t classes_per_task,
                       std::size_t train_cap_per_task, std::size_t test_cap_per_task,
                       std::uint64_t seed) {
  if (num_tasks == 0 || classes_per_task < 2) {
    throw ConfigError("class_split: need at least one task with two or more classes");
  }
  const std::size_t total_classes = std::max(train.num_classes, test.num_classes);
  if (num_tasks * classes_per_task > total_classes) {
    throw ConfigError("class_split: " + std::to_string(num_tasks) + " tasks x " +
                      std::to_string(classes_per_task) + " classes exceeds " +
                      std::to_string(total_classes) + " available classes");
  }
  if (train.dim() != test.dim()) throw ConfigError("class_split: train/test width mismatch");

  Rng rng(seed);
  std::vector<int> order(total_classes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  auto take = [&rng](const LabeledDataset& ds, std::span<const int> classes, std::size_t cap,
                     const char* which, std::size_t t) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (std::find(classes.begin(), classes.end(), ds.labels[i]) != classes.end()) rows.push_back(i);
    }
    for (int cls : classes) {
      if (std::none_of(rows.begin(), rows.end(), [&](auto r) { return ds.labels[r] == cls; })) {
        throw ConfigError(std::string("class_split: class ") + std::to_string(cls) + " has no " +
                          which + " samples (task " + std::to_string(t + 1) + ")");
      }
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    if (cap > 0 && rows.size() > cap) rows.resize(cap);
    auto part = subset(ds, rows);
    for (int& y : part.labels) {
      y = static_cast<int>(std::find(classes.begin(), classes.end(), y) - classes.begin());
    }
    part.num_classes = classes.size();
    part.normalization.reset();
    return part;
  };

  TaskStream stream;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    std::span<const int> classes(order.data() + t * classes_per_task, classes_per_task);
    Task task;
    task.num_classes = classes_per_task;
    task.source_classes.assign(classes.begin(), classes.end());
    task.train = take(train, classes, train_cap_per_task, "training", t);
    task.test = take(test, classes, test_cap_per_task, "test", t);
    task.validation.num_classes = classes_per_task;
    task.validation.features = Matrix(0, train.dim());
    normalize_task(task);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

}  // namespace tagopt
