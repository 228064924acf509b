#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tagopt/matrix.hpp"
#include "tagopt/net.hpp"

namespace tagopt {

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

struct LabeledDataset {
  Matrix features;          // n x d
  std::vector<int> labels;  // in [0, num_classes)
  std::size_t num_classes = 0;
  std::optional<NormalizationStats> normalization;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return features.cols(); }
  void validate() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

struct Task {
  LabeledDataset train;
  LabeledDataset validation;  // may be empty
  LabeledDataset test;
  std::size_t num_classes = 0;
  std::vector<int> source_classes;  // global class id for each local label

  friend bool operator==(const Task&, const Task&) = default;
};

struct TaskStream {
  std::vector<Task> tasks;

  [[nodiscard]] std::size_t num_tasks() const noexcept { return tasks.size(); }
  [[nodiscard]] std::size_t classes_per_task() const;
  [[nodiscard]] std::size_t input_dim() const;
  void validate() const;

  friend bool operator==(const TaskStream&, const TaskStream&) = default;
};

// --- normalization --------------------------------------------------------

NormalizationStats fit_normalization(const LabeledDataset& train);
void apply_normalization(LabeledDataset& ds, const NormalizationStats& stats);
/// Z-scores all three splits with statistics from the training split only.
void normalize_task(Task& task);

// --- subsets and batches --------------------------------------------------

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows);
TaskBatch make_batch(const LabeledDataset& ds, std::span<const std::size_t> rows,
                     std::size_t task);

/// Class-stratified seeded split; `fraction` of each class goes to the first part.
std::pair<LabeledDataset, LabeledDataset> split_train_validation(const LabeledDataset& ds,
                                                                 double fraction,
                                                                 std::uint64_t seed);

/// Copy of the stream where each task's train split is divided into train/validation.
TaskStream with_validation_split(const TaskStream& stream, double fraction, std::uint64_t seed);

// --- synthetic streams ----------------------------------------------------

enum class TaskTransform { kRotation, kPermutation, kFreshClusters };

struct SyntheticStreamSpec {
  std::size_t num_tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  std::size_t input_dim = 16;
  std::size_t clusters_per_class = 1;  // each class is a balanced mixture of this many clusters
  bool antipodal = false;  // every cluster also appears mirrored through the origin
  TaskTransform transform = TaskTransform::kRotation;
  // One angle per task in [0, pi). Empty means evenly spaced: (t - 1) * pi / T.
  std::vector<double> rotation_angles;
  double separation = 3.0;
  double noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] double angle(std::size_t task) const;
};

/// Gaussian class clusters per task, transformed per task (rotation, feature permutation
/// or fresh centroids). Deterministic in the spec; splits are z-scored from train data.
TaskStream make_synthetic_stream(const SyntheticStreamSpec& spec);

/// Splits a labeled corpus into disjoint class groups, one per task. Caps of 0 mean no cap.
TaskStream class_split(const LabeledDataset& train, const LabeledDataset& test,
                       std::size_t num_tasks, std::size_t classes_per_task,
                       std::size_t train_cap_per_task, std::size_t test_cap_per_task,
                       std::uint64_t seed);

// --- flat files -----------------------------------------------------------

enum class DatasetFormat { kCsv, kIdx };

/// CSV: one example per row, label in the last column, '#' lines ignored.
/// IDX: `path` is the image file; `labels_path` the matching label file.
LabeledDataset load_flat_dataset(const std::filesystem::path& path, DatasetFormat format,
                                 const std::filesystem::path& labels_path = {});
LabeledDataset read_csv_dataset(std::istream& in);
LabeledDataset read_idx_dataset(std::istream& images, std::istream& labels);

void write_csv_dataset(const LabeledDataset& ds, std::ostream& out);
void export_csv(const LabeledDataset& ds, const std::filesystem::path& path);
/// Writes double-typed (0x0E) images and int-typed (0x0C) labels.
void export_idx(const LabeledDataset& ds, const std::filesystem::path& images,
                const std::filesystem::path& labels);

}  // namespace tagopt
