#include "tagopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "tagopt/errors.hpp"
#include "tagopt/io.hpp"

namespace tagopt {

AccuracyMatrix::AccuracyMatrix(std::size_t num_tasks) : num_tasks_(num_tasks) {
  if (num_tasks == 0) throw ConfigError("accuracy matrix needs at least one task");
}

void AccuracyMatrix::push_row(std::span<const double> row) {
  const std::size_t t = rows_.size() + 1;
  if (t > num_tasks_) throw StateError("accuracy matrix is already complete");
  if (row.size() != t) {
    throw ShapeError("accuracy row " + std::to_string(t) + " needs " + std::to_string(t) +
                     " entries, got " + std::to_string(row.size()));
  }
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("accuracy outside [0, 1]");
  }
  rows_.emplace_back(row.begin(), row.end());
}

void AccuracyMatrix::require_row(std::size_t t, const char* what) const {
  if (t < 1 || t > num_tasks_) {
    throw DomainError(std::string(what) + ": task " + std::to_string(t) + " out of range");
  }
  if (t > rows_.size()) {
    throw StateError(std::string(what) + ": row " + std::to_string(t) + " is not filled");
  }
}

double AccuracyMatrix::at(std::size_t t, std::size_t tau) const {
  require_row(t, "accuracy matrix");
  if (tau < 1 || tau > t) throw DomainError("accuracy matrix: tau must be in [1, t]");
  return rows_[t - 1][tau - 1];
}

std::span<const double> AccuracyMatrix::row(std::size_t t) const {
  require_row(t, "accuracy matrix");
  return rows_[t - 1];
}

void AccuracyMatrix::write_csv(std::ostream& out) const {
  out << "t,tau,accuracy\n";
  for (std::size_t t = 1; t <= rows_.size(); ++t) {
    for (std::size_t tau = 1; tau <= t; ++tau) {
      out << t << ',' << tau << ',' << io::format_double(rows_[t - 1][tau - 1]) << '\n';
    }
  }
}

AccuracyMatrix AccuracyMatrix::read_csv(std::istream& in, std::size_t num_tasks) {
  AccuracyMatrix m(num_tasks);
  std::vector<double> row;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    const auto text = io::trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (!header) {
      if (text != "t,tau,accuracy") throw FormatError("accuracy csv: unexpected header");
      header = true;
      continue;
    }
    const auto cells = io::split(text, ',');
    if (cells.size() != 3) throw FormatError("accuracy csv: expected 3 columns");
    const auto t = static_cast<std::size_t>(io::parse_int(cells[0]));
    const auto tau = static_cast<std::size_t>(io::parse_int(cells[1]));
    if (t != m.rows_filled() + 1 || tau != row.size() + 1) {
      throw FormatError("accuracy csv: rows out of order");
    }
    row.push_back(io::parse_double(cells[2]));
    if (tau == t) {
      m.push_row(row);
      row.clear();
    }
  }
  if (!row.empty()) throw FormatError("accuracy csv: incomplete final row");
  return m;
}

double accuracy_at(const AccuracyMatrix& a, std::size_t t) {
  const auto r = a.row(t);
  double s = 0.0;
  for (double v : r) s += v;
  return s / static_cast<double>(t);
}

double forgetting_at(const AccuracyMatrix& a, std::size_t t) {
  if (t < 2) throw DomainError("forgetting is undefined before the second task");
  const auto last = a.row(t);
  double s = 0.0;
  for (std::size_t tau = 1; tau < t; ++tau) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t tp = tau; tp < t; ++tp) peak = std::max(peak, a.at(tp, tau) - last[tau - 1]);
    s += peak;
  }
  return s / static_cast<double>(t - 1);
}

double learning_accuracy_at(const AccuracyMatrix& a, std::size_t t) {
  (void)a.row(t);
  double s = 0.0;
  for (std::size_t tau = 1; tau <= t; ++tau) s += a.at(tau, tau);
  return s / static_cast<double>(t);
}

// ---------------------------------------------------------------------------

AlphaTrace::AlphaTrace(std::size_t num_tasks, AlphaTraceMode mode)
    : mode_(mode), sums_(num_tasks), counts_(num_tasks, 0) {
  for (std::size_t t = 0; t < num_tasks; ++t) sums_[t].assign(t + 1, 0.0);
}

bool AlphaTrace::empty() const noexcept {
  return std::all_of(counts_.begin(), counts_.end(), [](std::size_t c) { return c == 0; });
}

void AlphaTrace::record(std::size_t t, std::span<const double> alphas) {
  if (mode_ == AlphaTraceMode::kOff) return;
  if (t < 1 || t > sums_.size()) throw DomainError("alpha trace: task out of range");
  if (alphas.size() != t) throw ShapeError("alpha trace: expected one weight per task so far");
  auto& s = sums_[t - 1];
  for (std::size_t i = 0; i < t; ++i) s[i] += alphas[i];
  const std::size_t n = ++counts_[t - 1];
  if (mode_ == AlphaTraceMode::kFull) {
    steps_.push_back(Step{t, n, std::vector<double>(alphas.begin(), alphas.end())});
  }
}

std::size_t AlphaTrace::count(std::size_t t) const {
  if (t < 1 || t > counts_.size()) throw DomainError("alpha trace: task out of range");
  return counts_[t - 1];
}

double AlphaTrace::mean(std::size_t t, std::size_t tau) const {
  const std::size_t n = count(t);
  if (tau < 1 || tau > t) throw DomainError("alpha trace: tau must be in [1, t]");
  if (n == 0) throw StateError("alpha trace: nothing recorded for this task");
  return sums_[t - 1][tau - 1] / static_cast<double>(n);
}

void AlphaTrace::write_csv(std::ostream& out) const {
  out << "t,tau,alpha_mean,alpha_min,alpha_max\n";
  for (std::size_t t = 1; t <= counts_.size(); ++t) {
    if (counts_[t - 1] == 0) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t tau = 1; tau < t; ++tau) {
      lo = std::min(lo, mean(t, tau));
      hi = std::max(hi, mean(t, tau));
    }
    for (std::size_t tau = 1; tau <= t; ++tau) {
      out << t << ',' << tau << ',' << io::format_double(mean(t, tau)) << ','
          << io::format_double(lo) << ',' << io::format_double(hi) << '\n';
    }
  }
}

void AlphaTrace::write_steps_csv(std::ostream& out) const {
  out << "t,step,tau,alpha\n";
  for (const auto& s : steps_) {
    for (std::size_t tau = 1; tau <= s.alphas.size(); ++tau) {
      out << s.task << ',' << s.step << ',' << tau << ',' << io::format_double(s.alphas[tau - 1])
          << '\n';
    }
  }
}

}  // namespace tagopt
