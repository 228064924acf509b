#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "tagopt/errors.hpp"
#include "tagopt/io.hpp"
#include "tagopt/kernels.hpp"
#include "tagopt/optim.hpp"

namespace tagopt {

namespace {

constexpr double kNormFloor = 1e-12;

std::string_view mode_name(MomentAccumulation m) {
  return m == MomentAccumulation::kCumulative ? "cumulative" : "exponential";
}

}  // namespace

KnowledgeBase::KnowledgeBase(std::size_t param_count, MomentAccumulation mode) : mode_(mode) {
  current_.first.assign(param_count, 0.0);
  current_.second.assign(param_count, 0.0);
}

void KnowledgeBase::update(std::span<const double> g, const OptimConfig& cfg) {
  if (!active_) throw StateError("knowledge base: update after commit without begin_task");
  require_same_size(g.size(), param_count(), "KnowledgeBase::update");
  kernels::ema(current_.first, g, cfg.beta1);
  if (mode_ == MomentAccumulation::kCumulative) {
    kernels::accumulate_square(current_.second, g);
  } else {
    kernels::ema_square(current_.second, g, cfg.beta2);
  }
  ++current_.steps;
}

void KnowledgeBase::commit_task() {
  if (!active_) throw StateError("knowledge base: task already committed");
  if (current_.steps == 0) throw StateError("knowledge base: cannot commit a task with no steps");
  const std::size_t n = param_count();
  frozen_.push_back(std::move(current_));
  current_ = TaskMoments{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  active_ = false;
}

void KnowledgeBase::begin_task() {
  if (active_) throw StateError("knowledge base: begin_task while a task is active");
  active_ = true;
}

void KnowledgeBase::write_csv(std::ostream& out) const {
  out << "# tagopt-knowledge-base params=" << param_count() << " mode=" << mode_name(mode_)
      << " active=" << (active_ ? 1 : 0) << '\n';
  out << "task,state,moment,steps,values\n";
  auto row = [&out](std::size_t task, std::string_view state, char moment, std::size_t steps,
                    std::span<const double> values) {
    out << task << ',' << state << ',' << moment << ',' << steps;
    for (double v : values) out << ',' << io::format_double(v);
    out << '\n';
  };
  for (std::size_t i = 0; i < frozen_.size(); ++i) {
    row(i + 1, "frozen", 'M', frozen_[i].steps, frozen_[i].first);
    row(i + 1, "frozen", 'V', frozen_[i].steps, frozen_[i].second);
  }
  if (active_) {
    row(task(), "current", 'M', current_.steps, current_.first);
    row(task(), "current", 'V', current_.steps, current_.second);
  }
}

KnowledgeBase KnowledgeBase::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# tagopt-knowledge-base", 0) != 0) {
    throw FormatError("knowledge base csv: missing header line");
  }
  std::size_t params = 0;
  MomentAccumulation mode = MomentAccumulation::kExponential;
  bool active = false;
  for (auto tok : io::split(line, ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = tok.substr(0, eq);
    const auto val = tok.substr(eq + 1);
    if (key == "params") params = static_cast<std::size_t>(io::parse_int(val));
    if (key == "mode") {
      if (val == "cumulative") mode = MomentAccumulation::kCumulative;
      else if (val != "exponential") throw FormatError("knowledge base csv: bad mode");
    }
    if (key == "active") active = io::parse_int(val) != 0;
  }
  if (!std::getline(in, line)) throw FormatError("knowledge base csv: missing column header");

  KnowledgeBase kb(params, mode);
  kb.active_ = false;
  bool have_current = false;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto cells = io::split(line, ',');
    if (cells.size() != 4 + params) {
      throw FormatError("knowledge base csv: line " + std::to_string(line_no) +
                        " has wrong value count");
    }
    const auto task = static_cast<std::size_t>(io::parse_int(cells[0]));
    const auto state = cells[1];
    const auto moment = cells[2];
    const auto steps = static_cast<std::size_t>(io::parse_int(cells[3]));
    std::vector<double> values(params);
    for (std::size_t i = 0; i < params; ++i) values[i] = io::parse_double(cells[4 + i]);

    TaskMoments* target = nullptr;
    if (state == "frozen") {
      if (task == kb.frozen_.size() + 1 && moment == "M") {
        kb.frozen_.push_back(TaskMoments{{}, {}, steps});
      }
      if (task != kb.frozen_.size()) {
        throw FormatError("knowledge base csv: frozen tasks out of order at line " +
                          std::to_string(line_no));
      }
      target = &kb.frozen_.back();
    } else if (state == "current") {
      if (task != kb.frozen_.size() + 1) {
        throw FormatError("knowledge base csv: current task id mismatch");
      }
      have_current = true;
      target = &kb.current_;
      target->steps = steps;
    } else {
      throw FormatError("knowledge base csv: unknown state at line " + std::to_string(line_no));
    }
    if (moment == "M") target->first = std::move(values);
    else if (moment == "V") target->second = std::move(values);
    else throw FormatError("knowledge base csv: unknown moment at line " + std::to_string(line_no));
  }
  for (const auto& f : kb.frozen_) {
    if (f.first.size() != params || f.second.size() != params) {
      throw FormatError("knowledge base csv: incomplete frozen entry");
    }
  }
  if (have_current != active) throw FormatError("knowledge base csv: active flag mismatch");
  kb.active_ = active;
  return kb;
}

double tag_alpha(std::span<const double> m_cur, std::span<const double> m_prev, double b) {
  require_same_size(m_cur.size(), m_prev.size(), "tag_alpha");
  const double na = std::sqrt(kernels::squared_norm(m_cur));
  const double nb = std::sqrt(kernels::squared_norm(m_prev));
  if (na < kNormFloor || nb < kNormFloor) return 1.0;
  const double cosine = std::clamp(kernels::dot(m_cur, m_prev) / (na * nb), -1.0, 1.0);
  return std::exp(-b * cosine);
}

std::vector<double> tag_alphas(const KnowledgeBase& kb, double b) {
  std::vector<double> alphas;
  alphas.reserve(kb.task());
  for (const auto& f : kb.frozen()) alphas.push_back(tag_alpha(kb.current_first(), f.first, b));
  // Self-correlation of the running first moment: exp(-b), or 1 before any signal.
  alphas.push_back(tag_alpha(kb.current_first(), kb.current_first(), b));
  return alphas;
}

std::vector<double> tag_weighted_second_moment(const KnowledgeBase& kb,
                                               std::span<const double> alphas) {
  const auto current = kb.current_second();
  std::vector<double> out(current.begin(), current.end());
  if (kb.task() == 1) return out;
  require_same_size(alphas.size(), kb.task(), "tag_weighted_second_moment");
  const double self = alphas.back();
  for (double& v : out) v *= self;
  for (std::size_t tau = 0; tau < kb.frozen().size(); ++tau) {
    kernels::axpy(out, alphas[tau], kb.frozen()[tau].second);
  }
  return out;
}

std::vector<double> tag_weighted_second_moment(const KnowledgeBase& kb, const OptimConfig& cfg) {
  if (kb.task() == 1) return tag_weighted_second_moment(kb, std::span<const double>{});
  return tag_weighted_second_moment(kb, tag_alphas(kb, cfg.b));
}

}  // namespace tagopt
