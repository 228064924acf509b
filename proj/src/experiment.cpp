#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "tagopt/errors.hpp"
#include "tagopt/experiment.hpp"
#include "tagopt/io.hpp"

namespace tagopt {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) { return io::format_double(v); }

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

// Directory-safe form of a variant label such as "er[memory_per_class=5]".
std::string dir_name(std::string_view label) {
  std::string out;
  for (char c : label) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
    if (keep) {
      out += c;
    } else if (c == '=') {
      out += '-';
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

fs::path seed_dir(const fs::path& base, std::uint64_t seed) {
  return base / ("seed-" + std::to_string(seed));
}

void write_text(const fs::path& path, std::string_view text) {
  auto out = open_out(path);
  out << text;
}

struct Aggregate {
  MetricStats accuracy;
  std::optional<MetricStats> forgetting;
  MetricStats learning;
};

Aggregate aggregate(const std::vector<const RunResult*>& runs) {
  std::vector<double> a;
  std::vector<double> f;
  std::vector<double> l;
  for (const auto* r : runs) {
    a.push_back(r->final_accuracy);
    if (r->forgetting) f.push_back(*r->forgetting);
    l.push_back(r->learning_accuracy);
  }
  Aggregate g{summarize(a), std::nullopt, summarize(l)};
  if (!f.empty()) g.forgetting = summarize(f);
  return g;
}

void write_aggregate_rows(std::ostream& out, std::string_view prefix, const Aggregate& g) {
  auto row = [&](const char* name, const MetricStats& s) {
    out << prefix << name << ',' << fmt(s.mean) << ',' << fmt(s.stddev) << ',' << s.n << '\n';
  };
  row("final_accuracy", g.accuracy);
  if (g.forgetting) row("forgetting", *g.forgetting);
  row("learning_accuracy", g.learning);
}

void log_result(std::ostream& log, std::string_view label, const RunResult& r) {
  log << label << " seed " << r.seed << ": A=" << fmt(r.final_accuracy)
      << " F=" << (r.forgetting ? fmt(*r.forgetting) : "absent") << " L=" << fmt(r.learning_accuracy)
      << '\n';
}

void log_aggregate(std::ostream& log, std::string_view label, const Aggregate& g) {
  log << label << " mean over " << g.accuracy.n << " seed(s): A=" << fmt(g.accuracy.mean) << " +- "
      << fmt(g.accuracy.stddev);
  if (g.forgetting) log << " F=" << fmt(g.forgetting->mean) << " +- " << fmt(g.forgetting->stddev);
  log << " L=" << fmt(g.learning.mean) << " +- " << fmt(g.learning.stddev) << '\n';
}

std::string join_words(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? " " : "") + std::to_string(seeds[i]);
  return s;
}

}  // namespace

std::string comment_block(std::string_view echo) {
  std::string out;
  std::size_t start = 0;
  while (start < echo.size()) {
    auto end = echo.find('\n', start);
    if (end == std::string_view::npos) end = echo.size();
    const auto line = echo.substr(start, end - start);
    out += line.empty() ? "#\n" : "# " + std::string(line) + "\n";
    start = end + 1;
  }
  return out;
}

void write_summary(std::ostream& out, const RunResult& r, std::string_view echo) {
  out << comment_block(echo);
  out << "method = " << r.method << '\n';
  out << "seed = " << r.seed << '\n';
  out << "tasks = " << r.accuracy.rows_filled() << '\n';
  out << "final_accuracy = " << fmt(r.final_accuracy) << '\n';
  out << "forgetting = " << (r.forgetting ? fmt(*r.forgetting) : "absent") << '\n';
  out << "learning_accuracy = " << fmt(r.learning_accuracy) << '\n';
  out << "steps_per_task =";
  for (auto s : r.task_steps) out << ' ' << s;
  out << "\nseconds_per_task =";
  for (auto s : r.task_seconds) out << ' ' << fmt(s);
  out << "\ntotal_seconds = " << fmt(r.total_seconds()) << '\n';
}

void write_run_bundle(const fs::path& dir, const RunResult& r, std::string_view echo) {
  fs::create_directories(dir);
  const auto header = comment_block(echo);
  {
    auto out = open_out(dir / "summary.txt");
    write_summary(out, r, echo);
  }
  {
    auto out = open_out(dir / "accuracy_matrix.csv");
    out << header;
    r.accuracy.write_csv(out);
  }
  if (r.has_alpha) {
    auto out = open_out(dir / "alpha_trace.csv");
    out << header;
    r.alpha.write_csv(out);
    if (r.alpha.mode() == AlphaTraceMode::kFull) {
      auto steps = open_out(dir / "alpha_steps.csv");
      steps << header;
      r.alpha.write_steps_csv(steps);
    }
  }
  if (r.knowledge_base) {
    auto out = open_out(dir / "knowledge_base.csv");
    r.knowledge_base->write_csv(out);
  }
  if (r.memory) {
    auto out = open_out(dir / "memory.csv");
    out << header;
    r.memory->write_csv(out);
  }
}

MetricStats summarize(const std::vector<double>& values) {
  MetricStats s;
  s.n = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

ConfigDoc load_command_config(const CommandOptions& opts) {
  auto doc = ConfigDoc::parse_file(opts.config_path);
  for (const auto& o : opts.overrides) doc.set(o);
  if (!opts.seeds.empty()) doc.set("seeds", ConfigValue{{join_words(opts.seeds)}, false, 0});
  if (opts.alpha_trace) {
    const char* names[] = {"off", "mean", "full"};
    doc.set("alpha_trace", ConfigValue{{names[static_cast<int>(*opts.alpha_trace)]}, false, 0});
  }
  return doc;
}

std::vector<RunResult> cmd_run(const CommandOptions& opts, std::ostream& log) {
  const auto doc = load_command_config(opts);
  if (const auto lists = doc.list_keys(); !lists.empty()) {
    throw ConfigError("key '" + lists.front() + "' has a list value; use the grid or compare command");
  }
  auto cfg = resolve_config(doc);
  cfg.run.keep_state = true;
  const auto stream = build_stream(cfg.stream);
  const auto echo = doc.echo();

  std::vector<RunResult> results(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), [&](std::size_t i) {
    results[i] = run_stream(stream, cfg.run, cfg.seeds[i]);
  });

  fs::create_directories(opts.out_dir);
  write_text(opts.out_dir / "config.ini", echo);
  std::vector<const RunResult*> ptrs;
  for (const auto& r : results) {
    write_run_bundle(seed_dir(opts.out_dir, r.seed), r, echo);
    log_result(log, r.method, r);
    ptrs.push_back(&r);
  }
  const auto g = aggregate(ptrs);
  auto out = open_out(opts.out_dir / "aggregate.csv");
  out << comment_block(echo) << "metric,mean,std,n\n";
  write_aggregate_rows(out, "", g);
  log_aggregate(log, cfg.run.method, g);
  return results;
}

GridResult cmd_grid(const CommandOptions& opts, std::ostream& log) {
  const auto doc = load_command_config(opts);
  const auto cells = expand_grid(doc);
  const auto keys = doc.list_keys();

  std::vector<RunConfig> grid;
  std::optional<ExperimentConfig> first;
  for (const auto& cell : cells) {
    auto cfg = resolve_config(cell.doc);
    if (!first) first = cfg;
    grid.push_back(cfg.run);
  }
  const auto stream = build_stream(first->stream);
  auto result = grid_search(stream, grid, first->seeds, first->validation_fraction);

  const auto echo = doc.echo();
  fs::create_directories(opts.out_dir);
  write_text(opts.out_dir / "config.ini", echo);
  {
    auto out = open_out(opts.out_dir / "validation_table.csv");
    out << comment_block(echo) << "rank,cell";
    for (const auto& k : keys) out << ',' << k;
    out << ",validation_accuracy,validation_forgetting\n";
    for (std::size_t rank = 0; rank < result.rows.size(); ++rank) {
      const auto& row = result.rows[rank];
      out << rank + 1 << ',' << row.index + 1;
      for (const auto& [k, v] : cells[row.index].assignment) out << ',' << v;
      out << ',' << fmt(row.validation_accuracy) << ',' << fmt_opt(row.validation_forgetting) << '\n';
    }
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto cell_dir = opts.out_dir / "cells" / ("cell-" + std::to_string(c + 1));
    const auto cell_echo = cells[c].doc.echo();
    for (const auto& r : result.runs[c]) {
      fs::create_directories(seed_dir(cell_dir, r.seed));
      auto out = open_out(seed_dir(cell_dir, r.seed) / "validation_matrix.csv");
      out << comment_block(cell_echo);
      r.accuracy.write_csv(out);
    }
  }
  const auto& best = cells[result.best_index];
  write_text(opts.out_dir / "best_config.ini", best.doc.echo());
  log << "grid: " << cells.size() << " configuration(s), " << first->seeds.size() << " seed(s)\n";
  log << "best cell " << result.best_index + 1 << ':';
  for (const auto& [k, v] : best.assignment) log << ' ' << k << '=' << v;
  log << " validation A=" << fmt(result.rows.front().validation_accuracy) << '\n';
  return result;
}

std::vector<RunResult> cmd_compare(const CommandOptions& opts, std::ostream& log) {
  const auto doc = load_command_config(opts);
  const auto cells = expand_grid(doc);

  struct Variant {
    std::string label;
    ExperimentConfig cfg;
    std::string echo;
  };
  std::vector<Variant> variants;
  for (const auto& cell : cells) {
    auto cfg = resolve_config(cell.doc);
    cfg.run.keep_state = true;
    std::string extra;
    for (const auto& [k, v] : cell.assignment) {
      if (k == "method") continue;
      extra += (extra.empty() ? "" : ",") + k + "=" + v;
    }
    auto label = cfg.run.method + (extra.empty() ? "" : "[" + extra + "]");
    variants.push_back({std::move(label), cfg, cell.doc.for_method(cfg.run.method).echo()});
  }
  const auto& seeds = variants.front().cfg.seeds;
  const auto stream = build_stream(variants.front().cfg.stream);

  const std::size_t n = variants.size() * seeds.size();
  std::vector<RunResult> results(n);
  parallel_for(n, [&](std::size_t k) {
    const auto& v = variants[k / seeds.size()];
    results[k] = run_stream(stream, v.cfg.run, seeds[k % seeds.size()]);
  });

  const auto echo = doc.echo();
  fs::create_directories(opts.out_dir);
  write_text(opts.out_dir / "config.ini", echo);
  auto table = open_out(opts.out_dir / "comparison.csv");
  table << comment_block(echo) << "method,seed,final_accuracy,forgetting,learning_accuracy,wall_seconds\n";
  auto agg = open_out(opts.out_dir / "aggregate.csv");
  agg << comment_block(echo) << "method,metric,mean,std,n\n";
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const auto& v = variants[vi];
    std::vector<const RunResult*> ptrs;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      auto& r = results[vi * seeds.size() + si];
      r.method = v.label;
      table << v.label << ',' << r.seed << ',' << fmt(r.final_accuracy) << ',' << fmt_opt(r.forgetting)
            << ',' << fmt(r.learning_accuracy) << ',' << fmt(r.total_seconds()) << '\n';
      write_run_bundle(seed_dir(opts.out_dir / dir_name(v.label), r.seed), r, v.echo);
      log_result(log, v.label, r);
      ptrs.push_back(&r);
    }
    const auto g = aggregate(ptrs);
    write_aggregate_rows(agg, v.label + ",", g);
    log_aggregate(log, v.label, g);
  }
  return results;
}

void cmd_export(const CommandOptions& opts, std::ostream& log) {
  const auto doc = load_command_config(opts);
  const auto cfg = resolve_config(doc);
  const auto stream = build_stream(cfg.stream);
  const auto header = comment_block(doc.echo());
  fs::create_directories(opts.out_dir);
  for (std::size_t t = 0; t < stream.num_tasks(); ++t) {
    const auto& task = stream.tasks[t];
    const auto stem = "task-" + std::to_string(t + 1);
    for (const auto& [name, ds] : {std::pair{"train", &task.train}, std::pair{"test", &task.test}}) {
      auto out = open_out(opts.out_dir / (stem + "-" + name + ".csv"));
      out << header;
      write_csv_dataset(*ds, out);
    }
  }
  log << "exported " << stream.num_tasks() << " task(s) to " << opts.out_dir.string() << '\n';
}

}  // namespace tagopt
