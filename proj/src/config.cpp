#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <string>

#include "tagopt/errors.hpp"
#include "tagopt/experiment.hpp"
#include "tagopt/io.hpp"

namespace tagopt {

namespace {

struct KeySpec {
  std::string_view key;
  std::string_view section;
};

constexpr std::array<std::string_view, 5> kSections{"stream", "model", "optim", "method", "run"};

constexpr std::array<KeySpec, 37> kKeys{{
    {"source", "stream"},
    {"tasks", "stream"},
    {"classes_per_task", "stream"},
    {"train_per_class", "stream"},
    {"test_per_class", "stream"},
    {"input_dim", "stream"},
    {"transform", "stream"},
    {"rotation_angles", "stream"},
    {"separation", "stream"},
    {"noise", "stream"},
    {"clusters_per_class", "stream"},
    {"antipodal", "stream"},
    {"data_seed", "stream"},
    {"train_path", "stream"},
    {"test_path", "stream"},
    {"train_labels_path", "stream"},
    {"test_labels_path", "stream"},
    {"train_cap", "stream"},
    {"test_cap", "stream"},
    {"hidden", "model"},
    {"dropout", "model"},
    {"lr", "optim"},
    {"beta1", "optim"},
    {"beta2", "optim"},
    {"epsilon", "optim"},
    {"b", "optim"},
    {"method", "method"},
    {"lambda", "method"},
    {"memory_per_class", "method"},
    {"memory_batch", "method"},
    {"fisher_max_examples", "method"},
    {"lr_decay", "method"},
    {"epochs", "run"},
    {"batch_size", "run"},
    {"seeds", "run"},
    {"alpha_trace", "run"},
    {"validation_fraction", "run"},
}};

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : kKeys) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

std::string where(std::string_view source, std::size_t line) {
  if (line == 0) return "override: ";
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

ConfigValue parse_value(std::string_view text, std::size_t line, std::string_view key,
                        std::string_view source) {
  ConfigValue v;
  v.line = line;
  text = io::trim(text);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') {
      throw ConfigError(where(source, line) + "unterminated list for key '" + std::string(key) + "'");
    }
    v.is_list = true;
    const auto body = io::trim(text.substr(1, text.size() - 2));
    if (body.empty()) {
      throw ConfigError(where(source, line) + "empty list for key '" + std::string(key) + "'");
    }
    for (auto item : io::split(body, ',')) {
      item = io::trim(item);
      if (item.empty()) {
        throw ConfigError(where(source, line) + "empty list item for key '" + std::string(key) + "'");
      }
      v.items.emplace_back(item);
    }
  } else {
    v.items.emplace_back(text);
  }
  return v;
}

void put(ConfigDoc::Entries& entries, std::string_view key, ConfigValue value, bool replace,
         std::string_view source) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      if (!replace) {
        throw ConfigError(where(source, value.line) + "duplicate key '" + std::string(key) + "'");
      }
      v = std::move(value);
      return;
    }
  }
  entries.emplace_back(std::string(key), std::move(value));
}

void check_key(std::string_view key, std::string_view section, std::size_t line,
               std::string_view source) {
  const auto* spec = find_key(key);
  if (spec == nullptr) {
    throw ConfigError(where(source, line) + "unknown key '" + std::string(key) + "'");
  }
  if (section.empty()) return;
  if (section.substr(0, 9) == "override ") {
    if (spec->section == "stream" || key == "method") {
      throw ConfigError(where(source, line) + "key '" + std::string(key) +
                        "' cannot appear in an override section");
    }
    return;
  }
  if (spec->section != section) {
    throw ConfigError(where(source, line) + "key '" + std::string(key) + "' belongs in [" +
                      std::string(spec->section) + "], not [" + std::string(section) + "]");
  }
}

std::string format_value(const ConfigValue& v) {
  if (!v.is_list) return v.items.front();
  std::string s = "[";
  for (std::size_t i = 0; i < v.items.size(); ++i) s += (i ? ", " : "") + v.items[i];
  return s + "]";
}

void echo_entries(std::ostringstream& out, const ConfigDoc::Entries& entries,
                  std::string_view section) {
  for (const auto& spec : kKeys) {
    if (!section.empty() && spec.section != section) continue;
    for (const auto& [k, v] : entries) {
      if (k == spec.key) out << k << " = " << format_value(v) << '\n';
    }
  }
}

}  // namespace

ConfigDoc ConfigDoc::parse(std::istream& in, std::string_view source) {
  ConfigDoc doc;
  std::string section;
  Entries* target = nullptr;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = io::trim(raw);
    if (text.empty() || text.front() == '#' || text.front() == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(where(source, line) + "malformed section header");
      section = std::string(io::trim(text.substr(1, text.size() - 2)));
      if (section.substr(0, 9) == "override ") {
        const auto name = std::string(io::trim(std::string_view(section).substr(9)));
        (void)parse_method(name);
        doc.overrides_.emplace_back(name, Entries{});
        target = &doc.overrides_.back().second;
      } else if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ConfigError(where(source, line) + "unknown section [" + section + "]");
      } else {
        target = &doc.entries_;
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where(source, line) + "expected 'key = value'");
    }
    const auto key = io::trim(text.substr(0, eq));
    if (section.empty()) {
      throw ConfigError(where(source, line) + "key '" + std::string(key) + "' outside any section");
    }
    check_key(key, section, line, source);
    auto value = parse_value(text.substr(eq + 1), line, key, source);
    if (target != &doc.entries_ && value.is_list) {
      throw ConfigError(where(source, line) + "override sections take scalar values only");
    }
    put(*target, key, std::move(value), false, source);
  }
  return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void ConfigDoc::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like key=value");
  }
  auto key = io::trim(assignment.substr(0, eq));
  std::string_view section;
  if (const auto dot = key.find('.'); dot != std::string_view::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  }
  check_key(key, section, 0, "");
  set(key, parse_value(assignment.substr(eq + 1), 0, key, ""));
}

void ConfigDoc::set(std::string_view key, ConfigValue value) {
  check_key(key, "", value.line, "");
  put(entries_, key, std::move(value), true, "");
}

const ConfigValue* ConfigDoc::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::vector<std::string> ConfigDoc::list_keys() const {
  std::vector<std::string> keys;
  for (const auto& [k, v] : entries_) {
    if (v.is_list) keys.push_back(k);
  }
  return keys;
}

ConfigDoc ConfigDoc::for_method(std::string_view method) const {
  ConfigDoc out;
  out.entries_ = entries_;
  for (const auto& [name, entries] : overrides_) {
    if (name != method) continue;
    for (const auto& [k, v] : entries) put(out.entries_, k, v, true, "");
  }
  return out;
}

std::string ConfigDoc::echo() const {
  std::ostringstream out;
  bool first = true;
  for (auto section : kSections) {
    const bool any = std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) {
      return find_key(e.first)->section == section;
    });
    if (!any) continue;
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    echo_entries(out, entries_, section);
  }
  for (const auto& [name, entries] : overrides_) {
    out << "\n[override " << name << "]\n";
    echo_entries(out, entries, "");
  }
  return out.str();
}

std::vector<GridCell> expand_grid(const ConfigDoc& doc) {
  const auto keys = doc.list_keys();
  for (const auto& k : keys) {
    if (find_key(k)->section == "stream") {
      throw ConfigError("stream key '" + k + "' cannot be a list; all runs share one stream");
    }
    if (k == "seeds") throw ConfigError("seeds is not a grid dimension; list seeds without brackets");
  }
  std::vector<const ConfigValue*> dims;
  std::size_t total = 1;
  for (const auto& k : keys) {
    dims.push_back(doc.find(k));
    total *= dims.back()->items.size();
  }
  std::vector<GridCell> cells;
  for (std::size_t c = 0; c < total; ++c) {
    GridCell cell;
    cell.doc = doc;
    std::size_t rest = c;
    std::vector<std::size_t> pick(keys.size());
    for (std::size_t i = keys.size(); i-- > 0;) {
      pick[i] = rest % dims[i]->items.size();
      rest /= dims[i]->items.size();
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& item = dims[i]->items[pick[i]];
      cell.assignment.emplace_back(keys[i], item);
      cell.doc.set(keys[i], ConfigValue{{item}, false, dims[i]->line});
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

// ---------------------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(const ConfigDoc& doc) : doc_(doc) {
    for (const auto& [k, v] : doc.entries()) {
      if (v.is_list) {
        throw ConfigError("key '" + k + "' has a list value; lists are only valid for grid and compare");
      }
    }
  }

  [[nodiscard]] const std::string* raw(std::string_view key) const {
    const auto* v = doc_.find(key);
    return v == nullptr ? nullptr : &v->items.front();
  }

  template <typename Fn>
  auto parse(std::string_view key, Fn fn) const -> std::optional<decltype(fn(std::string_view{}))> {
    const auto* text = raw(key);
    if (text == nullptr) return std::nullopt;
    try {
      return fn(*text);
    } catch (const Error& e) {
      throw ConfigError("key '" + std::string(key) + "': " + e.what());
    }
  }

  void real(std::string_view key, double& out) const {
    if (auto v = parse(key, [](std::string_view s) { return io::parse_double(s); })) out = *v;
  }
  void count(std::string_view key, std::size_t& out) const {
    if (auto v = parse(key, parse_count)) out = *v;
  }
  void seed(std::string_view key, std::uint64_t& out) const {
    if (auto v = parse(key, parse_count)) out = *v;
  }
  void flag(std::string_view key, bool& out) const {
    if (auto v = parse(key, [](std::string_view s) {
          if (s == "true" || s == "1") return true;
          if (s == "false" || s == "0") return false;
          throw FormatError("expected true or false, got '" + std::string(s) + "'");
        })) {
      out = *v;
    }
  }
  void text(std::string_view key, std::string& out) const {
    if (const auto* t = raw(key)) out = *t;
  }
  void path(std::string_view key, std::filesystem::path& out) const {
    if (const auto* t = raw(key)) out = *t;
  }
  template <typename T, typename Fn>
  void words(std::string_view key, std::vector<T>& out, Fn fn) const {
    if (auto v = parse(key, [&](std::string_view s) {
          std::vector<T> items;
          std::istringstream in{std::string(s)};
          std::string w;
          while (in >> w) items.push_back(fn(w));
          return items;
        })) {
      out = *v;
    }
  }

  static std::size_t parse_count(std::string_view s) {
    const auto v = io::parse_int(s);
    if (v < 0) throw FormatError("expected a non-negative integer, got '" + std::string(s) + "'");
    return static_cast<std::size_t>(v);
  }

 private:
  const ConfigDoc& doc_;
};

TaskTransform parse_transform(std::string_view s) {
  if (s == "rotation") return TaskTransform::kRotation;
  if (s == "permutation") return TaskTransform::kPermutation;
  if (s == "fresh") return TaskTransform::kFreshClusters;
  throw ConfigError("key 'transform': expected rotation, permutation or fresh, got '" +
                    std::string(s) + "'");
}

StreamSourceKind parse_source(std::string_view s) {
  if (s == "synthetic") return StreamSourceKind::kSynthetic;
  if (s == "csv") return StreamSourceKind::kCsv;
  if (s == "idx") return StreamSourceKind::kIdx;
  throw ConfigError("key 'source': expected synthetic, csv or idx, got '" + std::string(s) + "'");
}

template <typename Fn>
void checked(std::string_view key, Fn fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError("invalid " + std::string(key) + " settings: " + e.what());
  }
}

}  // namespace

AlphaTraceMode parse_alpha_trace_mode(std::string_view text) {
  if (text == "off") return AlphaTraceMode::kOff;
  if (text == "mean") return AlphaTraceMode::kMean;
  if (text == "full") return AlphaTraceMode::kFull;
  throw ConfigError("alpha trace mode must be mean, full or off, got '" + std::string(text) + "'");
}

ExperimentConfig resolve_config(const ConfigDoc& base) {
  std::string method = "naive-sgd";
  Reader(base).text("method", method);
  (void)parse_method(method);
  const ConfigDoc doc = base.for_method(method);
  const Reader r(doc);

  ExperimentConfig cfg;
  auto& s = cfg.stream;
  if (const auto* src = r.raw("source")) s.kind = parse_source(*src);
  auto& syn = s.synthetic;
  r.count("tasks", syn.num_tasks);
  r.count("classes_per_task", syn.classes_per_task);
  r.count("train_per_class", syn.train_per_class);
  r.count("test_per_class", syn.test_per_class);
  r.count("input_dim", syn.input_dim);
  if (const auto* t = r.raw("transform")) syn.transform = parse_transform(*t);
  r.words("rotation_angles", syn.rotation_angles, [](const std::string& w) { return io::parse_double(w); });
  r.real("separation", syn.separation);
  r.real("noise", syn.noise);
  r.count("clusters_per_class", syn.clusters_per_class);
  r.flag("antipodal", syn.antipodal);
  r.seed("data_seed", s.data_seed);
  syn.seed = s.data_seed;
  s.num_tasks = syn.num_tasks;
  s.classes_per_task = syn.classes_per_task;
  r.path("train_path", s.train_path);
  r.path("test_path", s.test_path);
  r.path("train_labels_path", s.train_labels_path);
  r.path("test_labels_path", s.test_labels_path);
  r.count("train_cap", s.train_cap);
  r.count("test_cap", s.test_cap);

  auto& run = cfg.run;
  run.method = method;
  r.words("hidden", run.hidden, [](const std::string& w) { return Reader::parse_count(w); });
  r.real("dropout", run.dropout);
  r.real("lr", run.optim.eta);
  r.real("beta1", run.optim.beta1);
  double beta2 = 0.0;
  if (r.raw("beta2") != nullptr) {
    r.real("beta2", beta2);
    run.beta2 = beta2;
  }
  r.real("epsilon", run.optim.epsilon);
  r.real("b", run.optim.b);
  r.real("lambda", run.ewc_lambda);
  r.count("memory_per_class", run.memory_per_class);
  r.count("memory_batch", run.memory_batch);
  r.count("fisher_max_examples", run.fisher_max_examples);
  r.real("lr_decay", run.lr_decay);
  r.count("epochs", run.epochs_per_task);
  r.count("batch_size", run.batch_size);
  if (const auto* a = r.raw("alpha_trace")) run.alpha_trace = parse_alpha_trace_mode(*a);
  r.words("seeds", cfg.seeds, [](const std::string& w) -> std::uint64_t { return Reader::parse_count(w); });
  r.real("validation_fraction", cfg.validation_fraction);

  if (s.kind == StreamSourceKind::kSynthetic) {
    checked("stream", [&] { syn.validate(); });
  } else {
    if (s.train_path.empty() || s.test_path.empty()) {
      throw ConfigError("file streams need train_path and test_path");
    }
    if (s.kind == StreamSourceKind::kIdx &&
        (s.train_labels_path.empty() || s.test_labels_path.empty())) {
      throw ConfigError("idx streams need train_labels_path and test_labels_path");
    }
  }
  checked("run", [&] { run.validate(); });
  if (cfg.seeds.empty()) throw ConfigError("key 'seeds': at least one seed is required");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw ConfigError("key 'validation_fraction' must be in (0, 1)");
  }
  return cfg;
}

TaskStream build_stream(const StreamSource& source) {
  if (source.kind == StreamSourceKind::kSynthetic) return make_synthetic_stream(source.synthetic);
  const auto format = source.kind == StreamSourceKind::kCsv ? DatasetFormat::kCsv : DatasetFormat::kIdx;
  const auto train = load_flat_dataset(source.train_path, format, source.train_labels_path);
  const auto test = load_flat_dataset(source.test_path, format, source.test_labels_path);
  return class_split(train, test, source.num_tasks, source.classes_per_task, source.train_cap,
                     source.test_cap, source.data_seed);
}

}  // namespace tagopt
