#include "orcd/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace orcd {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config: key '" + key + "' expects " + expected + ", got '" + value + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << v[k];
  return os.str();
}

struct Field {
  const char* section;
  const char* key;
  const char* help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define ORCD_INT_FIELD(sec, name, member, help)                                                  \
  Field{sec, name, help,                                                                        \
        [](ExperimentConfig& c, const std::string& v) {                                         \
          c.member = parse_number<decltype(c.member)>(name, v);                                 \
        },                                                                                      \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }}

#define ORCD_DOUBLE_FIELD(sec, name, member, help)                                                \
  Field{sec, name, help,                                                                        \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_number<double>(name, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.member); }}

#define ORCD_BOOL_FIELD(sec, name, member, help)                                                  \
  Field{sec, name, help,                                                                        \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(name, v); },      \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }}

#define ORCD_STRING_FIELD(sec, name, member, help)                                                \
  Field{sec, name, help, [](ExperimentConfig& c, const std::string& v) { c.member = v; },       \
        [](const ExperimentConfig& c) { return c.member; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"task", "preset", "paper | desk | custom; paper/desk reset task fields and d",
            [](ExperimentConfig& c, const std::string& v) { c.apply_preset(v); },
            [](const ExperimentConfig& c) { return c.preset; }},
      ORCD_INT_FIELD("task", "alphabet", task.alphabet, "alphabet size N"),
      ORCD_INT_FIELD("task", "copy_length", task.copy_length, "sequence length to remember K"),
      ORCD_INT_FIELD("task", "blank_gap", task.blank_gap, "number of blanks L"),
      ORCD_INT_FIELD("task", "batch_size", task.batch_size, "mini-batch size B"),
      ORCD_BOOL_FIELD("task", "recall_mask_only", task.recall_mask_only,
                      "score only the last K steps instead of all L+2K"),
      ORCD_INT_FIELD("model", "d", d, "hidden size (recurrent matrix is d x d)"),
      ORCD_STRING_FIELD("optimizer", "optimizer", optimizer,
                        "sgd | srgd | srcd-u | srcd-gs | srcd-block-gs"),
      ORCD_STRING_FIELD("optimizer", "schedule", schedule, "fixed | polynomial"),
      ORCD_DOUBLE_FIELD("optimizer", "alpha0", alpha0, "initial stepsize"),
      ORCD_DOUBLE_FIELD("optimizer", "exponent", exponent, "polynomial decay exponent p"),
      ORCD_DOUBLE_FIELD("optimizer", "offset", offset, "polynomial offset k0"),
      ORCD_BOOL_FIELD("optimizer", "robbins_monro", robbins_monro,
                      "require p in (0.5, 1] (polynomial schedule)"),
      ORCD_DOUBLE_FIELD("optimizer", "block_fraction", block_fraction,
                        "block size as a fraction of D (srcd-block-gs)"),
      ORCD_BOOL_FIELD("optimizer", "disjoint", disjoint,
                      "block coordinates use disjoint column pairs (Givens) vs one expm"),
      ORCD_INT_FIELD("optimizer", "reorth_every", reorth_every,
                     "SRGD QR re-orthogonalization period, 0 disables"),
      ORCD_INT_FIELD("run", "iterations", iterations, "training / descent iterations"),
      ORCD_INT_FIELD("run", "seed", seed, "master seed"),
      ORCD_STRING_FIELD("run", "out", out, "output directory"),
      ORCD_INT_FIELD("run", "log_every", log_every, "progress line period (stdout only)"),
      ORCD_INT_FIELD("convergence", "conv_d", conv_d, "synthetic problem dimension d"),
      ORCD_INT_FIELD("convergence", "conv_x_rows", conv_x_rows, "rows of the unconstrained block"),
      ORCD_INT_FIELD("convergence", "conv_x_cols", conv_x_cols, "cols of the unconstrained block"),
      ORCD_DOUBLE_FIELD("convergence", "noise_std", noise_std, "gradient noise standard deviation"),
      ORCD_INT_FIELD("convergence", "conv_seeds", conv_seeds, "number of seeds averaged"),
      Field{"bench", "bench_dims", "comma-separated d values, update-only phase",
            [](ExperimentConfig& c, const std::string& v) {
              c.bench_dims.clear();
              for (const auto& s : split_list(v)) c.bench_dims.push_back(parse_number<int>("bench_dims", s));
            },
            [](const ExperimentConfig& c) { return join(c.bench_dims); }},
      Field{"bench", "bench_backward_dims", "comma-separated d values, both phases",
            [](ExperimentConfig& c, const std::string& v) {
              c.bench_backward_dims.clear();
              for (const auto& s : split_list(v))
                c.bench_backward_dims.push_back(parse_number<int>("bench_backward_dims", s));
            },
            [](const ExperimentConfig& c) { return join(c.bench_backward_dims); }},
      Field{"bench", "bench_optimizers", "comma-separated optimizer names",
            [](ExperimentConfig& c, const std::string& v) { c.bench_optimizers = split_list(v); },
            [](const ExperimentConfig& c) { return join(c.bench_optimizers); }},
      ORCD_STRING_FIELD("bench", "bench_task", bench_task, "task shape for backward+update: paper | desk"),
      ORCD_INT_FIELD("bench", "bench_reps", bench_reps, "timed repetitions (>= 30)"),
      ORCD_INT_FIELD("bench", "bench_warmup", bench_warmup, "warmup repetitions (>= 5)"),
  };
  return table;
}

#undef ORCD_INT_FIELD
#undef ORCD_DOUBLE_FIELD
#undef ORCD_BOOL_FIELD
#undef ORCD_STRING_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

const std::vector<ExperimentConfig::KeyInfo>& ExperimentConfig::keys() {
  static const std::vector<KeyInfo> k = [] {
    std::vector<KeyInfo> out;
    for (const auto& f : fields()) out.push_back({f.section, f.key, f.help});
    return out;
  }();
  return k;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  find_field(key).set(*this, trim(value));
}

std::string ExperimentConfig::get(const std::string& key) const { return find_field(key).get(*this); }

void ExperimentConfig::apply_preset(const std::string& name) {
  if (name == "paper") {
    task = paper_copy_preset();
    d = 190;
  } else if (name == "desk") {
    task = desk_copy_preset();
    d = 64;
  } else if (name != "custom") {
    throw ConfigError("config: unknown preset '" + name + "' (expected paper, desk or custom)");
  }
  preset = name;
}

void ExperimentConfig::validate() const {
  task.validate();
  if (d < 2 || d % 2 != 0) throw ConfigError("config: d must be even and >= 2");
  if (iterations < 0) throw ConfigError("config: iterations must be >= 0");
  if (log_every < 1) throw ConfigError("config: log_every must be >= 1");
  if (!(block_fraction > 0.0 && block_fraction <= 1.0)) {
    throw ConfigError("config: block_fraction must be in (0, 1]");
  }
  if (reorth_every < 0) throw ConfigError("config: reorth_every must be >= 0");
  if (conv_d < 2 || conv_x_rows < 1 || conv_x_cols < 1 || conv_seeds < 1) {
    throw ConfigError("config: convergence dimensions and seeds must be positive");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("config: noise_std must be >= 0");
  if (bench_task != "paper" && bench_task != "desk") {
    throw ConfigError("config: bench_task must be paper or desk");
  }
  make_optimizer();
}

StepSchedule ExperimentConfig::make_schedule() const {
  if (schedule == "fixed") {
    if (robbins_monro) {
      throw ConfigError("config: a fixed stepsize does not satisfy the Robbins-Monro conditions");
    }
    return StepSchedule::fixed(alpha0);
  }
  if (schedule == "polynomial") return StepSchedule::polynomial(alpha0, exponent, offset, robbins_monro);
  throw ConfigError("config: unknown schedule '" + schedule + "' (expected fixed or polynomial)");
}

OptimizerConfig ExperimentConfig::make_optimizer() const {
  OptimizerConfig cfg = optimizer_from_name(optimizer, make_schedule());
  cfg.rule.block_fraction = block_fraction;
  cfg.rule.disjoint = disjoint;
  cfg.reorth_every = reorth_every;
  return cfg;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    // Presets are already expanded into the fields that follow.
    const std::string value = std::string(f.key) == "preset" ? "custom" : f.get(*this);
    os << f.key << " = " << value << '\n';
  }
  return os.str();
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    const Field& f = [&]() -> const Field& {
      try {
        return find_field(key);
      } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
      }
    }();
    if (!section.empty() && section != f.section) {
      throw ConfigError(where + "key '" + key + "' belongs to section [" + f.section + "], not [" +
                        section + "]");
    }
    f.set(base, value);
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

}  // namespace orcd
