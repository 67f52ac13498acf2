// orcd: command-line front end. Settings are resolved in this order, later
// wins: built-in defaults, --config file, --preset, --seed/--out, then
// per-key overrides (--<key> VALUE for every key listed by `orcd <cmd> --help`).

#include "orcd/config.hpp"
#include "orcd/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "experiment config file");
  sub->add_option("--preset", f.preset, "paper | desk")->check(CLI::IsMember({"paper", "desk"}));
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--out", f.out, "output directory");
  for (const auto& k : orcd::ExperimentConfig::keys()) {
    if (k.key == "preset" || k.key == "seed" || k.key == "out") continue;
    sub->add_option_function<std::string>(
           "--" + k.key, [&f, key = k.key](const std::string& v) { f.overrides[key] = v; },
           "[" + k.section + "] " + k.help)
        ->group("Config overrides");
  }
}

orcd::ExperimentConfig resolve(const CommonFlags& f, std::string& raw) {
  orcd::ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream is(f.config_path);
    if (!is) throw orcd::IoError("cannot open config " + f.config_path);
    std::stringstream buf;
    buf << is.rdbuf();
    raw = buf.str();
    cfg = orcd::parse_config(raw, cfg);
  }
  if (f.preset) cfg.apply_preset(*f.preset);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  for (const auto& [k, v] : f.overrides) cfg.set(k, v);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian coordinate descent on the orthogonal group"};
  app.set_version_flag("--version", orcd::version_string());
  app.require_subcommand(1);

  CommonFlags flags;
  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {{"train", "train the orthogonal RNN on the copying task"},
                      {"sparsity", "partial-derivative sparsity at init and after training"},
                      {"convergence", "SRCD-U on the synthetic problem, weighted gradient average"},
                      {"bench", "update cost vs dimension, with and without backpropagation"},
                      {"check", "run the invariant suite"}};
  for (const auto& c : cmds) add_common(app.add_subcommand(c.name, c.help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  std::string raw;
  orcd::ExperimentConfig cfg;
  try {
    cfg = resolve(flags, raw);
    cfg.validate();
  } catch (const orcd::IoError& e) {
    std::cerr << "orcd: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "orcd: " << e.what() << '\n';
    return 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  if (cmd == "train") return orcd::cmd_train(cfg, raw);
  if (cmd == "sparsity") return orcd::cmd_sparsity(cfg, raw);
  if (cmd == "convergence") return orcd::cmd_convergence(cfg, raw);
  if (cmd == "bench") return orcd::cmd_bench(cfg, raw);
  return orcd::cmd_check(cfg, std::cout);
}
