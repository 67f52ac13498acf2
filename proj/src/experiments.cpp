#include "orcd/experiments.hpp"

#include "orcd/checkpoint.hpp"
#include "orcd/copytask.hpp"
#include "orcd/kernels.hpp"
#include "orcd/optim.hpp"
#include "orcd/rng.hpp"
#include "orcd/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#ifndef ORCD_VERSION
#define ORCD_VERSION "0.0.0"
#endif

namespace orcd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shortest round-trip representation keeps CSVs bitwise reproducible.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double grad_x_norm_sq(const Grads& g) {
  return g.w_in.squaredNorm() + g.w_out.squaredNorm() + g.b_out.squaredNorm() + g.b_mod.squaredNorm();
}

SequenceBatch batch_for(const ExperimentConfig& cfg, std::int64_t k) {
  return to_sequence_batch(
      cfg.task, generate_batch(cfg.task, derive_seed(cfg.seed, streams::data, static_cast<std::uint64_t>(k))));
}

}  // namespace

// ---------------------------------------------------------------------------
// Drivers

TrainResult train(const ExperimentConfig& cfg, const TrainObserver& observer) {
  cfg.validate();
  const auto t_start = Clock::now();
  const NetworkDims dims = cfg.network_dims();
  OptimizerState state(init_params(dims, derive_seed(cfg.seed, streams::init)), cfg.make_optimizer(),
                       cfg.seed);
  const bool riemannian = state.config.kind != OptimizerKind::sgd;

  TrainResult result{{}, state.params, 0.0, 0.0, baseline_loss(cfg.task), 0.0};
  result.records.reserve(static_cast<std::size_t>(cfg.iterations));
  for (std::int64_t k = 0; k < cfg.iterations; ++k) {
    const SequenceBatch batch = batch_for(cfg, k);
    const auto t0 = Clock::now();
    const LossAndGrads lg = backward(state.params, batch);
    const double grad_s = seconds_since(t0);
    if (!std::isfinite(lg.loss)) {
      throw NumericError("train: non-finite loss at iteration " + std::to_string(k));
    }
    TrainRecord rec;
    rec.k = k;
    rec.loss = lg.loss;
    // Parseval: ||all_partials||^2 = ||P_W(g_W)||_F^2.
    rec.gnorm_w_sq = riemannian ? all_partials(state.params.w, lg.grads.w).squaredNorm()
                                : lg.grads.w.squaredNorm();
    rec.gnorm_sq = grad_x_norm_sq(lg.grads) + rec.gnorm_w_sq;

    const auto t1 = Clock::now();
    const StepInfo info = optimizer_step(state, lg.grads);
    rec.update_seconds = seconds_since(t1);
    rec.grad_seconds = grad_s;
    rec.alpha = info.alpha;
    double acc = 0.0;
    for (double th : info.coordinate.thetas) acc += th * th;
    rec.partial_abs = std::sqrt(acc);
    result.records.push_back(rec);
    if (observer) observer(rec, state.params);
  }

  const CopyTaskBatch eval = generate_batch(
      cfg.task, derive_seed(cfg.seed, streams::data, static_cast<std::uint64_t>(cfg.iterations)));
  const SequenceBatch eval_seq = to_sequence_batch(cfg.task, eval);
  const ForwardTrace fwd = forward(state.params, eval_seq.inputs);
  result.final_loss = loss(fwd.logits, eval_seq.targets, eval_seq.mask);
  result.accuracy = accuracy(cfg.task, fwd.logits, eval);
  result.params = state.params;
  result.wall_seconds = seconds_since(t_start);
  if (!std::isfinite(result.final_loss)) throw NumericError("train: non-finite final loss");
  return result;
}

std::vector<double> histogram_edges_for(std::span<const double> v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double x : v) {
    const double a = std::abs(x);
    if (a > 0.0) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  if (!(hi > 0.0)) return decade_edges(-1, 0);
  const int lo_exp = static_cast<int>(std::floor(std::log10(lo)));
  const int hi_exp = std::max(lo_exp + 1, static_cast<int>(std::floor(std::log10(hi))) + 1);
  return decade_edges(lo_exp, hi_exp);
}

namespace {

SparsitySnapshot snapshot(const ExperimentConfig& cfg, const RnnParams& params, std::int64_t k) {
  const LossAndGrads lg = backward(params, batch_for(cfg, k));
  if (!lg.grads.all_finite()) throw NumericError("sparsity: non-finite gradient");
  const Vector v = all_partials(params.w, lg.grads.w);
  const std::span<const double> sv(v.data(), static_cast<std::size_t>(v.size()));
  const auto edges = histogram_edges_for(sv);
  return SparsitySnapshot{k, sparsity_profile(sv), histogram(sv, edges)};
}

}  // namespace

std::vector<SparsitySnapshot> sparsity_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.optimizer == "sgd") throw ConfigError("sparsity: needs an orthogonality-preserving optimizer");
  std::vector<SparsitySnapshot> out;
  const RnnParams init = init_params(cfg.network_dims(), derive_seed(cfg.seed, streams::init));
  out.push_back(snapshot(cfg, init, 0));
  if (cfg.iterations > 0) {
    const TrainResult tr = train(cfg);
    out.push_back(snapshot(cfg, tr.params, cfg.iterations));
  }
  return out;
}

ConvergenceSummary convergence_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.robbins_monro) {
    throw ConfigError("convergence: set robbins_monro = true (Robbins-Monro stepsizes are required)");
  }
  const StepSchedule schedule = cfg.make_schedule();
  ConvergenceSummary s;
  for (std::int64_t K : {100LL, 1000LL, 10000LL, 100000LL}) {
    if (K <= cfg.iterations) s.checkpoints.push_back(K);
  }
  s.mean_m_at.assign(s.checkpoints.size(), 0.0);
  for (int r = 0; r < cfg.conv_seeds; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    const SyntheticProblem prob =
        SyntheticProblem::make(cfg.conv_d, cfg.conv_x_rows, cfg.conv_x_cols, cfg.noise_std, seed);
    SyntheticRunConfig rc;
    rc.iterations = static_cast<int>(cfg.iterations);
    rc.schedule = schedule;
    rc.rule = SelectionRule{SelectionRule::Kind::uniform, cfg.block_fraction, cfg.disjoint};
    rc.seed = seed;
    const SyntheticRun run = run_srcd_synthetic(prob, rc);
    std::vector<double> alpha, g2;
    alpha.reserve(run.trace.size());
    g2.reserve(run.trace.size());
    for (const auto& it : run.trace) {
      alpha.push_back(it.alpha);
      g2.push_back(it.gnorm_sq);
    }
    ConvergenceTrace tr = make_convergence_trace(std::move(alpha), std::move(g2));
    for (std::size_t c = 0; c < s.checkpoints.size(); ++c) {
      s.mean_m_at[c] += tr.m_k[static_cast<std::size_t>(s.checkpoints[c])] / cfg.conv_seeds;
    }
    s.seeds.push_back(seed);
    s.final_gnorm_sq.push_back(run.final_gnorm_sq);
    s.traces.push_back(std::move(tr));
  }
  return s;
}

BenchSummary bench_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  BenchOptions opts;
  opts.reps = cfg.bench_reps;
  opts.warmup = cfg.bench_warmup;
  opts.task = cfg.bench_task == "paper" ? paper_copy_preset() : desk_copy_preset();
  opts.seed = cfg.seed;

  BenchSummary s;
  std::set<int> all_dims(cfg.bench_dims.begin(), cfg.bench_dims.end());
  all_dims.insert(cfg.bench_backward_dims.begin(), cfg.bench_backward_dims.end());
  for (int d : all_dims) {
    const bool backward_too = std::find(cfg.bench_backward_dims.begin(), cfg.bench_backward_dims.end(),
                                        d) != cfg.bench_backward_dims.end();
    for (const auto& opt : cfg.bench_optimizers) {
      s.records.push_back(bench_update(opt, d, BenchPhase::update_only, opts));
      if (backward_too) s.records.push_back(bench_update(opt, d, BenchPhase::backward_update, opts));
    }
  }
  if (cfg.bench_dims.size() >= 2) {
    for (const auto& opt : cfg.bench_optimizers) {
      std::vector<double> xs, ys;
      for (int d : cfg.bench_dims) {
        for (const auto& r : s.records) {
          if (r.d == d && r.optimizer == opt && r.phase == BenchPhase::update_only) {
            xs.push_back(d);
            ys.push_back(r.median_s);
          }
        }
      }
      s.update_slopes.emplace_back(opt, loglog_slope(xs, ys));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV

void write_trace_csv(std::ostream& os, const std::vector<TrainRecord>& records) {
  std::vector<double> alpha, g2;
  for (const auto& r : records) {
    alpha.push_back(r.alpha);
    g2.push_back(r.gnorm_sq);
  }
  const auto m = convergence_metric(alpha, g2);
  os << "k,alpha,loss,gnormsq,M_K\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    os << r.k << ',' << num(r.alpha) << ',' << num(r.loss) << ',' << num(r.gnorm_sq) << ',' << num(m[i])
       << '\n';
  }
}

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace, std::span<const double> values) {
  os << "k,alpha,loss,gnormsq,M_K\n";
  for (std::size_t i = 0; i < trace.alpha.size(); ++i) {
    os << i << ',' << num(trace.alpha[i]) << ',' << num(i < values.size() ? values[i] : 0.0) << ','
       << num(trace.gnorm_sq[i]) << ',' << num(trace.m_k[i]) << '\n';
  }
}

void write_sparsity_csv(std::ostream& os, const std::vector<SparsitySnapshot>& snaps) {
  os << "iteration,frac95,frac99,norm,frac95_linear,frac99_linear\n";
  for (const auto& s : snaps) {
    const auto& p = s.profile;
    os << s.iteration << ',' << num(p.frac95) << ',' << num(p.frac99) << ',' << num(p.norm) << ','
       << num(p.frac95_linear) << ',' << num(p.frac99_linear) << '\n';
  }
}

void write_hist_csv(std::ostream& os, const Histogram& h) {
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double lo = b == 0 ? 0.0 : h.edges[b - 1];
    const double hi = b < h.edges.size() ? h.edges[b] : std::numeric_limits<double>::infinity();
    os << num(lo) << ',' << (std::isinf(hi) ? std::string("inf") : num(hi)) << ',' << h.counts[b] << '\n';
  }
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  os << "d,optimizer,phase,median_s,iqr_s,flops,mean_s,w_flops,reps\n";
  for (const auto& r : records) {
    os << r.d << ',' << r.optimizer << ',' << phase_name(r.phase) << ',' << num(r.median_s) << ','
       << num(r.iqr_s) << ',' << r.flops << ',' << num(r.mean_s) << ',' << r.w_flops << ',' << r.reps
       << '\n';
  }
}

// ---------------------------------------------------------------------------
// Output directory plumbing

std::string version_string() { return std::string("orcd ") + ORCD_VERSION; }

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::string& command) {
  if (!cfg.out.empty()) return cfg.out;
  const char* root = std::getenv("ORCD_OUTPUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / (command + "-" + cfg.preset + "-" + cfg.optimizer + "-seed" + std::to_string(cfg.seed));
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  fn(os);
  if (!os) throw IoError("write failed: " + path.string());
}

json machine_metadata() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return json{{"hardware_threads", std::thread::hardware_concurrency()},
              {"openmp_max_threads", kernels::max_threads()},
              {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__},
              {"started_utc", stamp},
              {"note", "benchmarks assume exclusive use of the machine"}};
}

fs::path prepare_output(const ExperimentConfig& cfg, const std::string& command, const std::string& raw) {
  const fs::path dir = resolve_output_dir(cfg, command);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  if (!raw.empty()) write_text(dir / "config.ini", raw);
  write_text(dir / "resolved_config.ini", cfg.to_text());
  write_text(dir / "version.txt", version_string() + "\n");
  write_text(dir / "machine.json", machine_metadata().dump(2) + "\n");
  write_text(dir / "status.txt", "running\n");
  return dir;
}

// Maps exceptions onto exit codes and marks the run directory.
template <class Body>
int run_command(const ExperimentConfig& cfg, const std::string& command, const std::string& raw, Body&& body) {
  fs::path dir;
  auto fail = [&](int code, const std::string& what) {
    std::cerr << "orcd " << command << ": " << what << '\n';
    if (!dir.empty()) {
      std::ofstream os(dir / "status.txt", std::ios::trunc);
      os << "failed (exit " << code << "): " << what << '\n';
    }
    return code;
  };
  try {
    cfg.validate();
    dir = prepare_output(cfg, command, raw);
    body(dir);
    write_text(dir / "status.txt", "ok\n");
    std::cout << "orcd " << command << ": wrote " << dir.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    return fail(1, e.what());
  } catch (const IoError& e) {
    return fail(3, e.what());
  } catch (const NumericError& e) {
    return fail(2, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(1, e.what());
  } catch (const std::exception& e) {
    return fail(2, e.what());
  }
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg, const std::string& raw_config) {
  return run_command(cfg, "train", raw_config, [&](const fs::path& dir) {
    const TrainResult r = train(cfg, [&](const TrainRecord& rec, const RnnParams&) {
      if ((rec.k + 1) % cfg.log_every == 0) {
        std::cout << "iter " << rec.k + 1 << "  loss " << rec.loss << "  |g|^2 " << rec.gnorm_sq << '\n';
      }
    });
    write_file(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, r.records); });
    write_file(dir / "timings.csv", [&](std::ostream& os) {
      os << "k,grad_s,update_s\n";
      for (const auto& rec : r.records) os << rec.k << ',' << num(rec.grad_seconds) << ',' << num(rec.update_seconds) << '\n';
    });
    save_checkpoint(dir / "checkpoint.bin", Checkpoint{cfg.seed, r.params});
    const json summary{{"command", "train"},
                       {"optimizer", cfg.optimizer},
                       {"iterations", cfg.iterations},
                       {"initial_loss", r.records.empty() ? r.final_loss : r.records.front().loss},
                       {"final_loss", r.final_loss},
                       {"baseline_loss", r.baseline},
                       {"accuracy", r.accuracy},
                       {"wall_seconds", r.wall_seconds}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
  });
}

int cmd_sparsity(const ExperimentConfig& cfg, const std::string& raw_config) {
  return run_command(cfg, "sparsity", raw_config, [&](const fs::path& dir) {
    const auto snaps = sparsity_experiment(cfg);
    write_file(dir / "sparsity.csv", [&](std::ostream& os) { write_sparsity_csv(os, snaps); });
    write_file(dir / "hist_init.csv", [&](std::ostream& os) { write_hist_csv(os, snaps.front().hist); });
    if (snaps.size() > 1) {
      write_file(dir / "hist_final.csv", [&](std::ostream& os) { write_hist_csv(os, snaps.back().hist); });
    }
    json rows = json::array();
    for (const auto& s : snaps) {
      rows.push_back({{"iteration", s.iteration},
                      {"frac95", s.profile.frac95},
                      {"frac99", s.profile.frac99},
                      {"norm", s.profile.norm}});
    }
    write_text(dir / "summary.json", json{{"command", "sparsity"}, {"snapshots", rows}}.dump(2) + "\n");
    for (const auto& s : snaps) {
      std::cout << "iteration " << s.iteration << ": frac95 " << s.profile.frac95 << "  frac99 "
                << s.profile.frac99 << '\n';
    }
  });
}

int cmd_convergence(const ExperimentConfig& cfg, const std::string& raw_config) {
  return run_command(cfg, "convergence", raw_config, [&](const fs::path& dir) {
    const ConvergenceSummary s = convergence_experiment(cfg);
    // The first seed's full trace; values are recomputed for the loss column.
    const SyntheticProblem prob =
        SyntheticProblem::make(cfg.conv_d, cfg.conv_x_rows, cfg.conv_x_cols, cfg.noise_std, s.seeds.front());
    SyntheticRunConfig rc;
    rc.iterations = static_cast<int>(cfg.iterations);
    rc.schedule = cfg.make_schedule();
    rc.rule = SelectionRule{SelectionRule::Kind::uniform, cfg.block_fraction, cfg.disjoint};
    rc.seed = s.seeds.front();
    const SyntheticRun run = run_srcd_synthetic(prob, rc);
    std::vector<double> values;
    for (const auto& it : run.trace) values.push_back(it.value);
    write_file(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, s.traces.front(), values); });
    json cps = json::object();
    for (std::size_t c = 0; c < s.checkpoints.size(); ++c) {
      cps[std::to_string(s.checkpoints[c])] = s.mean_m_at[c];
    }
    const json summary{{"command", "convergence"},
                       {"seeds", s.seeds},
                       {"mean_M_K", cps},
                       {"final_gnormsq", s.final_gnorm_sq},
                       {"smoothness_L", prob.smoothness},
                       {"noise_C_X", prob.noise_bound_x()},
                       {"noise_C_W", prob.noise_bound_w()}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    for (std::size_t c = 0; c < s.checkpoints.size(); ++c) {
      std::cout << "M_" << s.checkpoints[c] << " = " << s.mean_m_at[c] << '\n';
    }
  });
}

int cmd_bench(const ExperimentConfig& cfg, const std::string& raw_config) {
  return run_command(cfg, "bench", raw_config, [&](const fs::path& dir) {
    kernels::set_threads(1);
    const BenchSummary s = bench_experiment(cfg);
    write_file(dir / "bench.csv", [&](std::ostream& os) { write_bench_csv(os, s.records); });
    json slopes = json::object();
    for (const auto& [opt, slope] : s.update_slopes) slopes[opt] = slope;
    json ratios = json::object();
    for (const auto& r : s.records) {
      if (r.phase != BenchPhase::backward_update) continue;
      for (const auto& u : s.records) {
        if (u.phase == BenchPhase::update_only && u.d == r.d && u.optimizer == r.optimizer) {
          ratios[r.optimizer + "@" + std::to_string(r.d)] = u.median_s / r.median_s;
        }
      }
    }
    const json summary{{"command", "bench"},
                       {"threads", 1},
                       {"update_only_loglog_slope", slopes},
                       {"update_over_backward_update", ratios}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_bench_csv(std::cout, s.records);
  });
}

}  // namespace orcd
