#include "pibits/cli.hpp"

#include <csignal>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pibits/engine.hpp"
#include "pibits/errors.hpp"
#include "pibits/verify.hpp"

namespace pibits::cli {

namespace {

using nlohmann::json;

extern "C" void handle_stop_signal(int) { stop_flag().store(true); }

struct Extras {
  std::optional<std::size_t> stop_after_jobs;
  std::uint64_t inject_flip = 0;  // 1-based bit of the second verify run to flip; 0 = none
  std::optional<unsigned> precision;
  std::optional<int> bound;
};

struct Options {
  CLI::Option* pos = nullptr;
  CLI::Option* bits = nullptr;
  CLI::Option* formula = nullptr;
  CLI::Option* guard = nullptr;
  CLI::Option* jobs = nullptr;
  CLI::Option* tasks = nullptr;
  CLI::Option* threads = nullptr;
  CLI::Option* terms = nullptr;
};

Options add_request_options(CLI::App& sub, RunConfig& cfg, bool pos_required) {
  Options o;
  o.pos = sub.add_option("--pos", cfg.position, "First bit position after the radix point (1-based)")
              ->envname("PIBITS_POS")
              ->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 62));
  if (pos_required) o.pos->required();
  o.bits = sub.add_option("--bits", cfg.bits, "Number of bits to print")
               ->envname("PIBITS_BITS")
               ->capture_default_str()
               ->check(CLI::Range(1U, 1U << 20));
  o.formula = sub.add_option("--formula", cfg.formula, "Digit-extraction formula")
                  ->envname("PIBITS_FORMULA")
                  ->capture_default_str()
                  ->check(CLI::IsMember({"bbp16", "bellard"}));
  o.guard = sub.add_option("--guard", cfg.guard_bits, "Extra working bits beyond those printed")
                ->envname("PIBITS_GUARD")
                ->capture_default_str()
                ->check(CLI::Range(0U, 1U << 16));
  return o;
}

void add_engine_options(CLI::App& sub, RunConfig& cfg, Options& o, Extras& extras) {
  sub.add_option("--map-slots", cfg.map_slots, "Map-side worker slots")
      ->envname("PIBITS_MAP_SLOTS")
      ->capture_default_str()
      ->check(CLI::Range(0U, 4096U));
  sub.add_option("--reduce-slots", cfg.reduce_slots, "Reduce-side worker slots")
      ->envname("PIBITS_REDUCE_SLOTS")
      ->capture_default_str()
      ->check(CLI::Range(0U, 4096U));
  o.jobs = sub.add_option("--jobs", cfg.jobs, "Number of jobs (default: from --terms-per-thread)")
               ->envname("PIBITS_JOBS")
               ->check(CLI::Range(1U, 1U << 20));
  o.tasks = sub.add_option("--tasks", cfg.tasks_per_job, "Tasks per job")
                ->envname("PIBITS_TASKS")
                ->capture_default_str()
                ->check(CLI::Range(1U, 1U << 16));
  o.threads = sub.add_option("--threads", cfg.threads_per_task, "OpenMP threads per task")
                  ->envname("PIBITS_THREADS")
                  ->capture_default_str()
                  ->check(CLI::Range(1U, 1024U));
  o.terms = sub.add_option("--terms-per-thread", cfg.terms_per_thread, "Target terms per thread when sizing jobs")
                ->envname("PIBITS_TERMS_PER_THREAD")
                ->capture_default_str()
                ->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 62));
  sub.add_option("--threshold", cfg.submit_threshold, "Free slots required before submitting a job to a side")
      ->envname("PIBITS_THRESHOLD")
      ->capture_default_str()
      ->check(CLI::Range(1U, 4096U));
  sub.add_option("--max-jobs", cfg.max_concurrent_jobs, "Cap on concurrently running jobs")
      ->envname("PIBITS_MAX_JOBS")
      ->capture_default_str()
      ->check(CLI::Range(1U, 1U << 20));
  sub.add_option("--ckpt-dir", cfg.checkpoint_dir, "Directory for run.meta and per-job partial sums")
      ->envname("PIBITS_CKPT_DIR");
  sub.add_option("--seed", cfg.seed, "Seed for a synthetic background load on the slots")
      ->envname("PIBITS_SEED");
  sub.add_flag("--json", cfg.json, "Machine-readable output")->envname("PIBITS_JSON");
  sub.add_option("--stop-after-jobs", extras.stop_after_jobs)->group("");
}

series::ExtractionRequest request_for(const RunConfig& cfg, std::uint64_t position) {
  series::ExtractionRequest r;
  r.start_position = position;
  r.precision_bits = cfg.precision_bits();
  r.guard_bits = cfg.precision_bits() - cfg.bits;
  r.formula = series::formula_by_name(cfg.formula);
  return r;
}

engine::PartitionPlan plan_for(const RunConfig& cfg, const series::ExtractionRequest& request) {
  if (cfg.jobs > 0) return {cfg.jobs, cfg.tasks_per_job, cfg.threads_per_task};
  return engine::plan_for(request, cfg.terms_per_thread, cfg.tasks_per_job, cfg.threads_per_task);
}

engine::EngineOptions engine_options(const RunConfig& cfg, const Extras& extras) {
  engine::EngineOptions o;
  o.map_slots = cfg.map_slots;
  o.reduce_slots = cfg.reduce_slots;
  o.submit_threshold = cfg.submit_threshold;
  o.max_concurrent_jobs = cfg.max_concurrent_jobs;
  if (cfg.seed >= 0) o.load_seed = static_cast<std::uint64_t>(cfg.seed);
  o.stop_after_jobs = extras.stop_after_jobs;
  o.stop_flag = &stop_flag();
  o.display_bits = cfg.bits;
  return o;
}

engine::RunOutcome execute(const RunConfig& cfg, const Extras& extras, std::uint64_t position,
                           const std::string& ckpt_dir) {
  const auto request = request_for(cfg, position);
  const auto plan = plan_for(cfg, request);
  const auto options = engine_options(cfg, extras);
  if (ckpt_dir.empty()) return engine::run(request, plan, nullptr, options);
  engine::CheckpointStore store(ckpt_dir);
  return engine::run(request, plan, &store, options);
}

std::string seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f s", s);
  return buf;
}

void print_result(std::ostream& out, const RunConfig& cfg, const engine::RunOutcome& outcome) {
  const auto hex = fixedpoint::to_hex(outcome.result.fraction, cfg.bits);
  const auto& st = outcome.stats;
  if (cfg.json) {
    out << json{{"position", outcome.result.start_position},
                {"bits", cfg.bits},
                {"hex", hex},
                {"formula", cfg.formula},
                {"precision", outcome.result.fraction.precision_bits()},
                {"jobs", st.jobs_total},
                {"jobs_restored", st.jobs_restored},
                {"elapsed", st.elapsed_seconds},
                {"cpu_seconds", st.cpu_seconds}}
               .dump()
        << "\n";
    return;
  }
  out << "position   " << verify::with_thousands(outcome.result.start_position) << "\n"
      << "bits       " << cfg.bits << "\n"
      << "hex        " << hex << "\n"
      << "formula    " << cfg.formula << " (p=" << outcome.result.fraction.precision_bits() << ")\n"
      << "jobs       " << st.jobs_total;
  if (st.jobs_restored > 0) out << " (" << st.jobs_restored << " restored)";
  out << "\n"
      << "elapsed    " << seconds(st.elapsed_seconds) << "\n"
      << "cpu time   " << seconds(st.cpu_seconds) << "\n";
}

void check_config(const RunConfig& cfg) {
  if (cfg.map_slots + cfg.reduce_slots == 0) throw ContractViolation("need at least one map or reduce slot");
  if (cfg.bits + cfg.guard_bits > (1U << 20)) throw ContractViolation("--bits plus --guard is too large");
}

int cmd_compute(RunConfig cfg, const Extras& extras, std::ostream& out) {
  check_config(cfg);
  print_result(out, cfg, execute(cfg, extras, cfg.position, cfg.checkpoint_dir));
  return kOk;
}

int cmd_verify(RunConfig cfg, const Extras& extras, std::ostream& out, std::ostream& err) {
  check_config(cfg);
  if (cfg.position < 5) throw ContractViolation("verify needs --pos >= 5 (second run starts 4 bits earlier)");
  const auto dir = [&](const char* name) {
    return cfg.checkpoint_dir.empty() ? std::string{} : (std::filesystem::path(cfg.checkpoint_dir) / name).string();
  };
  auto a = execute(cfg, extras, cfg.position, dir("run-a"));
  auto b = execute(cfg, extras, cfg.position - 4, dir("run-b"));
  if (extras.inject_flip > 0) {
    auto limbs = std::vector<fixedpoint::Limb>(b.result.fraction.limbs().begin(), b.result.fraction.limbs().end());
    const auto i = extras.inject_flip - 1;
    if (i >= limbs.size() * fixedpoint::kWordBits) throw ContractViolation("--inject-flip beyond precision");
    limbs[i / 64] ^= fixedpoint::Limb{1} << (63 - i % 64);
    b.result.fraction = fixedpoint::FixedFraction(std::move(limbs));
  }
  a.result.reported_bits = cfg.bits;
  b.result.reported_bits = cfg.bits;
  const auto report = verify::overlap_check(a.result, b.result);
  const double elapsed = a.stats.elapsed_seconds + b.stats.elapsed_seconds;
  const double cpu = a.stats.cpu_seconds + b.stats.cpu_seconds;
  if (cfg.json) {
    json j{{"position", report.overlap_begin},
           {"bits", report.overlap_bits()},
           {"verified_bits", report.verified_bits},
           {"hex", report.verified_hex},
           {"agrees", report.agrees()},
           {"elapsed", elapsed},
           {"cpu_seconds", cpu}};
    j["first_disagreement"] = report.first_disagreement ? json(*report.first_disagreement) : json(nullptr);
    out << j.dump() << "\n";
  } else {
    out << verify::render(report) << "elapsed        " << seconds(elapsed) << "\n"
        << "cpu time       " << seconds(cpu) << "\n";
  }
  if (!report.agrees()) {
    err << "pibits: runs at " << cfg.position << " and " << cfg.position - 4 << " disagree at position "
        << *report.first_disagreement << "\n";
    return kDisagreement;
  }
  return kOk;
}

int cmd_estimate(const RunConfig& cfg, const Extras& extras, std::ostream& out) {
  const unsigned p = extras.precision.value_or(cfg.precision_bits());
  const auto& formula = series::formula_by_name(cfg.formula);
  const auto model = verify::ErrorModel::make(verify::term_count(formula, cfg.position - 1, p), p);
  const int centre = extras.bound.value_or(verify::natural_bound(model));
  const double log2_sigma = std::log2(model.sigma());
  if (cfg.json) {
    json rows = json::array();
    for (int b = centre - 3; b <= centre + 3; ++b) rows.push_back({{"b", b}, {"confidence", verify::confidence(model, b)}});
    out << json{{"position", cfg.position}, {"formula", cfg.formula}, {"precision", p},
                {"terms", model.term_count}, {"sigma", model.sigma()}, {"rows", rows}}
               .dump()
        << "\n";
    return kOk;
  }
  char buf[160];
  out << "position   " << verify::with_thousands(cfg.position) << "\n"
      << "formula    " << cfg.formula << "\n"
      << "precision  " << p << " bits\n"
      << "terms m    " << verify::with_thousands(model.term_count) << "\n";
  std::snprintf(buf, sizeof buf, "sigma      %.6g (2^%.2f)\n", model.sigma(), log2_sigma);
  out << buf << "\n   b   P(|E| < 2^-b)\n";
  for (int b = centre - 3; b <= centre + 3; ++b) {
    const double c = verify::confidence(model, b);
    std::snprintf(buf, sizeof buf, "%4d   %7.2f%%   %.10f\n", b, 100 * c, c);
    out << buf;
  }
  return kOk;
}

int cmd_resume(const RunConfig& given, const Options& opts, const Extras& extras, std::ostream& out) {
  if (!std::filesystem::is_directory(given.checkpoint_dir)) {
    throw CheckpointMismatch("no checkpoint directory at " + given.checkpoint_dir);
  }
  engine::CheckpointStore store(given.checkpoint_dir);
  const auto meta = store.read_meta();
  if (!meta) throw CheckpointMismatch(given.checkpoint_dir + " has no run.meta");

  RunConfig cfg = given;
  cfg.position = meta->n + 1;
  cfg.formula = meta->formula;
  cfg.guard_bits = meta->guard_bits;
  cfg.bits = meta->display_bits ? meta->display_bits : meta->precision_bits - meta->guard_bits;
  cfg.jobs = meta->jobs;
  cfg.tasks_per_job = meta->tasks_per_job;
  cfg.threads_per_task = meta->threads_per_task;

  const auto mismatch = [&](const std::string& what) {
    throw CheckpointMismatch("--" + what + " does not match the run in " + given.checkpoint_dir);
  };
  if (opts.pos->count() && given.position != cfg.position) mismatch("pos");
  if (opts.formula->count() && given.formula != cfg.formula) mismatch("formula");
  if (opts.guard->count() && given.guard_bits != cfg.guard_bits) mismatch("guard");
  if (opts.jobs->count() && given.jobs != cfg.jobs) mismatch("jobs");
  if (opts.tasks->count() && given.tasks_per_job != cfg.tasks_per_job) mismatch("tasks");
  if (opts.threads->count() && given.threads_per_task != cfg.threads_per_task) mismatch("threads");
  if (opts.bits->count()) {
    const unsigned guard = opts.guard->count() ? given.guard_bits : cfg.guard_bits;
    if (fixedpoint::round_up_precision(given.bits + guard) != meta->precision_bits) mismatch("bits");
    cfg.bits = given.bits;
  }
  if (cfg.precision_bits() != meta->precision_bits) {
    // run.meta written with a guard that did not round p; keep its p
    cfg.guard_bits = meta->precision_bits - cfg.bits;
  }
  check_config(cfg);
  const auto request = request_for(cfg, cfg.position);
  auto options = engine_options(cfg, extras);
  options.display_bits = meta->display_bits;
  print_result(out, cfg, engine::resume(request, {cfg.jobs, cfg.tasks_per_job, cfg.threads_per_task}, store, options));
  return kOk;
}

}  // namespace

unsigned RunConfig::precision_bits() const { return fixedpoint::round_up_precision(bits + guard_bits); }

std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

void install_signal_handlers() {
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compute binary digits of pi at arbitrary positions by digit extraction.", "pibits"};
  app.require_subcommand(1);
  app.footer("Every option can also be set through PIBITS_<NAME>, e.g. PIBITS_POS=1000001.\n"
             "Exit status: 0 ok, 1 usage or configuration, 2 storage, 3 verification disagreement,\n"
             "130 interrupted (finished jobs are saved; continue with `resume`).");

  RunConfig compute_cfg, verify_cfg, estimate_cfg, resume_cfg;
  Extras compute_x, verify_x, estimate_x, resume_x;

  auto* compute = app.add_subcommand("compute", "Print bits of pi starting at --pos");
  auto compute_opts = add_request_options(*compute, compute_cfg, true);
  add_engine_options(*compute, compute_cfg, compute_opts, compute_x);

  auto* verify_cmd = app.add_subcommand("verify", "Compute at --pos and --pos - 4 and keep only bits both agree on");
  auto verify_opts = add_request_options(*verify_cmd, verify_cfg, true);
  add_engine_options(*verify_cmd, verify_cfg, verify_opts, verify_x);
  verify_cmd->add_option("--inject-flip", verify_x.inject_flip)->group("");

  auto* estimate = app.add_subcommand("estimate", "Rounding-error confidence table for a position and precision");
  add_request_options(*estimate, estimate_cfg, true);
  estimate->add_option("--precision", estimate_x.precision, "Working precision p in bits (default: from --bits and --guard)")
      ->envname("PIBITS_PRECISION")
      ->check(CLI::Range(1U, 1U << 20));
  estimate->add_option("--bound", estimate_x.bound, "Centre the table on bound exponent b")->envname("PIBITS_BOUND");
  estimate->add_flag("--json", estimate_cfg.json, "Machine-readable output")->envname("PIBITS_JSON");

  auto* resume = app.add_subcommand("resume", "Finish an interrupted compute from its checkpoint directory");
  auto resume_opts = add_request_options(*resume, resume_cfg, false);
  add_engine_options(*resume, resume_cfg, resume_opts, resume_x);
  resume->get_option("--ckpt-dir")->required();

  stop_flag().store(false);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*compute) return cmd_compute(compute_cfg, compute_x, out);
    if (*verify_cmd) return cmd_verify(verify_cfg, verify_x, out, err);
    if (*estimate) return cmd_estimate(estimate_cfg, estimate_x, out);
    if (*resume) return cmd_resume(resume_cfg, resume_opts, resume_x, out);
  } catch (const ContractViolation& e) {
    err << "pibits: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckpointMismatch& e) {
    err << "pibits: " << e.what() << "\n";
    return kUsage;
  } catch (const StorageError& e) {
    err << "pibits: storage: " << e.what() << "\n";
    return kStorage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "pibits: storage: " << e.what() << "\n";
    return kStorage;
  } catch (const Interrupted& e) {
    err << "pibits: interrupted: " << e.what() << "\n";
    const auto& dir = *resume ? resume_cfg.checkpoint_dir : compute_cfg.checkpoint_dir;
    if (!dir.empty() && !*verify_cmd) {
      err << "pibits: finished jobs are saved; continue with `pibits resume --ckpt-dir " << dir << "`\n";
    }
    return kInterrupted;
  }
  return kUsage;
}

}  // namespace pibits::cli
