#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace pibits::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kStorage = 2,
  kDisagreement = 3,
  kInterrupted = 130,
};

struct RunConfig {
  std::uint64_t position = 1;
  unsigned bits = 256;
  std::string formula = "bellard";
  unsigned guard_bits = 64;
  unsigned map_slots = 4;
  unsigned reduce_slots = 2;
  unsigned jobs = 0;  // 0: derive from terms_per_thread
  unsigned tasks_per_job = 1;
  unsigned threads_per_task = 1;
  std::uint64_t terms_per_thread = 200'000'000;
  unsigned submit_threshold = 1;
  unsigned max_concurrent_jobs = 60;
  std::string checkpoint_dir;
  bool json = false;
  std::int64_t seed = -1;  // background load trace seed; negative disables it

  unsigned precision_bits() const;
};

/// Set by the signal handlers; the engine polls it between jobs.
std::atomic<bool>& stop_flag();

/// SIGINT and SIGTERM request a clean stop after persisting finished jobs.
void install_signal_handlers();

/// Whole command line, argv[0] included. Returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pibits::cli
