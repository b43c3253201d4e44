#pragma once

// Elastic, checkpointed summation. The index set of every sub-series is cut
// into jobs, each job into tasks, each task into per-thread parts:
//
//   S = sum_j Sigma_j,  Sigma_j = sum_k sigma_jk,  sigma_jk = sum_t s_jkt
//
// A single controller thread submits jobs as map-side or reduce-side work
// depending on free slots, persists Sigma_j as each job finishes, and
// combines the final sum. Because mod-1 fixed-point addition is exact, the
// result does not depend on the plan shape, worker count or schedule.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pibits/checkpoint.hpp"
#include "pibits/series.hpp"
#include "pibits/slots.hpp"

namespace pibits::engine {

using fixedpoint::FixedFraction;
using series::KRange;

enum class Level { job, task, thread };

const char* to_string(Level level);

struct ComputationSlice {
  std::string formula;
  std::size_t series_index = 0;
  std::uint64_t n = 0;
  unsigned precision_bits = 0;
  Level level = Level::job;
  KRange k_range;

  /// Deterministic identity: "<formula>:s<series>:k<begin>-<end>:n<n>:p<p>".
  std::string id() const;
};

/// Splits c.k_range into min(m, size) contiguous parts whose sizes differ by
/// at most one, one level below c. Throws ContractViolation when m == 0.
std::vector<ComputationSlice> partition(const ComputationSlice& c, std::size_t m);

/// Partial sum of c's terms with (-1)^k applied, without the series sign.
/// With threads > 1 the slice is split once more and summed by the OpenMP
/// kernel, one thread per part.
FixedFraction compute(const ComputationSlice& c, unsigned threads = 1);

struct PartitionPlan {
  unsigned jobs = 1;  // target total; every non-empty series gets at least one
  unsigned tasks_per_job = 1;
  unsigned threads_per_task = 1;
};

/// Chooses a job count so each thread gets about terms_per_thread terms.
PartitionPlan plan_for(const series::ExtractionRequest& request, std::uint64_t terms_per_thread,
                       unsigned tasks_per_job, unsigned threads_per_task);

/// Job slices for a request, indexed 0..N-1 in series order. Jobs are shared
/// out across series in proportion to their term counts.
std::vector<ComputationSlice> job_slices(const series::ExtractionRequest& request,
                                         const PartitionPlan& plan);

struct EngineOptions {
  unsigned map_slots = 4;
  unsigned reduce_slots = 2;
  unsigned submit_threshold = 1;
  unsigned max_concurrent_jobs = 60;
  /// Seed for a synthetic background load; no background load when empty.
  std::optional<std::uint64_t> load_seed;
  std::chrono::microseconds tick{2000};
  /// Stop (as if killed) once this many jobs have been persisted in this run.
  std::optional<std::size_t> stop_after_jobs;
  /// Polled by the controller; set from a signal handler to stop cleanly.
  const std::atomic<bool>* stop_flag = nullptr;
  /// Written into run.meta for display on resume.
  unsigned display_bits = 0;
  /// Called on the worker thread just before (true) and after (false) each
  /// admitted unit runs.
  std::function<void(Side, bool)> unit_observer;
};

struct RunStats {
  std::size_t jobs_total = 0;
  std::size_t jobs_restored = 0;
  std::size_t jobs_computed = 0;
  std::size_t map_side_jobs = 0;
  std::size_t reduce_side_jobs = 0;
  std::size_t peak_concurrent_jobs = 0;
  SlotStats slots;
  double elapsed_seconds = 0;
  double cpu_seconds = 0;
};

struct RunOutcome {
  series::ExtractionResult result;
  RunStats stats;
  /// Sigma_j for every job, by index; with signs these sum to the result.
  std::vector<FixedFraction> job_sums;
};

/// Runs every job not already in the store. store may be null (nothing is
/// persisted). An existing run.meta must describe the same request and plan.
/// Throws Interrupted when stopped early, StorageError when persisting
/// fails, CheckpointMismatch when the store belongs to another run.
RunOutcome run(const series::ExtractionRequest& request, const PartitionPlan& plan,
               CheckpointStore* store, const EngineOptions& options = {});

/// Finishes a run from whatever the store holds; an empty store is a fresh run.
RunOutcome resume(const series::ExtractionRequest& request, const PartitionPlan& plan,
                  CheckpointStore& store, const EngineOptions& options = {});

}  // namespace pibits::engine
