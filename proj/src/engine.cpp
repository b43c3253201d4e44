#include "pibits/engine.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "pibits/errors.hpp"
#include "pibits/kernels.hpp"

namespace pibits::engine {

namespace {

double process_cpu_seconds() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  const auto tv = [](const timeval& t) { return static_cast<double>(t.tv_sec) + t.tv_usec * 1e-6; };
  return tv(ru.ru_utime) + tv(ru.ru_stime);
}

Level child_level(Level level) {
  switch (level) {
    case Level::job: return Level::task;
    case Level::task:
    case Level::thread: return Level::thread;
  }
  return Level::thread;
}

void validate_plan(const PartitionPlan& plan) {
  if (plan.jobs == 0 || plan.tasks_per_job == 0 || plan.threads_per_task == 0) {
    throw ContractViolation("plan needs at least one job, task per job and thread per task");
  }
}

void validate_options(const EngineOptions& o) {
  if (o.map_slots + o.reduce_slots == 0) throw ContractViolation("no map or reduce slots configured");
  if (o.submit_threshold == 0) throw ContractViolation("submit threshold must be positive");
  if (o.submit_threshold > std::max(o.map_slots, o.reduce_slots)) {
    throw ContractViolation("submit threshold " + std::to_string(o.submit_threshold) +
                            " exceeds every slot capacity; nothing could ever be submitted");
  }
  if (o.max_concurrent_jobs == 0) throw ContractViolation("concurrent job cap must be positive");
}

struct Completion {
  std::size_t job = 0;
  FixedFraction sum{fixedpoint::kWordBits};
  std::exception_ptr error;
};

// Ordered hand-off from workers back to the controller.
class CompletionChannel {
 public:
  void push(Completion c) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(c));
    }
    cv_.notify_one();
  }

  std::deque<Completion> drain(std::chrono::microseconds wait) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, wait, [this] { return !queue_.empty(); });
    return std::exchange(queue_, {});
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Completion> queue_;
};

// Owns the worker threads; closing the pool and joining happens on every
// exit path, including exceptions.
class WorkerGroup {
 public:
  WorkerGroup(SlotPool& pool, unsigned count, const std::function<void(Side, bool)>& observer) : pool_(pool) {
    for (unsigned i = 0; i < count; ++i) {
      threads_.emplace_back([this, &observer] {
        while (auto unit = pool_.next()) {
          if (observer) observer(unit->first, true);
          unit->second();
          if (observer) observer(unit->first, false);
          pool_.finish(unit->first);
        }
      });
    }
  }
  ~WorkerGroup() {
    pool_.close();
    for (auto& t : threads_) t.join();
  }
  WorkerGroup(const WorkerGroup&) = delete;
  WorkerGroup& operator=(const WorkerGroup&) = delete;

 private:
  SlotPool& pool_;
  std::vector<std::thread> threads_;
};

struct JobState {
  std::size_t remaining = 0;
  FixedFraction sum{fixedpoint::kWordBits};
};

RunMeta meta_for(const series::ExtractionRequest& request, const PartitionPlan& plan,
                 const EngineOptions& options) {
  RunMeta m;
  m.formula = request.formula.name;
  m.n = request.n();
  m.precision_bits = request.precision_bits;
  m.guard_bits = request.guard_bits;
  m.jobs = plan.jobs;
  m.tasks_per_job = plan.tasks_per_job;
  m.threads_per_task = plan.threads_per_task;
  m.display_bits = options.display_bits ? options.display_bits : request.reported_bits();
  return m;
}

}  // namespace

const char* to_string(Level level) {
  switch (level) {
    case Level::job: return "job";
    case Level::task: return "task";
    case Level::thread: return "thread";
  }
  return "?";
}

std::string ComputationSlice::id() const {
  return formula + ":s" + std::to_string(series_index) + ":k" + std::to_string(k_range.begin) + "-" +
         std::to_string(k_range.end) + ":n" + std::to_string(n) + ":p" + std::to_string(precision_bits);
}

std::vector<ComputationSlice> partition(const ComputationSlice& c, std::size_t m) {
  if (m == 0) throw ContractViolation("partition into zero parts");
  const std::uint64_t len = c.k_range.size();
  const std::uint64_t parts = std::min<std::uint64_t>(m, len);
  std::vector<ComputationSlice> out;
  out.reserve(parts);
  std::uint64_t begin = c.k_range.begin;
  for (std::uint64_t i = 0; i < parts; ++i) {
    const std::uint64_t size = len / parts + (i < len % parts ? 1 : 0);
    ComputationSlice part = c;
    part.level = child_level(c.level);
    part.k_range = {begin, begin + size};
    out.push_back(std::move(part));
    begin += size;
  }
  return out;
}

FixedFraction compute(const ComputationSlice& c, unsigned threads) {
  const auto& spec = series::formula_by_name(c.formula).series.at(c.series_index);
  if (threads <= 1 || c.level == Level::thread) {
    return series::sum_series_range(spec, c.n, c.k_range, c.precision_bits);
  }
  return kernels::sum_series_range_omp(spec, c.n, c.k_range, c.precision_bits, threads);
}

PartitionPlan plan_for(const series::ExtractionRequest& request, std::uint64_t terms_per_thread,
                       unsigned tasks_per_job, unsigned threads_per_task) {
  if (terms_per_thread == 0) throw ContractViolation("terms per thread must be positive");
  std::uint64_t total = 0;
  for (const auto& s : request.formula.series) {
    total += series::tail_cutoff(s, request.n(), request.precision_bits);
  }
  PartitionPlan plan;
  plan.tasks_per_job = std::max(1U, tasks_per_job);
  plan.threads_per_task = std::max(1U, threads_per_task);
  const std::uint64_t per_job = terms_per_thread * plan.tasks_per_job * plan.threads_per_task;
  plan.jobs = static_cast<unsigned>(std::clamp<std::uint64_t>((total + per_job - 1) / per_job, 1, 1U << 20));
  return plan;
}

std::vector<ComputationSlice> job_slices(const series::ExtractionRequest& request,
                                         const PartitionPlan& plan) {
  series::validate(request);
  validate_plan(plan);
  const auto& formula = request.formula;
  const std::size_t count = formula.series.size();
  std::vector<std::uint64_t> length(count);
  std::vector<std::uint64_t> share(count, 0);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < count; ++i) {
    length[i] = series::tail_cutoff(formula.series[i], request.n(), request.precision_bits);
    if (length[i] > 0) {
      share[i] = 1;
      ++assigned;
    }
  }
  // Hand out the remaining jobs one at a time to the series with the most
  // terms per job so far; ties go to the lower index.
  for (; assigned < plan.jobs; ++assigned) {
    std::size_t best = count;
    for (std::size_t i = 0; i < count; ++i) {
      if (share[i] == 0 || share[i] >= length[i]) continue;
      if (best == count ||
          static_cast<unsigned __int128>(length[i]) * share[best] >
              static_cast<unsigned __int128>(length[best]) * share[i]) {
        best = i;
      }
    }
    if (best == count) break;  // every series is down to single terms
    ++share[best];
  }

  std::vector<ComputationSlice> jobs;
  for (std::size_t i = 0; i < count; ++i) {
    if (length[i] == 0) continue;
    ComputationSlice whole{formula.name, i, request.n(), request.precision_bits, Level::job, {0, length[i]}};
    for (auto& part : partition(whole, share[i])) {
      part.level = Level::job;
      jobs.push_back(std::move(part));
    }
  }
  return jobs;
}

RunOutcome run(const series::ExtractionRequest& request, const PartitionPlan& plan,
               CheckpointStore* store, const EngineOptions& options) {
  validate_options(options);
  const auto wall_start = std::chrono::steady_clock::now();
  const double cpu_start = process_cpu_seconds();
  const unsigned p = request.precision_bits;

  const auto jobs = job_slices(request, plan);
  std::vector<std::optional<FixedFraction>> sums(jobs.size());
  RunStats stats;
  stats.jobs_total = jobs.size();

  if (store != nullptr) {
    const RunMeta meta = meta_for(request, plan, options);
    if (const auto existing = store->read_meta()) {
      if (!existing->same_run(meta)) {
        throw CheckpointMismatch("checkpoint directory " + store->dir().string() +
                                 " belongs to a different run: " + existing->describe_difference(meta));
      }
    } else {
      store->write_meta(meta);
    }
    for (const std::size_t idx : store->completed_jobs()) {
      if (idx >= jobs.size()) {
        throw CheckpointMismatch("stored job " + std::to_string(idx) + " is outside this plan's " +
                                 std::to_string(jobs.size()) + " jobs");
      }
      auto rec = store->read_job(idx);
      if (!rec) continue;
      if (rec->slice_id != jobs[idx].id()) {
        throw CheckpointMismatch("stored job " + std::to_string(idx) + " is slice " + rec->slice_id +
                                 ", expected " + jobs[idx].id());
      }
      if (rec->partial_sum.precision_bits() != p) {
        throw CheckpointMismatch("stored job " + std::to_string(idx) + " has precision " +
                                 std::to_string(rec->partial_sum.precision_bits()));
      }
      sums[idx] = std::move(rec->partial_sum);
      ++stats.jobs_restored;
    }
  }

  std::deque<std::size_t> pending;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!sums[j]) pending.push_back(j);
  }

  SlotStats slot_stats;
  if (!pending.empty()) {
    CompletionChannel channel;
    SlotPool pool(options.map_slots, options.reduce_slots);
    WorkerGroup workers(pool, options.map_slots + options.reduce_slots, options.unit_observer);
    std::optional<LoadTrace> trace;
    if (options.load_seed) trace.emplace(*options.load_seed, options.map_slots, options.reduce_slots);

    std::map<std::size_t, JobState> outstanding;
    const unsigned threads = plan.threads_per_task;

    for (;;) {
      if (options.stop_flag != nullptr && options.stop_flag->load()) {
        throw Interrupted("stopped with " + std::to_string(pending.size() + outstanding.size()) +
                          " jobs unfinished");
      }
      if (trace) {
        const auto [map_busy, reduce_busy] = trace->next();
        pool.set_background(map_busy, reduce_busy);
      }

      while (outstanding.size() < options.max_concurrent_jobs && !pending.empty()) {
        const Decision d = schedule_step(pool.snapshot(options.submit_threshold), pending.size());
        if (d == Decision::wait) break;
        const std::size_t idx = pending.front();
        pending.pop_front();
        // Map-side jobs partition up front and run each part as a mapper;
        // reduce-side jobs run the same partition step once, then hand the
        // parts to reducers. Either way the parts are tasks on one side.
        const Side side = d == Decision::submit_map_side ? Side::map : Side::reduce;
        (side == Side::map ? stats.map_side_jobs : stats.reduce_side_jobs) += 1;
        auto tasks = partition(jobs[idx], plan.tasks_per_job);
        outstanding[idx] = JobState{tasks.size(), FixedFraction(p)};
        stats.peak_concurrent_jobs = std::max(stats.peak_concurrent_jobs, outstanding.size());
        for (auto& task : tasks) {
          pool.submit(side, [&channel, idx, threads, task = std::move(task)] {
            Completion c;
            c.job = idx;
            try {
              c.sum = compute(task, threads);
            } catch (...) {
              c.error = std::current_exception();
            }
            channel.push(std::move(c));
          });
        }
      }

      if (pending.empty() && outstanding.empty()) break;

      for (auto& c : channel.drain(options.tick)) {
        if (c.error) std::rethrow_exception(c.error);
        auto& state = outstanding.at(c.job);
        state.sum = fixedpoint::add_mod1(state.sum, c.sum);
        if (--state.remaining > 0) continue;

        if (store != nullptr) store->write_job(c.job, {jobs[c.job].id(), state.sum, {}});
        sums[c.job] = std::move(state.sum);
        outstanding.erase(c.job);
        ++stats.jobs_computed;
        if (options.stop_after_jobs && stats.jobs_computed >= *options.stop_after_jobs &&
            !(pending.empty() && outstanding.empty())) {
          throw Interrupted("stopped after " + std::to_string(stats.jobs_computed) + " jobs");
        }
      }
    }
    slot_stats = pool.stats();
  }

  RunOutcome out;
  FixedFraction total(p);
  out.job_sums.reserve(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& spec = request.formula.series[jobs[j].series_index];
    total = spec.sign > 0 ? fixedpoint::add_mod1(total, *sums[j]) : fixedpoint::sub_mod1(total, *sums[j]);
    out.job_sums.push_back(std::move(*sums[j]));
  }
  out.result = series::make_result(request, std::move(total));
  stats.slots = slot_stats;
  stats.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  stats.cpu_seconds = process_cpu_seconds() - cpu_start;
  out.stats = stats;
  return out;
}

RunOutcome resume(const series::ExtractionRequest& request, const PartitionPlan& plan,
                  CheckpointStore& store, const EngineOptions& options) {
  return run(request, plan, &store, options);
}

}  // namespace pibits::engine
