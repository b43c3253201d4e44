#pragma once

// Map/reduce slot accounting. Two statically sized budgets of concurrent work
// units; a synthetic background load can occupy part of each budget, and
// work is admitted only into what is left.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <utility>

namespace pibits::engine {

enum class Side { map, reduce };

enum class Decision { submit_map_side, submit_reduce_side, wait };

const char* to_string(Decision d);

struct SlotModel {
  unsigned map_capacity = 0;
  unsigned reduce_capacity = 0;
  unsigned map_free = 0;
  unsigned reduce_free = 0;
  unsigned submit_threshold = 1;
};

/// Map-side when enough map slots are free, else reduce-side when enough
/// reduce slots are free, else wait. Nothing pending is always a wait.
Decision schedule_step(const SlotModel& slots, std::size_t pending_jobs);

/// Seeded random background demand on both budgets, one sample per tick.
class LoadTrace {
 public:
  LoadTrace(std::uint64_t seed, unsigned map_capacity, unsigned reduce_capacity);
  std::pair<unsigned, unsigned> next();

 private:
  std::mt19937_64 rng_;
  unsigned map_capacity_;
  unsigned reduce_capacity_;
  unsigned map_level_ = 0;
  unsigned reduce_level_ = 0;
};

/// Peak occupancy seen by a SlotPool. `violations` counts admissions that
/// would have pushed a side past its capacity; it stays zero.
struct SlotStats {
  unsigned peak_map_running = 0;
  unsigned peak_reduce_running = 0;
  unsigned peak_map_occupied = 0;     // ours + background
  unsigned peak_reduce_occupied = 0;
  std::uint64_t admissions = 0;
  std::uint64_t violations = 0;
};

/// Queues of runnable work units, one per side, drained by workers that may
/// only start a unit while its side has a free slot.
class SlotPool {
 public:
  using Work = std::function<void()>;

  SlotPool(unsigned map_capacity, unsigned reduce_capacity);

  void submit(Side side, Work work);

  /// Background demand, clamped so ours + background never exceeds capacity.
  void set_background(unsigned map_busy, unsigned reduce_busy);

  /// Free slots net of running work, background and already-queued work.
  SlotModel snapshot(unsigned submit_threshold) const;

  /// Blocks until a unit is admitted (its slot already taken) or the pool is
  /// closed, in which case it returns nothing.
  std::optional<std::pair<Side, Work>> next();
  void finish(Side side);

  /// Drops queued work and wakes every waiting worker.
  void close();

  SlotStats stats() const;

 private:
  unsigned free_locked(Side side) const;
  void record_locked(Side side);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  unsigned map_capacity_;
  unsigned reduce_capacity_;
  unsigned map_running_ = 0;
  unsigned reduce_running_ = 0;
  unsigned map_background_ = 0;
  unsigned reduce_background_ = 0;
  std::deque<Work> map_queue_;
  std::deque<Work> reduce_queue_;
  bool closed_ = false;
  SlotStats stats_;
};

}  // namespace pibits::engine
