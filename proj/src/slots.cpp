#include "pibits/slots.hpp"

#include <algorithm>

namespace pibits::engine {

const char* to_string(Decision d) {
  switch (d) {
    case Decision::submit_map_side: return "submit_map_side";
    case Decision::submit_reduce_side: return "submit_reduce_side";
    case Decision::wait: return "wait";
  }
  return "?";
}

Decision schedule_step(const SlotModel& slots, std::size_t pending_jobs) {
  if (pending_jobs == 0) return Decision::wait;
  if (slots.map_capacity > 0 && slots.map_free >= slots.submit_threshold) return Decision::submit_map_side;
  if (slots.reduce_capacity > 0 && slots.reduce_free >= slots.submit_threshold) {
    return Decision::submit_reduce_side;
  }
  return Decision::wait;
}

LoadTrace::LoadTrace(std::uint64_t seed, unsigned map_capacity, unsigned reduce_capacity)
    : rng_(seed), map_capacity_(map_capacity), reduce_capacity_(reduce_capacity) {}

std::pair<unsigned, unsigned> LoadTrace::next() {
  // Mostly a +-1 random walk, with an occasional jump to a fresh level.
  auto step = [this](unsigned level, unsigned cap) {
    if (cap == 0) return 0U;
    const auto roll = rng_() % 16;
    if (roll == 0) return static_cast<unsigned>(rng_() % (cap + 1));
    if (roll < 6 && level > 0) return level - 1;
    if (roll < 11 && level < cap) return level + 1;
    return level;
  };
  map_level_ = step(map_level_, map_capacity_);
  reduce_level_ = step(reduce_level_, reduce_capacity_);
  return {map_level_, reduce_level_};
}

SlotPool::SlotPool(unsigned map_capacity, unsigned reduce_capacity)
    : map_capacity_(map_capacity), reduce_capacity_(reduce_capacity) {}

void SlotPool::submit(Side side, Work work) {
  {
    std::lock_guard lock(mu_);
    (side == Side::map ? map_queue_ : reduce_queue_).push_back(std::move(work));
  }
  cv_.notify_all();
}

void SlotPool::set_background(unsigned map_busy, unsigned reduce_busy) {
  {
    std::lock_guard lock(mu_);
    map_background_ = std::min(map_busy, map_capacity_ - map_running_);
    reduce_background_ = std::min(reduce_busy, reduce_capacity_ - reduce_running_);
    stats_.peak_map_occupied = std::max(stats_.peak_map_occupied, map_running_ + map_background_);
    stats_.peak_reduce_occupied =
        std::max(stats_.peak_reduce_occupied, reduce_running_ + reduce_background_);
  }
  cv_.notify_all();
}

unsigned SlotPool::free_locked(Side side) const {
  const unsigned cap = side == Side::map ? map_capacity_ : reduce_capacity_;
  const unsigned used = side == Side::map ? map_running_ + map_background_
                                          : reduce_running_ + reduce_background_;
  return cap > used ? cap - used : 0;
}

SlotModel SlotPool::snapshot(unsigned submit_threshold) const {
  std::lock_guard lock(mu_);
  SlotModel m;
  m.map_capacity = map_capacity_;
  m.reduce_capacity = reduce_capacity_;
  const auto net = [](unsigned free, std::size_t queued) {
    return free > queued ? free - static_cast<unsigned>(queued) : 0U;
  };
  m.map_free = net(free_locked(Side::map), map_queue_.size());
  m.reduce_free = net(free_locked(Side::reduce), reduce_queue_.size());
  m.submit_threshold = submit_threshold;
  return m;
}

void SlotPool::record_locked(Side side) {
  ++stats_.admissions;
  if (side == Side::map) {
    stats_.peak_map_running = std::max(stats_.peak_map_running, map_running_);
    stats_.peak_map_occupied = std::max(stats_.peak_map_occupied, map_running_ + map_background_);
    if (map_running_ + map_background_ > map_capacity_) ++stats_.violations;
  } else {
    stats_.peak_reduce_running = std::max(stats_.peak_reduce_running, reduce_running_);
    stats_.peak_reduce_occupied =
        std::max(stats_.peak_reduce_occupied, reduce_running_ + reduce_background_);
    if (reduce_running_ + reduce_background_ > reduce_capacity_) ++stats_.violations;
  }
}

std::optional<std::pair<Side, SlotPool::Work>> SlotPool::next() {
  std::unique_lock lock(mu_);
  for (;;) {
    if (closed_) return std::nullopt;
    if (!map_queue_.empty() && free_locked(Side::map) > 0) {
      Work w = std::move(map_queue_.front());
      map_queue_.pop_front();
      ++map_running_;
      record_locked(Side::map);
      return std::make_pair(Side::map, std::move(w));
    }
    if (!reduce_queue_.empty() && free_locked(Side::reduce) > 0) {
      Work w = std::move(reduce_queue_.front());
      reduce_queue_.pop_front();
      ++reduce_running_;
      record_locked(Side::reduce);
      return std::make_pair(Side::reduce, std::move(w));
    }
    cv_.wait(lock);
  }
}

void SlotPool::finish(Side side) {
  {
    std::lock_guard lock(mu_);
    (side == Side::map ? map_running_ : reduce_running_) -= 1;
  }
  cv_.notify_all();
}

void SlotPool::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
    map_queue_.clear();
    reduce_queue_.clear();
  }
  cv_.notify_all();
}

SlotStats SlotPool::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

}  // namespace pibits::engine
