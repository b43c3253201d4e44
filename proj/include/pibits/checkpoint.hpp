#pragma once

// Durable job-level partial sums. One directory per run:
//
//   run.meta        key=value header identifying the request and plan
//   job-<j>.sum     "slice=<id>\nsum=p=<bits>:<hex>\n", one per finished job
//
// Files appear only by rename, so a file that exists is complete.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pibits/fixedpoint.hpp"

namespace pibits::engine {

inline constexpr int kCheckpointFormatVersion = 1;

struct RunMeta {
  int format_version = kCheckpointFormatVersion;
  std::string formula;
  std::uint64_t n = 0;
  unsigned precision_bits = 0;
  unsigned guard_bits = 0;
  unsigned jobs = 0;
  unsigned tasks_per_job = 0;
  unsigned threads_per_task = 0;
  unsigned display_bits = 0;  // bits the user asked to see; informational

  /// Same request and plan shape (display_bits is not compared).
  bool same_run(const RunMeta& other) const;
  /// First differing key, for error messages.
  std::string describe_difference(const RunMeta& other) const;
};

struct CheckpointRecord {
  std::string slice_id;
  fixedpoint::FixedFraction partial_sum{fixedpoint::kWordBits};
  std::filesystem::file_time_type timestamp{};
};

class CheckpointStore {
 public:
  /// Creates the directory if needed. Throws StorageError on failure.
  explicit CheckpointStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<RunMeta> read_meta() const;
  void write_meta(const RunMeta& meta);

  std::optional<CheckpointRecord> read_job(std::size_t index) const;
  void write_job(std::size_t index, const CheckpointRecord& record);

  /// Indices of every job-<j>.sum present, ascending.
  std::vector<std::size_t> completed_jobs() const;

  static std::string job_file_name(std::size_t index);

 private:
  void write_atomically(const std::string& name, const std::string& contents);

  std::filesystem::path dir_;
};

std::string format_meta(const RunMeta& meta);
RunMeta parse_meta(const std::string& text);

}  // namespace pibits::engine
