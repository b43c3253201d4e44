#include "pibits/checkpoint.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "pibits/errors.hpp"

namespace pibits::engine {

namespace fs = std::filesystem;

namespace {

std::string errno_text() { return std::strerror(errno); }

std::map<std::string, std::string> parse_lines(const std::string& text, const std::string& what) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw StorageError(what + ": line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

template <typename T>
T parse_number(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw StorageError("run.meta: missing key '" + key + "'");
  T value{};
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw StorageError("run.meta: bad value for '" + key + "': " + s);
  }
  return value;
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!fs::exists(path)) return std::nullopt;
    throw StorageError("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool RunMeta::same_run(const RunMeta& o) const { return describe_difference(o).empty(); }

std::string RunMeta::describe_difference(const RunMeta& o) const {
  auto diff = [](const char* key, const auto& a, const auto& b) {
    std::ostringstream ss;
    ss << key << " (" << a << " vs " << b << ")";
    return ss.str();
  };
  if (format_version != o.format_version) return diff("format_version", format_version, o.format_version);
  if (formula != o.formula) return diff("formula", formula, o.formula);
  if (n != o.n) return diff("n", n, o.n);
  if (precision_bits != o.precision_bits) return diff("p", precision_bits, o.precision_bits);
  if (guard_bits != o.guard_bits) return diff("guard", guard_bits, o.guard_bits);
  if (jobs != o.jobs) return diff("jobs", jobs, o.jobs);
  if (tasks_per_job != o.tasks_per_job) return diff("tasks_per_job", tasks_per_job, o.tasks_per_job);
  if (threads_per_task != o.threads_per_task) {
    return diff("threads_per_task", threads_per_task, o.threads_per_task);
  }
  return {};
}

std::string format_meta(const RunMeta& m) {
  std::ostringstream ss;
  ss << "format_version=" << m.format_version << "\n"
     << "formula=" << m.formula << "\n"
     << "n=" << m.n << "\n"
     << "p=" << m.precision_bits << "\n"
     << "guard=" << m.guard_bits << "\n"
     << "bits=" << m.display_bits << "\n"
     << "jobs=" << m.jobs << "\n"
     << "tasks_per_job=" << m.tasks_per_job << "\n"
     << "threads_per_task=" << m.threads_per_task << "\n";
  return ss.str();
}

RunMeta parse_meta(const std::string& text) {
  const auto kv = parse_lines(text, "run.meta");
  RunMeta m;
  m.format_version = parse_number<int>(kv, "format_version");
  const auto f = kv.find("formula");
  if (f == kv.end()) throw StorageError("run.meta: missing key 'formula'");
  m.formula = f->second;
  m.n = parse_number<std::uint64_t>(kv, "n");
  m.precision_bits = parse_number<unsigned>(kv, "p");
  m.guard_bits = parse_number<unsigned>(kv, "guard");
  m.display_bits = kv.contains("bits") ? parse_number<unsigned>(kv, "bits") : 0;
  m.jobs = parse_number<unsigned>(kv, "jobs");
  m.tasks_per_job = parse_number<unsigned>(kv, "tasks_per_job");
  m.threads_per_task = parse_number<unsigned>(kv, "threads_per_task");
  return m;
}

CheckpointStore::CheckpointStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw StorageError("cannot create checkpoint directory " + dir_.string() + ": " + ec.message());
  }
}

std::string CheckpointStore::job_file_name(std::size_t index) {
  return "job-" + std::to_string(index) + ".sum";
}

void CheckpointStore::write_atomically(const std::string& name, const std::string& contents) {
  const fs::path tmp = dir_ / (".tmp-" + name + "-" + std::to_string(::getpid()));
  const fs::path target = dir_ / name;

  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot create " + tmp.string() + ": " + errno_text());
  std::size_t done = 0;
  while (done < contents.size()) {
    const auto w = ::write(fd, contents.data() + done, contents.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      const auto msg = errno_text();
      ::close(fd);
      ::unlink(tmp.c_str());
      throw StorageError("cannot write " + tmp.string() + ": " + msg);
    }
    done += static_cast<std::size_t>(w);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw StorageError("cannot sync " + tmp.string() + ": " + errno_text());
  }
  if (::rename(tmp.c_str(), target.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw StorageError("cannot rename into " + target.string() + ": " + errno_text());
  }
  const int dfd = ::open(dir_.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

std::optional<RunMeta> CheckpointStore::read_meta() const {
  const auto text = read_file(dir_ / "run.meta");
  if (!text) return std::nullopt;
  return parse_meta(*text);
}

void CheckpointStore::write_meta(const RunMeta& meta) { write_atomically("run.meta", format_meta(meta)); }

std::optional<CheckpointRecord> CheckpointStore::read_job(std::size_t index) const {
  const auto path = dir_ / job_file_name(index);
  const auto text = read_file(path);
  if (!text) return std::nullopt;
  const auto kv = parse_lines(*text, path.filename().string());
  const auto slice = kv.find("slice");
  const auto sum = kv.find("sum");
  if (slice == kv.end() || sum == kv.end()) {
    throw StorageError(path.string() + ": expected slice= and sum= lines");
  }
  CheckpointRecord rec;
  rec.slice_id = slice->second;
  try {
    rec.partial_sum = fixedpoint::FixedFraction::from_record(sum->second);
  } catch (const ContractViolation& e) {
    throw StorageError(path.string() + ": " + e.what());
  }
  std::error_code ec;
  rec.timestamp = fs::last_write_time(path, ec);
  return rec;
}

void CheckpointStore::write_job(std::size_t index, const CheckpointRecord& record) {
  write_atomically(job_file_name(index),
                   "slice=" + record.slice_id + "\nsum=" + record.partial_sum.to_record() + "\n");
}

std::vector<std::size_t> CheckpointStore::completed_jobs() const {
  std::vector<std::size_t> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    const auto name = entry.path().filename().string();
    if (!name.starts_with("job-") || !name.ends_with(".sum")) continue;
    const auto digits = std::string_view(name).substr(4, name.size() - 8);
    std::size_t idx = 0;
    const auto [ptr, err] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (err == std::errc{} && ptr == digits.data() + digits.size()) out.push_back(idx);
  }
  if (ec) throw StorageError("cannot list " + dir_.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pibits::engine
