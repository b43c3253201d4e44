#include "pibits/cli.hpp"

#include <signal.h>
#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "oracle.hpp"

using namespace pibits;
namespace fs = std::filesystem;

extern char** environ;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "pibits");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json cli_json(std::vector<std::string> args) {
  args.push_back("--json");
  const auto r = run(args);
  REQUIRE(r.code == 0);
  return nlohmann::json::parse(r.out);
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("pibits-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

pid_t spawn(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::string exe = PIBITS_CLI_PATH;
  argv.push_back(exe.data());
  std::vector<std::string> copy = args;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_addopen(&fa, 2, "/dev/null", O_WRONLY, 0);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, exe.c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  REQUIRE(rc == 0);
  return pid;
}

std::size_t job_files(const fs::path& dir) {
  std::size_t n = 0;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.path().extension() == ".sum") ++n;
  }
  return n;
}

// Waits until the child has persisted at least `jobs` job files; false if it
// exited first.
bool wait_for_jobs(pid_t pid, const fs::path& dir, std::size_t jobs) {
  for (;;) {
    if (job_files(dir) >= jobs) return true;
    int status = 0;
    if (::waitpid(pid, &status, WNOHANG) == pid) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

}  // namespace

TEST_CASE("compute prints known leading digits") {
  for (const char* formula : {"bellard", "bbp16"}) {
    auto r = run({"compute", "--pos", "9", "--bits", "8", "--formula", formula});
    CHECK(r.code == 0);
    CHECK(r.out.find("hex        3F\n") != std::string::npos);
    r = run({"compute", "--pos", "1", "--bits", "16", "--formula", formula});
    CHECK(r.out.find("hex        243F\n") != std::string::npos);
  }
  const auto j = cli_json({"compute", "--pos", "1", "--bits", "1024"});
  auto expected = oracle::pi_fraction_hex(256);
  std::string digits = j["hex"];
  std::erase(digits, ' ');
  CHECK(digits == expected);
  for (const char* key : {"position", "bits", "hex", "elapsed", "cpu_seconds"}) CHECK(j.contains(key));
  CHECK(j["position"] == 1);
  CHECK(j["bits"] == 1024);
}

TEST_CASE("hex output is blocks of eight uppercase digits") {
  const auto r = run({"compute", "--pos", "1", "--bits", "72"});
  CHECK(r.out.find("hex        243F6A88 85A308D3 13\n") != std::string::npos);
}

TEST_CASE("output is independent of worker and plan shape") {
  const auto a = cli_json({"compute", "--pos", "1000001", "--bits", "256", "--map-slots", "1", "--reduce-slots", "0",
                           "--jobs", "1"});
  const auto b = cli_json({"compute", "--pos", "1000001", "--bits", "256", "--map-slots", "4", "--reduce-slots", "3",
                           "--jobs", "40", "--tasks", "3", "--threads", "2", "--seed", "5", "--threshold", "2"});
  const auto c = cli_json({"compute", "--pos", "1000001", "--bits", "256", "--formula", "bbp16", "--jobs", "9"});
  CHECK(a["hex"] == b["hex"]);
  CHECK(a["hex"] == c["hex"]);
  CHECK(b["jobs"] == 40);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"compute"}).code == 1);
  CHECK(run({"compute", "--pos", "0"}).code == 1);
  CHECK(run({"compute", "--pos", "5", "--formula", "machin"}).code == 1);
  CHECK(run({"compute", "--pos", "5", "--map-slots", "0", "--reduce-slots", "0"}).code == 1);
  CHECK(run({"compute", "--pos", "5", "--threshold", "9"}).code == 1);
  CHECK(run({"verify", "--pos", "4"}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("PIBITS_") != std::string::npos);
  const auto sub_help = run({"compute", "--help"});
  CHECK(sub_help.code == 0);
  for (const char* flag : {"--pos", "--bits", "--formula", "--guard", "--map-slots", "--reduce-slots", "--jobs",
                           "--terms-per-thread", "--ckpt-dir", "--json", "--seed", "PIBITS_POS"}) {
    CHECK(sub_help.out.find(flag) != std::string::npos);
  }
  CHECK(sub_help.out.find("--stop-after-jobs") == std::string::npos);
}

TEST_CASE("environment overrides") {
  ::setenv("PIBITS_POS", "9", 1);
  ::setenv("PIBITS_BITS", "8", 1);
  const auto r = run({"compute"});
  ::unsetenv("PIBITS_POS");
  ::unsetenv("PIBITS_BITS");
  CHECK(r.code == 0);
  CHECK(r.out.find("hex        3F\n") != std::string::npos);
}

TEST_CASE("storage failure exits 2") {
  TempDir dir;
  fs::create_directories(dir.path);
  std::ofstream(dir.path / "file") << "x";
  const auto r = run({"compute", "--pos", "9", "--bits", "8", "--ckpt-dir", (dir.path / "file" / "ckpt").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("storage") != std::string::npos);
}

TEST_CASE("verify reports agreement and exits 3 on an injected flip") {
  auto r = run({"verify", "--pos", "9", "--bits", "64"});
  CHECK(r.code == 0);
  CHECK(r.out.find("verified hex   3F") != std::string::npos);

  const auto j = cli_json({"verify", "--pos", "100001", "--bits", "256"});
  CHECK(j["agrees"] == true);
  CHECK(j["verified_bits"] == 252);
  CHECK(j["first_disagreement"].is_null());

  r = run({"verify", "--pos", "100001", "--bits", "256", "--inject-flip", "100"});
  CHECK(r.code == 3);
  CHECK(r.out.find("DISAGREEMENT   at position 100,096") != std::string::npos);
  // A flip in the part the overlap does not cover is harmless.
  CHECK(run({"verify", "--pos", "100001", "--bits", "256", "--inject-flip", "2"}).code == 0);
}

TEST_CASE("estimate prints the confidence table") {
  auto r = run({"estimate", "--pos", "1000000000000001", "--precision", "52"});
  CHECK(r.code == 0);
  CHECK(r.out.find("  29     72.79%") != std::string::npos);
  CHECK(r.out.find("  28     97.20%") != std::string::npos);
  r = run({"estimate", "--pos", "1000001", "--precision", "4096", "--bound", "64"});
  CHECK(r.code == 0);
  std::size_t rows = 0;
  for (std::size_t at = 0; (at = r.out.find("100.00%", at)) != std::string::npos; ++at) ++rows;
  CHECK(rows == 7);
  const auto j = cli_json({"estimate", "--pos", "1000000000000001", "--precision", "52"});
  CHECK(j["rows"].size() == 7);
}

TEST_CASE("interrupted compute resumes to the control output") {
  TempDir dir;
  const std::string d = dir.path.string();
  const auto control = cli_json({"compute", "--pos", "300001", "--bits", "256"});
  auto r = run({"compute", "--pos", "300001", "--bits", "256", "--jobs", "20", "--ckpt-dir", d, "--stop-after-jobs", "8"});
  CHECK(r.code == 130);
  CHECK(r.err.find("resume --ckpt-dir") != std::string::npos);
  CHECK(job_files(dir.path) >= 8);

  CHECK(run({"resume", "--ckpt-dir", d, "--pos", "300002"}).code == 1);
  CHECK(run({"resume", "--ckpt-dir", d, "--formula", "bbp16"}).code == 1);
  CHECK(run({"resume", "--ckpt-dir", d, "--jobs", "21"}).code == 1);
  CHECK(run({"compute", "--pos", "300001", "--bits", "512", "--ckpt-dir", d}).code == 1);

  auto resumed = cli_json({"resume", "--ckpt-dir", d, "--pos", "300001"});
  CHECK(resumed["hex"] == control["hex"]);
  CHECK(resumed["jobs_restored"].get<int>() >= 8);

  // Resuming a finished run recomputes nothing.
  resumed = cli_json({"resume", "--ckpt-dir", d});
  CHECK(resumed["hex"] == control["hex"]);
  CHECK(resumed["jobs_restored"] == 20);

  CHECK(run({"resume", "--ckpt-dir", (dir.path / "missing").string()}).code == 1);
  CHECK(run({"resume"}).code == 1);
}

TEST_CASE("SIGKILL mid-run then resume gives identical hex") {
  TempDir dir;
  const std::string d = dir.path.string();
  const std::vector<std::string> args{"compute",      "--pos",  "4000001", "--bits", "256", "--jobs", "120",
                                      "--map-slots",  "1",      "--reduce-slots", "0",   "--ckpt-dir", d};
  const pid_t pid = spawn(args);
  const bool alive = wait_for_jobs(pid, dir.path, 10);
  if (alive) {
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    CHECK(WIFSIGNALED(status));
  }
  const auto done = job_files(dir.path);
  MESSAGE("jobs persisted before the kill: " << done);
  CHECK(done < 120);
  for (const auto& e : fs::directory_iterator(dir.path)) {
    if (e.path().extension() == ".sum") {
      std::ifstream in(e.path());
      std::string first;
      std::getline(in, first);
      CHECK(first.starts_with("slice=bellard:"));
    }
  }
  const auto resumed = cli_json({"resume", "--ckpt-dir", d});
  const auto control = cli_json({"compute", "--pos", "4000001", "--bits", "256"});
  CHECK(resumed["hex"] == control["hex"]);
  CHECK(resumed["jobs_restored"].get<std::size_t>() >= done);
}

TEST_CASE("SIGINT stops cleanly with exit 130 and keeps finished jobs") {
  TempDir dir;
  const std::string d = dir.path.string();
  const pid_t pid = spawn({"compute", "--pos", "4000001", "--bits", "256", "--jobs", "120", "--map-slots", "1",
                           "--reduce-slots", "0", "--ckpt-dir", d});
  REQUIRE(wait_for_jobs(pid, dir.path, 5));
  ::kill(pid, SIGINT);
  int status = 0;
  ::waitpid(pid, &status, 0);
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 130);
  const auto done = job_files(dir.path);
  CHECK(done >= 5);
  CHECK(done < 120);
  const auto resumed = cli_json({"resume", "--ckpt-dir", d});
  CHECK(resumed["jobs_restored"].get<std::size_t>() == done);
  CHECK(resumed["hex"] == cli_json({"compute", "--pos", "4000001", "--bits", "256"})["hex"]);
}
