#include "fetal/run_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

#include "fetal/domain.hpp"
#include "fetal/errors.hpp"

namespace fetal {

namespace {

std::string random_hex(std::size_t n) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += kHex[rng() & 15];
  return s;
}

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void write_new_file(const std::filesystem::path& p, const std::string& content) {
  if (std::filesystem::exists(p)) throw Error("refusing to overwrite " + p.string());
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + p.string());
}

// Exclusive lock on root/index.lock, shared with other processes.
class IndexLock {
 public:
  explicit IndexLock(const std::filesystem::path& root) {
    fd_ = ::open((root / "index.lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open run index lock");
    while (::flock(fd_, LOCK_EX) != 0)
      if (errno != EINTR) throw Error("cannot lock run index");
  }
  ~IndexLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  IndexLock(const IndexLock&) = delete;
  IndexLock& operator=(const IndexLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) { std::filesystem::create_directories(root_); }

bool RunStore::valid_run_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

std::string RunStore::create_run() {
  for (;;) {
    const std::string id = "run-" + utc_stamp() + "-" + random_hex(8);
    if (std::filesystem::create_directory(root_ / id)) return id;
  }
}

void RunStore::write(const std::string& run_id, const nlohmann::json& record, const std::string& report_json,
                     const std::string& report_md) {
  if (!valid_run_id(run_id)) throw ValidationError("invalid run id '" + run_id + "'");
  const auto dir = root_ / run_id;
  std::filesystem::create_directories(dir);
  write_new_file(dir / "report.json", report_json);
  write_new_file(dir / "report.md", report_md);
  write_new_file(dir / "record.json", canonical_json(record) + "\n");

  std::lock_guard guard(mu_);
  IndexLock lock(root_);
  auto idx = index();
  idx.push_back({{"run_id", run_id}, {"kind", record.value("kind", "")}, {"created_at", record.value("created_at", "")}});
  const auto tmp = root_ / ("index.json.tmp-" + random_hex(8));
  {
    std::ofstream out(tmp, std::ios::binary);
    out << idx.dump(1) << "\n";
    if (!out) throw Error("cannot write run index");
  }
  std::filesystem::rename(tmp, root_ / "index.json");
}

std::optional<nlohmann::json> RunStore::load(const std::string& run_id) const {
  if (!valid_run_id(run_id)) return std::nullopt;
  std::ifstream in(root_ / run_id / "record.json");
  if (!in) return std::nullopt;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

nlohmann::json RunStore::index() const {
  std::ifstream in(root_ / "index.json");
  if (!in) return nlohmann::json::array();
  auto j = nlohmann::json::parse(in, nullptr, false);
  return j.is_array() ? j : nlohmann::json::array();
}

}  // namespace fetal
