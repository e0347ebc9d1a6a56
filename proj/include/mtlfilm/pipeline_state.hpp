#pragma once

// Resumable pipeline bookkeeping: a JSON file recording which stages have
// completed, the content hashes of their inputs, and the seeds they used.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtlfilm/crypto.hpp"
#include "mtlfilm/error.hpp"

namespace mtlfilm::ingest {

inline constexpr int kStateVersion = 1;

/// Exclusive advisory lock held for the lifetime of the object.
class StateLock {
 public:
  explicit StateLock(const std::string& state_path) {
    const auto lock_path = state_path + ".lock";
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    require(fd_ >= 0, "cannot open lock file " + lock_path, ErrorCode::kIo);
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::kIo, "cannot lock " + lock_path);
    }
  }
  ~StateLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  StateLock(const StateLock&) = delete;
  StateLock& operator=(const StateLock&) = delete;

 private:
  int fd_ = -1;
};

struct StageRecord {
  bool complete = false;
  std::map<std::string, std::string> input_hashes;  // path -> sha256
};

class PipelineState {
 public:
  /// Hashes every input and marks the stage complete.
  void mark_complete(const std::string& stage, const std::vector<std::string>& inputs) {
    StageRecord rec;
    rec.complete = true;
    for (const auto& path : inputs) rec.input_hashes[path] = crypto::file_sha256(path);
    stages_[stage] = std::move(rec);
  }

  void register_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  const std::map<std::string, std::uint64_t>& seeds() const { return seeds_; }

  /// A stage is fresh when it completed and every recorded input still hashes
  /// to the same value.
  bool is_fresh(const std::string& stage) const {
    const auto it = stages_.find(stage);
    if (it == stages_.end() || !it->second.complete) return false;
    for (const auto& [path, hash] : it->second.input_hashes) {
      if (!std::filesystem::exists(path) || crypto::file_sha256(path) != hash) return false;
    }
    return true;
  }

  std::vector<std::string> stale_stages(const std::vector<std::string>& stages) const {
    std::vector<std::string> stale;
    for (const auto& s : stages) {
      if (!is_fresh(s)) stale.push_back(s);
    }
    return stale;
  }

  nlohmann::json to_json() const {
    nlohmann::json stages = nlohmann::json::object();
    for (const auto& [name, rec] : stages_) {
      stages[name] = {{"complete", rec.complete}, {"inputs", rec.input_hashes}};
    }
    nlohmann::json body{{"version", kStateVersion}, {"stages", stages}, {"seeds", seeds_}};
    body["checksum"] = crypto::sha256_hex(body.dump());
    return body;
  }

  static PipelineState from_json(nlohmann::json j) {
    require(j.is_object() && j.contains("checksum") && j.contains("version"),
            "state file lacks version/checksum", ErrorCode::kCorruptState);
    const auto checksum = j["checksum"].get<std::string>();
    j.erase("checksum");
    require(crypto::sha256_hex(j.dump()) == checksum, "state checksum mismatch",
            ErrorCode::kCorruptState);
    require(j["version"].get<int>() == kStateVersion, "unsupported state version",
            ErrorCode::kCorruptState);
    PipelineState s;
    for (const auto& [name, rec] : j.at("stages").items()) {
      StageRecord r;
      r.complete = rec.at("complete").get<bool>();
      r.input_hashes = rec.at("inputs").get<std::map<std::string, std::string>>();
      s.stages_[name] = std::move(r);
    }
    s.seeds_ = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    return s;
  }

  void save(const std::string& path) const {
    StateLock lock(path);
    const auto tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      require(static_cast<bool>(out), "cannot write " + tmp, ErrorCode::kIo);
      out << to_json().dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
  }

  /// A missing file yields an empty state (every stage stale).
  static PipelineState load(const std::string& path) {
    if (!std::filesystem::exists(path)) return {};
    StateLock lock(path);
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot read " + path, ErrorCode::kIo);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kCorruptState, e.what());
    }
  }

 private:
  std::map<std::string, StageRecord> stages_;
  std::map<std::string, std::uint64_t> seeds_;
};

}  // namespace mtlfilm::ingest
