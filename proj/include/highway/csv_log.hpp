#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "highway/agent.hpp"
#include "highway/highway_env.hpp"

namespace highway::harness {

// FNV-1a over the canonical config serialization; stamped into every CSV.
std::uint64_t fnv1a(const std::string& text);

// One row per vehicle per controller tick. Ego-only columns are blank for
// traffic rows.
class TrajectoryLogger {
  public:
    TrajectoryLogger(const std::string& path, std::uint64_t config_hash);

    void log(const env::Environment& env, const agent::TickRecord& rec);
    bool ok() const { return static_cast<bool>(file_); }

  private:
    std::ofstream file_;
};

class MetricsLogger {
  public:
    MetricsLogger(const std::string& path, std::uint64_t config_hash,
                  const std::string& header);
    void row(const std::string& line) { file_ << line << '\n'; }
    bool ok() const { return static_cast<bool>(file_); }

  private:
    std::ofstream file_;
};

}  // namespace highway::harness
