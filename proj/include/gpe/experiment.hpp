#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

namespace gpe {

inline constexpr const char* kCodeVersion = "0.1.0";
/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "GPE_OUTPUT_ROOT";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitDiverged = 3,
  kExitAssertion = 4,
};

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  /// Structured log sink, one JSON object per line.
  std::ostream* log = nullptr;
};

/// Parses and validates the config, runs the experiment and writes its outputs
/// followed by manifest.json. Config errors exit before anything is written.
int run_experiment(const RunOptions& options);

/// FNV-1a 64-bit hash of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace gpe
