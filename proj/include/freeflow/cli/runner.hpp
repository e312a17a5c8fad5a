#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "freeflow/cli/config.hpp"

namespace freeflow::cli {

struct OutputFile {
    std::string file;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes;
};

struct RunManifest {
    std::map<std::string, std::string> config;
    std::string library_version;
    double wall_clock_seconds = 0.0;
    std::vector<OutputFile> outputs;

    std::string to_json() const;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

// Runs the configured pipeline, writing every artifact into
// cfg.output_dir and manifest.json last. Errors are rethrown with the
// failing stage name prefixed and keep their type (ConfigError,
// NumericalError, DomainError); files written by the failed run are
// removed.
RunManifest run(const ExperimentConfig& cfg);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

}  // namespace freeflow::cli
