#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace faultbin {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitParse = 2, kExitValidation = 3, kExitIo = 4, kExitInternal = 5 };

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

/// A fully resolved command: every parameter explicit. The output directory
/// and thread count are not part of it, so a manifest reproduces the same
/// bytes wherever and however it is re-run.
struct RunManifest {
  std::string command;  // e.g. "gen", "array build"
  nlohmann::json params;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& doc);

std::vector<std::string> command_names();

/// Defaults of a command, completed by `overrides` (config file or flag
/// values); unknown keys and type mismatches throw CliError.
nlohmann::json resolve_params(const std::string& command, const nlohmann::json& overrides);

/// Runs the command, writing its outputs and manifest.json into `out`.
/// Returns the names of the files written.
std::vector<std::string> execute(const RunManifest& m, const std::filesystem::path& out, int threads);

/// Parses argv, runs the command and maps failures to exit codes.
int cli_main(int argc, char** argv);

}  // namespace faultbin
