// Copyright 2026 The BONN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command implementations behind the command-line runner. Each command takes
// a fully resolved JSON config, writes its artifacts into an output
// directory and reports progress on a stream.

#ifndef BONN_RUNNER_HPP
#define BONN_RUNNER_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace bonn {

/// Bad or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// "gen-data", "train", "evaluate", "experiment fidelity",
/// "experiment hw-fraction".
const std::vector<std::string>& command_names();

/// Every key a command accepts, with its default.
nlohmann::json default_config(std::string_view command);

/// Defaults, then the config file, then `key=value` overrides (values parse
/// as JSON, falling back to a plain string), then the seed flag. Unknown
/// keys and type mismatches raise ConfigError.
nlohmann::json resolve_config(std::string_view command,
                              const std::optional<std::filesystem::path>& config_file,
                              const std::vector<std::string>& overrides,
                              std::optional<std::uint64_t> seed);

/// Worker count from BONN_WORKERS (default 1).
int workers_from_env();

/// Runs a command with a resolved config; writes resolved_config.json
/// alongside the outputs.
void run_command(std::string_view command, const nlohmann::json& config,
                 const std::filesystem::path& out_dir, std::ostream& log);

/// Full entry point; returns the process exit code.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace bonn

#endif  // BONN_RUNNER_HPP
