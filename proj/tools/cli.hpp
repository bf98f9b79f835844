#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ahocda/trainer.hpp"

namespace ahocda::cli {

/// Exit codes of the ahocda binary.
enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Fully resolved settings of one invocation.
struct Settings {
    trainer::TrainConfig train;
    std::filesystem::path data_dir = "data";
    std::filesystem::path out_dir = "out";
    /// Square side of generated scenes.
    int image_size = 64;
    std::optional<std::filesystem::path> resume;
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> curriculum;
    std::optional<long> stop_after;
    bool inject_gradient_fault = false;
    std::string command;
};

/// Parses a command line (argv[0] included). Config-file values sit between
/// the defaults and explicit flags. Throws ParameterError on bad input.
Settings parse(const std::vector<std::string>& args);

/// Settings from a config file alone, as `--config <path>` would give.
Settings load_config(const std::filesystem::path& path);

/// key = value text that `--config` reads back to the same settings.
std::string render(const Settings& settings);

/// Runs the parsed command and returns its exit code. Errors propagate.
int execute(const Settings& settings);

/// Entry point: parse, execute, map exceptions to exit codes.
int main(int argc, char** argv);

}  // namespace ahocda::cli
