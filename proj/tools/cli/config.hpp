#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ddsd::cli {

// Flat `key = value` file. Blank lines and lines starting with '#' are
// skipped; a leading "--" on the key is accepted. Throws UsageError with the
// file and line on malformed input.
std::vector<std::pair<std::string, std::string>> parse_flat_config(const std::string& text,
                                                                   const std::string& context);
std::vector<std::pair<std::string, std::string>> read_flat_config(const std::filesystem::path& path);

// Removes `--config FILE` / `--config=FILE` from args (args[0] is the
// subcommand) and splices the file's entries in as `--key=value` directly
// after the subcommand, so flags given on the command line win.
std::vector<std::string> expand_config(std::vector<std::string> args);

}  // namespace ddsd::cli
