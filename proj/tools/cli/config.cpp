#include "config.hpp"

#include <fstream>
#include <sstream>

#include "ddsd/error.hpp"

namespace ddsd::cli {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_flat_config(const std::string& text,
                                                                   const std::string& context) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    std::string key = eq == std::string::npos ? std::string() : trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) {
      throw UsageError(context + ":" + std::to_string(n) + ": expected key=value, got '" + line + "'");
    }
    entries.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return entries;
}

std::vector<std::pair<std::string, std::string>> read_flat_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_flat_config(text.str(), path.string());
}

std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> config_files;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      config_files.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_files.push_back(args[i].substr(9));
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_files.empty()) return rest;
  if (rest.empty() || rest[0].rfind("-", 0) == 0) throw UsageError("--config must follow a command");
  std::vector<std::string> out{rest[0]};
  for (const auto& file : config_files) {
    for (const auto& [key, value] : read_flat_config(file)) out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

}  // namespace ddsd::cli
