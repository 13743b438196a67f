#pragma once

// Per-run reproducibility record written next to a command's outputs.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace swm {

/// Git blob id of `content`: sha1("blob <size>\0" + content), lowercase hex.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::string& path);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;  // resolved settings
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> blob hash
  std::vector<std::string> outputs;

  void add_input(const std::string& path);
  std::string to_json() const;
  void write(const std::string& path) const;
};

}  // namespace swm
