#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cgnn {

// Written to <out>/manifest.json before any work begins; every file the
// command will produce is listed up front.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string build_id;
  std::string started_at;
  std::vector<std::string> outputs;

  void write(const std::string& path) const;
};

std::string current_timestamp();
std::string build_identifier();

}  // namespace cgnn
