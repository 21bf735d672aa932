#include "cgnn/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "cgnn/errors.hpp"
#include "json.hpp"

namespace cgnn {

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string build_identifier() {
  return std::string("cgnn-") + __DATE__ + "-" + __TIME__;
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["build_id"] = build_id;
  j["started_at"] = started_at;
  j["outputs"] = outputs;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace cgnn
