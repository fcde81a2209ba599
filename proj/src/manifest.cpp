#include "icdpipe/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icdpipe/errors.hpp"
#include "icdpipe/hashing.hpp"

namespace icdpipe {

using nlohmann::json;

std::string RunManifest::to_json() const {
  json j{{"command", command},
         {"config_hash", config_hash},
         {"input_hashes", input_hashes},
         {"tool_version", tool_version},
         {"timestamp_utc", timestamp_utc},
         {"seeds", seeds}};
  return j.dump(2);
}

std::string hash_bytes(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return hash_bytes(buffer.str());
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

void write_manifest(const RunManifest& manifest,
                    const std::string& output_path) {
  write_file_atomic(output_path + ".manifest.json", manifest.to_json() + "\n");
}

}  // namespace icdpipe
