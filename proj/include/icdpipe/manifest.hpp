#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace icdpipe {

/// Reproducibility sidecar written next to every CLI output: the command,
/// a hash of the effective configuration, content hashes of the inputs,
/// tool version, wall-clock timestamp and the seeds in play.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::map<std::string, std::string> input_hashes;  // path -> fnv1a64 hex
  std::string tool_version;
  std::string timestamp_utc;
  std::map<std::string, std::uint64_t> seeds;

  std::string to_json() const;
};

/// FNV-1a 64 of a file's bytes, as 16 hex digits. Throws IoError.
std::string hash_file(const std::string& path);

std::string hash_bytes(std::string_view bytes);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

/// Write content to path atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

/// Write `<output_path>.manifest.json` atomically.
void write_manifest(const RunManifest& manifest,
                    const std::string& output_path);

}  // namespace icdpipe
