#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spikecode {

struct FileDigest {
  std::string path;
  std::string sha256;  // lowercase hex
};

/// Provenance record stored next to every CLI output.
struct RunManifest {
  std::string subcommand;
  std::string version;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> parameters;  // option name -> value, in declaration order
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
};

/// Hex SHA-256 of a file's bytes. Throws IoError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

FileDigest digest_of(const std::filesystem::path& path);

/// `<output>.manifest.json`
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace spikecode
