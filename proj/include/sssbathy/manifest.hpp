#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/error.hpp"

namespace sssbathy {

/// A declared input no longer matches the hash recorded by its producer.
class HashMismatchError : public IoError {
 public:
  using IoError::IoError;
};

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Provenance record written next to every artifact set.
///   command   subcommand name
///   argv      full command line
///   seed      master seed
///   config    config snapshot (after overrides)
///   inputs    file -> sha256 of everything read
///   outputs   file name (relative to the manifest) -> sha256
struct Manifest {
  std::string tool_version;
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  nlohmann::json results = nlohmann::json::object();

  void add_input(const std::filesystem::path& path);
  /// Hashes every regular file under `dir` except the manifest itself.
  void add_outputs(const std::filesystem::path& dir);

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

inline constexpr const char* kManifestName = "manifest.json";

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& dir);

/// Checks `dir`/`relative` against the output hash recorded in the manifest
/// of `dir`. Directories without a manifest pass; an undeclared file or one
/// whose bytes changed throws HashMismatchError.
void verify_declared(const std::filesystem::path& dir, const std::filesystem::path& relative);

/// Verifies every output declared by the manifest of `dir` and returns the
/// absolute path -> hash map (empty when `dir` has no manifest).
std::map<std::string, std::string> verify_directory(const std::filesystem::path& dir);

}  // namespace sssbathy
