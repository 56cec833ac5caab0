#include "sssbathy/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace sssbathy {

namespace {

struct DigestContext {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  DigestContext() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), data, n) != 1) throw IoError("sha256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw IoError("sha256 final failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 0xf]);
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  DigestContext d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  DigestContext d;
  std::array<char, 1 << 16> buf{};
  while (is) {
    is.read(buf.data(), buf.size());
    if (is.gcount() > 0) d.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return d.hex();
}

void Manifest::add_input(const std::filesystem::path& path) {
  inputs[std::filesystem::absolute(path).lexically_normal().string()] = sha256_file(path);
}

void Manifest::add_outputs(const std::filesystem::path& dir) {
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir);
    if (rel == kManifestName) continue;
    outputs[rel.generic_string()] = sha256_file(e.path());
  }
}

nlohmann::json Manifest::to_json() const {
  return {{"format", "sssbathy-manifest"},
          {"version", 1},
          {"tool_version", tool_version},
          {"command", command},
          {"argv", argv},
          {"seed", seed},
          {"config", config},
          {"inputs", inputs},
          {"outputs", outputs},
          {"results", results}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "sssbathy-manifest") throw IoError("not a manifest");
  Manifest m;
  try {
    m.tool_version = j.value("tool_version", "");
    m.command = j.at("command").get<std::string>();
    m.argv = j.value("argv", std::vector<std::string>{});
    m.seed = j.value("seed", std::uint64_t{0});
    m.config = j.value("config", nlohmann::json::object());
    m.inputs = j.value("inputs", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.results = j.value("results", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  std::ofstream os(dir / kManifestName, std::ios::trunc);
  if (!os) throw IoError("cannot write " + (dir / kManifestName).string());
  os << m.to_json().dump(1) << '\n';
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / kManifestName);
  if (!is) throw IoError("cannot read " + (dir / kManifestName).string());
  try {
    return Manifest::from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed manifest " + (dir / kManifestName).string());
  }
}

void verify_declared(const std::filesystem::path& dir, const std::filesystem::path& relative) {
  if (!std::filesystem::exists(dir / kManifestName)) return;
  const Manifest m = read_manifest(dir);
  const auto file = dir / relative;
  const auto it = m.outputs.find(relative.generic_string());
  if (it == m.outputs.end()) {
    throw HashMismatchError(file.string() + " is not declared in " + (dir / kManifestName).string());
  }
  if (sha256_file(file) != it->second) {
    throw HashMismatchError("hash mismatch on " + file.string() + " (changed since '" + m.command + "' wrote it)");
  }
}

std::map<std::string, std::string> verify_directory(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  if (!std::filesystem::exists(dir / kManifestName)) return out;
  const Manifest m = read_manifest(dir);
  for (const auto& [rel, hash] : m.outputs) {
    const auto file = dir / rel;
    if (!std::filesystem::exists(file)) throw IoError("missing input " + file.string());
    if (sha256_file(file) != hash) {
      throw HashMismatchError("hash mismatch on " + file.string() + " (changed since '" + m.command + "' wrote it)");
    }
    out[std::filesystem::absolute(file).lexically_normal().string()] = hash;
  }
  return out;
}

}  // namespace sssbathy
