#include "spikecode/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "spikecode/errors.hpp"

namespace spikecode {

using nlohmann::json;

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw IoError("failed reading " + path.string());
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

FileDigest digest_of(const std::filesystem::path& path) { return {path.string(), sha256_file(path)}; }

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return output.string() + ".manifest.json";
}

namespace {

json digests_to_json(const std::vector<FileDigest>& files) {
  json a = json::array();
  for (const auto& f : files) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return a;
}

std::vector<FileDigest> digests_from_json(const json& a) {
  std::vector<FileDigest> out;
  for (const auto& f : a) out.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
  json params = json::array();
  for (const auto& [k, v] : m.parameters) params.push_back({k, v});
  json doc = {{"subcommand", m.subcommand},
              {"version", m.version},
              {"seed", m.seed ? json(*m.seed) : json(nullptr)},
              {"parameters", params},
              {"inputs", digests_to_json(m.inputs)},
              {"outputs", digests_to_json(m.outputs)}};
  return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    RunManifest m;
    m.subcommand = doc.at("subcommand").get<std::string>();
    m.version = doc.at("version").get<std::string>();
    if (!doc.at("seed").is_null()) m.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& p : doc.at("parameters")) m.parameters.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    m.inputs = digests_from_json(doc.at("inputs"));
    m.outputs = digests_from_json(doc.at("outputs"));
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest_to_json(m);
  if (!out) throw IoError("failed writing " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return manifest_from_json(s.str());
}

}  // namespace spikecode
