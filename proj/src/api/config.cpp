#include "mtocs/api/config.hpp"

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "mtocs/error.hpp"

namespace mtocs::api {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void set_addr(Config& c, const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::Validation, "addr must be host:port", "addr");
  c.host = addr.substr(0, colon);
  try {
    std::size_t used = 0;
    c.port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1 || c.port < 0 || c.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    fail(ErrorCode::Validation, "addr has a bad port: " + addr, "addr");
  }
  if (c.host.empty()) c.host = "0.0.0.0";
}

void set_ttl(Config& c, double hours) {
  if (!(hours > 0)) fail(ErrorCode::Validation, "session_ttl_hours must be positive", "session_ttl_hours");
  c.session_ttl = std::chrono::seconds(static_cast<long long>(hours * 3600));
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::Validation, std::string("config key ") + key + " has the wrong type", key);
  }
}

}  // namespace

void Config::set_address(const std::string& addr) { set_addr(*this, addr); }

std::optional<std::string> Config::process_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v) return std::nullopt;
  return std::string(v);
}

Config Config::load(const std::optional<fs::path>& file, const Env& env) {
  Config c;
  if (file) {
    std::ifstream in(*file);
    if (!in) fail(ErrorCode::Validation, "cannot read config file " + file->string(), "config");
    const json j = json::parse(in, nullptr, false);
    if (!j.is_object()) fail(ErrorCode::Validation, "config file is not a JSON object", "config");
    if (j.contains("addr")) set_addr(c, get<std::string>(j, "addr"));
    if (j.contains("tls_cert")) c.tls_cert = get<std::string>(j, "tls_cert");
    if (j.contains("tls_key")) c.tls_key = get<std::string>(j, "tls_key");
    if (j.contains("dev_plaintext")) c.dev_plaintext = get<bool>(j, "dev_plaintext");
    if (j.contains("database")) c.database = get<std::string>(j, "database");
    if (j.contains("templates_dir")) c.templates_dir = get<std::string>(j, "templates_dir");
    if (j.contains("schema_path")) c.schema_path = get<std::string>(j, "schema_path");
    if (j.contains("session_ttl_hours")) set_ttl(c, get<double>(j, "session_ttl_hours"));
    if (j.contains("storage")) {
      const auto& s = j.at("storage");
      if (!s.is_object()) fail(ErrorCode::Validation, "storage must be an object", "storage");
      if (s.contains("kind")) c.storage_kind = get<std::string>(s, "kind");
      if (s.contains("root")) c.storage_root = get<std::string>(s, "root");
      if (s.contains("url")) c.storage_url = get<std::string>(s, "url");
      if (s.contains("credential_env")) c.storage_credential_env = get<std::string>(s, "credential_env");
    }
  }
  if (auto v = env("ADDR")) set_addr(c, *v);
  if (auto v = env("TLS_CERT")) c.tls_cert = *v;
  if (auto v = env("TLS_KEY")) c.tls_key = *v;
  if (auto v = env("STORAGE_KIND")) c.storage_kind = *v;
  if (auto v = env("STORAGE_ROOT")) c.storage_root = *v;
  if (auto v = env("STORAGE_URL")) c.storage_url = *v;
  if (auto v = env("STORAGE_CREDENTIAL_ENV")) c.storage_credential_env = *v;
  if (auto v = env("STORAGE_DATABASE")) c.database = *v;
  if (auto v = env("TEMPLATES_DIR")) c.templates_dir = *v;
  if (auto v = env("SCHEMA_PATH")) c.schema_path = *v;
  if (auto v = env("SESSION_TTL_HOURS")) {
    try {
      set_ttl(c, std::stod(*v));
    } catch (const std::invalid_argument&) {
      fail(ErrorCode::Validation, "SESSION_TTL_HOURS is not a number", "SESSION_TTL_HOURS");
    }
  }
  return c;
}

void Config::check() const {
  if (!dev_plaintext) {
    if (!tls_cert || !tls_key) {
      fail(ErrorCode::Validation, "TLS certificate and key are required unless dev_plaintext is set", "tls_cert");
    }
    for (const auto& [path, key] : {std::pair{*tls_cert, "tls_cert"}, std::pair{*tls_key, "tls_key"}}) {
      std::ifstream probe(path);
      if (!probe) fail(ErrorCode::Validation, "cannot read " + path.string(), key);
    }
  }
  if (storage_kind != "filesystem" && storage_kind != "http") {
    fail(ErrorCode::Validation, "storage kind must be filesystem or http", "storage.kind");
  }
  if (storage_kind == "http" && storage_url.empty()) {
    fail(ErrorCode::Validation, "storage url is required for the http backend", "storage.url");
  }
  if (templates_dir.empty()) fail(ErrorCode::Validation, "templates_dir is required", "templates_dir");
  if (schema_path.empty()) fail(ErrorCode::Validation, "schema_path is required", "schema_path");
}

}  // namespace mtocs::api
