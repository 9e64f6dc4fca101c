#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace mtocs::api {

/// Service configuration: a JSON file overlaid with environment variables.
///
/// File keys: addr, tls_cert, tls_key, dev_plaintext, database, templates_dir,
/// schema_path, session_ttl_hours, storage {kind, root, url, credential_env}.
/// Environment: ADDR, TLS_CERT, TLS_KEY, STORAGE_KIND, STORAGE_ROOT,
/// STORAGE_URL, STORAGE_CREDENTIAL_ENV, STORAGE_DATABASE, TEMPLATES_DIR,
/// SCHEMA_PATH, SESSION_TTL_HOURS.
struct Config {
  std::string host = "0.0.0.0";
  int port = 8443;
  std::optional<std::filesystem::path> tls_cert;
  std::optional<std::filesystem::path> tls_key;
  bool dev_plaintext = false;
  std::filesystem::path database = "mtocs.db";
  std::filesystem::path templates_dir;
  std::filesystem::path schema_path;
  std::chrono::seconds session_ttl = std::chrono::hours(12);
  std::string storage_kind = "filesystem";  // or "http"
  std::filesystem::path storage_root = "images";
  std::string storage_url;
  /// Name of the environment variable holding the remote store's bearer credential.
  std::string storage_credential_env;

  using Env = std::function<std::optional<std::string>(const char*)>;

  /// Reads `file` when given, then applies `env`. Throws Error(Validation)
  /// naming the offending key.
  static Config load(const std::optional<std::filesystem::path>& file, const Env& env);
  /// "host:port"; throws Error(Validation) on a bad port.
  void set_address(const std::string& addr);

  /// Environment lookup through getenv.
  static std::optional<std::string> process_env(const char* name);

  /// Rejects configurations the server cannot start with: no TLS material
  /// without dev_plaintext, unreadable certificate files, unknown storage kind.
  void check() const;
};

}  // namespace mtocs::api
