#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "mtocs/domain.hpp"

namespace mtocs::storage {

/// Image keys are visit-scoped only: "<visit id>-<L|R>-<n>".
bool valid_object_key(std::string_view key) noexcept;
/// Throws Error(KeyPolicyViolation) for anything valid_object_key rejects.
void check_object_key(std::string_view key);

/// Blob store for retinal images. get() throws Error(NotFound) for an
/// unknown key; transport or disk failures raise Error(BackendUnavailable).
class ObjectStore {
 public:
  virtual ~ObjectStore() = default;
  virtual std::string get(std::string_view key) = 0;
  virtual void put(std::string_view key, std::string_view bytes) = 0;
  virtual bool exists(std::string_view key) = 0;
};

/// One file per key under a root directory.
class FilesystemObjectStore final : public ObjectStore {
 public:
  explicit FilesystemObjectStore(std::filesystem::path root);

  std::string get(std::string_view key) override;
  void put(std::string_view key, std::string_view bytes) override;
  bool exists(std::string_view key) override;

 private:
  std::filesystem::path root_;
};

/// Remote backend speaking plain HTTP verbs on "<base>/objects/<prefix>/<key>":
/// PUT stores, GET fetches, HEAD probes. An optional bearer credential is sent
/// with every request.
class HttpObjectStore final : public ObjectStore {
 public:
  HttpObjectStore(std::string base_url, std::string prefix, std::optional<std::string> credential = std::nullopt);
  ~HttpObjectStore() override;

  std::string get(std::string_view key) override;
  void put(std::string_view key, std::string_view bytes) override;
  bool exists(std::string_view key) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Hands out one store per organization so equal visit ids of different
/// organizations never share a blob.
class ObjectStoreProvider {
 public:
  using Factory = std::function<std::unique_ptr<ObjectStore>(const OrganizationId&)>;

  explicit ObjectStoreProvider(Factory factory) : factory_(std::move(factory)) {}

  ObjectStore& for_organization(const OrganizationId& org);

 private:
  Factory factory_;
  std::mutex mutex_;
  std::map<OrganizationId, std::unique_ptr<ObjectStore>> stores_;
};

/// <root>/<organization>/<key>
std::unique_ptr<ObjectStoreProvider> filesystem_provider(std::filesystem::path root);
/// <base>/objects/<organization>/<key>
std::unique_ptr<ObjectStoreProvider> http_provider(std::string base_url,
                                                   std::optional<std::string> credential = std::nullopt);

}  // namespace mtocs::storage
