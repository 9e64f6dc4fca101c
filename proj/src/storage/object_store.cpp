#include "mtocs/storage/object_store.hpp"

#include <fstream>
#include <regex>
#include <sstream>
#include <system_error>

#include "mtocs/error.hpp"

namespace mtocs::storage {

namespace fs = std::filesystem;

bool valid_object_key(std::string_view key) noexcept {
  static const std::regex grammar("^[A-Z]{3}[0-9]{6}-(L|R)-[0-9]+$");
  return std::regex_match(key.begin(), key.end(), grammar);
}

void check_object_key(std::string_view key) {
  if (!valid_object_key(key)) {
    fail(ErrorCode::KeyPolicyViolation, "object key '" + std::string(key) + "' is not <visit id>-<L|R>-<n>");
  }
}

FilesystemObjectStore::FilesystemObjectStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) fail(ErrorCode::BackendUnavailable, "cannot create image directory " + root_.string() + ": " + ec.message());
}

std::string FilesystemObjectStore::get(std::string_view key) {
  check_object_key(key);
  std::ifstream in(root_ / std::string(key), std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "no object " + std::string(key));
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void FilesystemObjectStore::put(std::string_view key, std::string_view bytes) {
  check_object_key(key);
  const auto target = root_ / std::string(key);
  auto tmp = target;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::BackendUnavailable, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorCode::BackendUnavailable, "cannot store " + target.string() + ": " + ec.message());
}

bool FilesystemObjectStore::exists(std::string_view key) {
  check_object_key(key);
  std::error_code ec;
  return fs::is_regular_file(root_ / std::string(key), ec);
}

ObjectStore& ObjectStoreProvider::for_organization(const OrganizationId& org) {
  std::lock_guard lock(mutex_);
  auto& slot = stores_[org];
  if (!slot) slot = factory_(org);
  return *slot;
}

std::unique_ptr<ObjectStoreProvider> filesystem_provider(fs::path root) {
  return std::make_unique<ObjectStoreProvider>([root = std::move(root)](const OrganizationId& org) {
    return std::make_unique<FilesystemObjectStore>(root / org.str());
  });
}

std::unique_ptr<ObjectStoreProvider> http_provider(std::string base_url, std::optional<std::string> credential) {
  return std::make_unique<ObjectStoreProvider>(
      [base_url = std::move(base_url), credential = std::move(credential)](const OrganizationId& org) {
        return std::make_unique<HttpObjectStore>(base_url, org.str(), credential);
      });
}

}  // namespace mtocs::storage
