#include <httplib.h>

#include "mtocs/error.hpp"
#include "mtocs/storage/object_store.hpp"

namespace mtocs::storage {

struct HttpObjectStore::Impl {
  httplib::Client client;
  std::string prefix;
  httplib::Headers headers;

  Impl(const std::string& base, std::string p) : client(base), prefix(std::move(p)) {}

  std::string path(std::string_view key) const { return "/objects/" + prefix + "/" + std::string(key); }

  [[noreturn]] static void unavailable(const httplib::Result& res, std::string_view key) {
    std::string why = res ? "status " + std::to_string(res->status) : httplib::to_string(res.error());
    fail(ErrorCode::BackendUnavailable, "object store request for " + std::string(key) + " failed: " + why);
  }
};

HttpObjectStore::HttpObjectStore(std::string base_url, std::string prefix, std::optional<std::string> credential)
    : impl_(std::make_unique<Impl>(base_url, std::move(prefix))) {
  impl_->client.set_connection_timeout(5);
  impl_->client.set_read_timeout(30);
  if (credential) impl_->headers.emplace("Authorization", "Bearer " + *credential);
}

HttpObjectStore::~HttpObjectStore() = default;

std::string HttpObjectStore::get(std::string_view key) {
  check_object_key(key);
  auto res = impl_->client.Get(impl_->path(key), impl_->headers);
  if (res && res->status == 200) return res->body;
  if (res && res->status == 404) fail(ErrorCode::NotFound, "no object " + std::string(key));
  Impl::unavailable(res, key);
}

void HttpObjectStore::put(std::string_view key, std::string_view bytes) {
  check_object_key(key);
  auto res = impl_->client.Put(impl_->path(key), impl_->headers, bytes.data(), bytes.size(),
                               "application/octet-stream");
  if (res && (res->status == 200 || res->status == 201 || res->status == 204)) return;
  Impl::unavailable(res, key);
}

bool HttpObjectStore::exists(std::string_view key) {
  check_object_key(key);
  auto res = impl_->client.Head(impl_->path(key), impl_->headers);
  if (res && res->status == 200) return true;
  if (res && res->status == 404) return false;
  Impl::unavailable(res, key);
}

}  // namespace mtocs::storage
