#include <gtest/gtest.h>
#include <httplib.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "mtocs/error.hpp"
#include "mtocs/storage/object_store.hpp"
#include "support.hpp"

using namespace mtocs;
using namespace mtocs::storage;
using testing_support::TempDir;

namespace {

/// Minimal blob service: PUT/GET/HEAD on /objects/<prefix>/<key>, bearer-checked.
class FakeBlobServer {
 public:
  explicit FakeBlobServer(std::string credential = "s3cret") : credential_(std::move(credential)) {
    auto authorized = [this](const httplib::Request& req, httplib::Response& res) {
      if (req.get_header_value("Authorization") != "Bearer " + credential_) {
        res.status = 401;
        return false;
      }
      return true;
    };
    server_.Put(R"(/objects/(.+))", [this, authorized](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      std::lock_guard lock(mutex_);
      paths_.push_back(req.path);
      blobs_[req.matches[1]] = req.body;
      res.status = 201;
    });
    server_.Get(R"(/objects/(.+))", [this, authorized](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      std::lock_guard lock(mutex_);
      auto it = blobs_.find(req.matches[1]);
      if (it == blobs_.end()) {
        res.status = 404;
        return;
      }
      res.set_content(it->second, "application/octet-stream");
    });
    server_.set_error_handler([](const httplib::Request&, httplib::Response&) {});
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeBlobServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::vector<std::string> paths() {
    std::lock_guard lock(mutex_);
    return paths_;
  }

 private:
  std::string credential_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mutex_;
  std::map<std::string, std::string> blobs_;
  std::vector<std::string> paths_;
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

/// Behaviour every adapter must share.
void run_contract(ObjectStoreProvider& provider) {
  auto& a = provider.for_organization(OrganizationId("org-a"));
  auto& b = provider.for_organization(OrganizationId("org-b"));
  EXPECT_EQ(&a, &provider.for_organization(OrganizationId("org-a")));

  std::string bytes(256, '\0');
  for (int i = 0; i < 256; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>(i);

  EXPECT_FALSE(a.exists("AAA001001-L-1"));
  EXPECT_EQ(code_of([&] { a.get("AAA001001-L-1"); }), ErrorCode::NotFound);
  a.put("AAA001001-L-1", bytes);
  EXPECT_TRUE(a.exists("AAA001001-L-1"));
  EXPECT_EQ(a.get("AAA001001-L-1"), bytes);

  // Same key, other organization: separate blob.
  EXPECT_FALSE(b.exists("AAA001001-L-1"));
  b.put("AAA001001-L-1", "other");
  EXPECT_EQ(a.get("AAA001001-L-1"), bytes);
  EXPECT_EQ(b.get("AAA001001-L-1"), "other");

  a.put("AAA001001-L-1", "replaced");
  EXPECT_EQ(a.get("AAA001001-L-1"), "replaced");

  for (const char* bad : {"Ana Garcia.jpg", "AAA001001-X-1", "../AAA001001-L-1", "AAA001-L-1", "aaa001001-L-1",
                          "AAA001001-L-1/../../x", ""}) {
    EXPECT_EQ(code_of([&] { a.put(bad, "x"); }), ErrorCode::KeyPolicyViolation) << bad;
    EXPECT_EQ(code_of([&] { a.get(bad); }), ErrorCode::KeyPolicyViolation) << bad;
    EXPECT_EQ(code_of([&] { a.exists(bad); }), ErrorCode::KeyPolicyViolation) << bad;
  }
}

}  // namespace

TEST(ObjectKey, Grammar) {
  EXPECT_TRUE(valid_object_key("AAA001001-L-1"));
  EXPECT_TRUE(valid_object_key("ZZZ999999-R-12"));
  EXPECT_FALSE(valid_object_key("AAA001001-L-"));
  EXPECT_FALSE(valid_object_key("AAA001001-l-1"));
}

TEST(FilesystemObjectStore, Contract) {
  TempDir dir;
  auto provider = filesystem_provider(dir.path() / "images");
  run_contract(*provider);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "images" / "org-a" / "AAA001001-L-1"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "images" / "org-b" / "AAA001001-L-1"));
}

TEST(FilesystemObjectStore, UnwritableRootIsUnavailable) {
  TempDir dir;
  std::ofstream(dir.path() / "file") << "x";
  EXPECT_EQ(code_of([&] { FilesystemObjectStore(dir.path() / "file" / "sub"); }), ErrorCode::BackendUnavailable);
}

TEST(HttpObjectStore, Contract) {
  FakeBlobServer server;
  auto provider = http_provider(server.url(), "s3cret");
  run_contract(*provider);
  for (const auto& p : server.paths()) {
    EXPECT_TRUE(p.rfind("/objects/org-a/", 0) == 0 || p.rfind("/objects/org-b/", 0) == 0) << p;
  }
}

TEST(HttpObjectStore, WrongCredentialIsUnavailable) {
  FakeBlobServer server;
  HttpObjectStore store(server.url(), "org-a", std::string("wrong"));
  EXPECT_EQ(code_of([&] { store.put("AAA001001-L-1", "x"); }), ErrorCode::BackendUnavailable);
  EXPECT_EQ(code_of([&] { store.exists("AAA001001-L-1"); }), ErrorCode::BackendUnavailable);
}

TEST(HttpObjectStore, UnreachableIsUnavailable) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof addr;
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), len), 0);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  ::close(fd);
  HttpObjectStore store("http://127.0.0.1:" + std::to_string(port), "org-a");
  EXPECT_EQ(code_of([&] { store.get("AAA001001-L-1"); }), ErrorCode::BackendUnavailable);
}
