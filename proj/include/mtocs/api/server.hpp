#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mtocs/access.hpp"
#include "mtocs/api/config.hpp"
#include "mtocs/error.hpp"
#include "mtocs/service.hpp"
#include "mtocs/storage/object_store.hpp"
#include "mtocs/storage/store.hpp"

namespace httplib {
class Server;
}

namespace mtocs::api {

/// HTTP status for each error code.
int http_status(ErrorCode code) noexcept;

/// {"code": ..., "message": ..., "field": ...}
survey::json error_body(const Error& e);

/// One entry of the route table. Routes without an action are public
/// (login, health); every other route authenticates the bearer token and
/// runs the access check before its handler.
struct RouteInfo {
  std::string method;
  std::string pattern;
  std::optional<access::Action> action;
  bool authenticated = true;
  /// A concrete path matching `pattern`, for route enumeration in tests.
  std::string example;
};

class ApiServer {
 public:
  /// Plaintext server when both paths are empty (development only).
  ApiServer(Service& service, const std::optional<std::filesystem::path>& tls_cert = std::nullopt,
            const std::optional<std::filesystem::path>& tls_key = std::nullopt);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  static const std::vector<RouteInfo>& routes();

  /// Binds the listening socket; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  /// run() on a background thread.
  void start();
  void stop();
  bool is_tls() const noexcept { return tls_; }

 private:
  void install_routes();

  Service& service_;
  std::unique_ptr<httplib::Server> http_;
  bool tls_ = false;
  std::thread thread_;
};

/// Everything a running service owns, assembled from a Config. Construction
/// fails on a missing or incomplete template set, a bad schema, bad TLS
/// material or an unreachable image store.
class App {
 public:
  explicit App(const Config& config);
  ~App();

  Service& service() noexcept { return *service_; }
  ApiServer& server() noexcept { return *server_; }
  storage::Store& store() noexcept { return *store_; }

 private:
  std::unique_ptr<storage::Store> store_;
  std::unique_ptr<survey::Questionnaire> schema_;
  std::unique_ptr<reporting::LetterLibrary> letters_;
  std::unique_ptr<storage::ObjectStoreProvider> images_;
  SystemClock clock_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<ApiServer> server_;
};

}  // namespace mtocs::api
