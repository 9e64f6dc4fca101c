// Service entry point plus account and data administration commands.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mtocs/api/server.hpp"
#include "mtocs/storage/export.hpp"

namespace {

mtocs::api::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mtocs::Error(mtocs::ErrorCode::Validation, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"mTOCS screening workflow service"};
  cli.require_subcommand(1);

  std::optional<std::string> config_path;
  cli.add_option("--config", config_path, "JSON configuration file");

  auto* serve = cli.add_subcommand("serve", "run the HTTP API");
  bool dev_plaintext = false;
  std::optional<std::string> addr;
  serve->add_flag("--dev-plaintext", dev_plaintext, "serve without TLS (development only)");
  serve->add_option("--addr", addr, "host:port to listen on");

  auto* add_account = cli.add_subcommand("add-account", "create a login");
  std::string username, role_text, org_text;
  std::vector<std::string> serves;
  add_account->add_option("--username", username)->required();
  add_account->add_option("--role", role_text, "screener, grader, staff or admin")->required();
  add_account->add_option("--org", org_text, "home organization")->required();
  add_account->add_option("--serves", serves, "further organizations a grader serves");

  auto* import = cli.add_subcommand("import", "load an export CSV into one organization");
  std::string import_file;
  import->add_option("--org", org_text)->required();
  import->add_option("file", import_file)->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    auto config = mtocs::api::Config::load(config_path ? std::optional<std::filesystem::path>(*config_path)
                                                       : std::nullopt,
                                           mtocs::api::Config::process_env);
    if (config.templates_dir.empty()) config.templates_dir = std::filesystem::path(MTOCS_DATA_DIR) / "templates";
    if (config.schema_path.empty()) config.schema_path = std::filesystem::path(MTOCS_DATA_DIR) / "questionnaire/v1.json";

    if (*serve) {
      if (dev_plaintext) config.dev_plaintext = true;
      if (addr) config.set_address(*addr);
      if (config.dev_plaintext) spdlog::warn("serving plaintext HTTP; use TLS outside development");
      mtocs::api::App app(config);
      const int port = app.server().bind(config.host, config.port);
      spdlog::info("listening on {}:{} ({})", config.host, port, app.server().is_tls() ? "https" : "http");
      g_server = &app.server();
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      app.server().run();
      return 0;
    }

    // Administration commands never listen, so they do not need TLS material.
    config.dev_plaintext = true;
    mtocs::api::App app(config);
    if (*add_account) {
      auto role = mtocs::access::parse_role(role_text);
      if (!role) throw mtocs::Error(mtocs::ErrorCode::Validation, "unknown role " + role_text);
      std::string password;
      if (const char* env = std::getenv("MTOCS_PASSWORD")) {
        password = env;
      } else {
        std::cerr << "password: ";
        std::getline(std::cin, password);
      }
      std::vector<mtocs::OrganizationId> extra;
      for (const auto& s : serves) extra.emplace_back(s);
      const auto account = app.service().create_account(username, password, *role, mtocs::OrganizationId(org_text),
                                                        std::move(extra));
      std::cout << account.account_id << "\n";
    } else if (*import) {
      const auto rows = mtocs::storage::parse_export(read_file(import_file));
      const mtocs::OrganizationId org(org_text);
      const auto count = app.store().write([&](mtocs::storage::Tx& tx) {
        return mtocs::storage::import_rows(tx, org, rows, app.service().schema(), mtocs::SystemClock().now());
      });
      std::cout << count << " visits imported\n";
    }
    return 0;
  } catch (const mtocs::Error& e) {
    std::cerr << "error: " << mtocs::to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
}
