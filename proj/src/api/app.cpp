#include "mtocs/api/server.hpp"

namespace mtocs::api {

App::App(const Config& config) {
  config.check();
  letters_ = std::make_unique<reporting::LetterLibrary>(reporting::LetterLibrary::load(config.templates_dir));
  schema_ = std::make_unique<survey::Questionnaire>(survey::Questionnaire::load(config.schema_path));
  if (config.storage_kind == "http") {
    std::optional<std::string> credential;
    if (!config.storage_credential_env.empty()) credential = Config::process_env(config.storage_credential_env.c_str());
    images_ = storage::http_provider(config.storage_url, credential);
    // Probe once so an unreachable backend stops startup instead of the first upload.
    images_->for_organization(OrganizationId("startup-probe")).exists("AAA000000-L-0");
  } else {
    images_ = storage::filesystem_provider(config.storage_root);
  }
  store_ = std::make_unique<storage::Store>(config.database.string());
  service_ = std::make_unique<Service>(*store_, *schema_, *letters_, *images_, clock_, config.session_ttl);
  server_ = std::make_unique<ApiServer>(*service_, config.dev_plaintext ? std::nullopt : config.tls_cert,
                                        config.dev_plaintext ? std::nullopt : config.tls_key);
}

App::~App() {
  if (server_) server_->stop();
}

}  // namespace mtocs::api
