#include "mtocs/api/server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>

namespace mtocs::api {

using survey::json;
using access::Action;

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::KeyPolicyViolation:
    case ErrorCode::FormatError:
      return 422;
    case ErrorCode::MalformedRequest:
    case ErrorCode::UnsupportedLocale:
      return 400;
    case ErrorCode::Unauthenticated:
      return 401;
    case ErrorCode::Unauthorized:
      return 403;
    case ErrorCode::UnknownParticipant:
    case ErrorCode::UnknownVisit:
    case ErrorCode::UnknownEntity:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::IllegalTransition:
    case ErrorCode::IllegalState:
    case ErrorCode::Conflict:
    case ErrorCode::NoActiveDispatch:
    case ErrorCode::IdExhausted:
    case ErrorCode::VisitSequenceExhausted:
      return 409;
    case ErrorCode::BackendUnavailable:
      return 503;
    case ErrorCode::SchemaError:
    case ErrorCode::MissingTemplate:
    case ErrorCode::Internal:
      return 500;
  }
  return 500;
}

json error_body(const Error& e) {
  return {{"code", to_string(e.code())},
          {"message", e.what()},
          {"field", e.field() ? json(*e.field()) : json(nullptr)}};
}

namespace {

struct Context {
  const httplib::Request& req;
  httplib::Response& res;
  Service& service;
  Account account;
  OrganizationId org;
};

using Handler = std::function<void(Context&)>;

struct Route {
  RouteInfo info;
  Handler handler;
};

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, error_body(e), http_status(e.code())); }

json body_of(const httplib::Request& req) {
  if (req.body.empty()) fail(ErrorCode::MalformedRequest, "request body is empty");
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::MalformedRequest, "request body is not valid JSON");
  if (!j.is_object()) fail(ErrorCode::MalformedRequest, "request body must be a JSON object");
  return j;
}

std::string string_member(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) fail(ErrorCode::Validation, std::string(key) + " must be a string", key);
  return it->get<std::string>();
}

int expected_version(json& j) {
  auto it = j.find("expected_version");
  if (it == j.end() || !it->is_number_integer()) {
    fail(ErrorCode::Validation, "expected_version (integer) is required", "expected_version");
  }
  const int v = it->get<int>();
  j.erase(it);
  return v;
}

ParticipantId path_participant(const httplib::Request& req) {
  auto id = ParticipantId::parse(req.matches[1].str());
  if (!id) fail(ErrorCode::MalformedRequest, "malformed participant id '" + req.matches[1].str() + "'", "participant_id");
  return *id;
}

VisitId path_visit(const httplib::Request& req) {
  auto id = VisitId::parse(req.matches[1].str());
  if (!id) fail(ErrorCode::MalformedRequest, "malformed visit id '" + req.matches[1].str() + "'", "visit_id");
  return *id;
}

int query_int(const httplib::Request& req, const char* key, int fallback, int lo, int hi) {
  if (!req.has_param(key)) return fallback;
  const auto text = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size() && v >= lo && v <= hi) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::MalformedRequest, std::string(key) + " must be an integer in " + std::to_string(lo) + ".." +
                                        std::to_string(hi),
       key);
}

/// Wraps a list in {"items", "total", "limit", "offset"}; limit defaults to 50.
json paginate(const httplib::Request& req, const std::vector<json>& all) {
  const int limit = query_int(req, "limit", 50, 1, 1000);
  const int offset = query_int(req, "offset", 0, 0, 1 << 30);
  json items = json::array();
  for (std::size_t i = static_cast<std::size_t>(offset); i < all.size() && items.size() < static_cast<std::size_t>(limit); ++i) {
    items.push_back(all[i]);
  }
  return {{"items", std::move(items)}, {"total", all.size()}, {"limit", limit}, {"offset", offset}};
}

template <class T>
std::vector<json> to_json_list(const std::vector<T>& values) {
  std::vector<json> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(to_json(v));
  return out;
}

std::optional<grading::EyeAssessment> eye_from_json(const json& j, const char* key) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_object()) fail(ErrorCode::Validation, std::string(key) + " must be an object or null", key);
  const auto slug = string_member(j, "grade");
  auto grade = grading::parse_grade(slug);
  if (!grade) fail(ErrorCode::Validation, "unknown grade '" + slug + "'", std::string(key) + ".grade");
  std::string comment;
  if (auto it = j.find("comment"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) fail(ErrorCode::Validation, "comment must be a string", std::string(key) + ".comment");
    comment = it->get<std::string>();
  }
  return grading::EyeAssessment{*grade, std::move(comment)};
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) fail(ErrorCode::Validation, "unexpected field '" + key + "'", key);
  }
}

json account_json(const Account& a) {
  json extra = json::array();
  for (const auto& org : a.extra_organizations) extra.push_back(org.str());
  return {{"account_id", a.account_id},
          {"username", a.username},
          {"role", access::token(a.role)},
          {"organization_id", a.organization_id.str()},
          {"extra_organizations", std::move(extra)}};
}

json pending_json(const PendingReport& r) {
  return {{"visit_id", r.visit.visit_id.str()},
          {"organization_id", r.visit.organization_id.str()},
          {"state", domain::token(r.visit.state)},
          {"requires_reissue", r.visit.requires_reissue},
          {"participant", domain::to_json(r.participant)},
          {"address_block", reporting::address_block(r.participant)},
          {"grading", grading::to_json(r.grading)},
          {"template_key", r.template_key}};
}

const std::vector<Route>& route_table() {
  static const std::vector<Route> table = [] {
    std::vector<Route> t;
    auto add = [&](std::string method, std::string pattern, std::optional<Action> action, std::string example,
                   Handler h, bool authenticated = true) {
      t.push_back({RouteInfo{std::move(method), std::move(pattern), action, authenticated, std::move(example)},
                   std::move(h)});
    };

    add("GET", "/healthz", std::nullopt, "/healthz",
        [](Context& c) { send_json(c.res, {{"status", "ok"}}); }, false);

    add("POST", "/api/auth/login", std::nullopt, "/api/auth/login", [](Context& c) {
      const auto body = body_of(c.req);
      const auto session = c.service.login(string_member(body, "username"), string_member(body, "password"));
      send_json(c.res, {{"token", session.token},
                        {"expires_at", format_timestamp(session.expires_at)},
                        {"account", account_json(session.account)}});
    }, false);

    add("POST", "/api/auth/logout", std::nullopt, "/api/auth/logout", [](Context& c) {
      const auto auth = c.req.get_header_value("Authorization");
      c.service.logout(auth.substr(std::string_view("Bearer ").size()));
      c.res.status = 204;
    });

    // Screener portal.
    add("POST", "/api/participants", Action::RegisterParticipant, "/api/participants", [](Context& c) {
      auto demographics = domain::demographics_from_json(body_of(c.req));
      send_json(c.res, domain::to_json(c.service.register_participant(c.account, std::move(demographics), c.org)), 201);
    });
    add("GET", "/api/participants", Action::SearchParticipants, "/api/participants?field=id&q=AAA001", [](Context& c) {
      const auto field_text = c.req.get_param_value("field");
      auto field = domain::parse_search_field(field_text);
      if (!field) fail(ErrorCode::MalformedRequest, "field must be id, name, date_of_birth or phone", "field");
      const auto found = c.service.search_participants(c.account, c.org, *field, c.req.get_param_value("q"));
      send_json(c.res, paginate(c.req, to_json_list(found)));
    });
    add("PATCH", R"(/api/participants/([^/]+))", Action::EditParticipant, "/api/participants/AAA001",
        [](Context& c) {
          auto body = body_of(c.req);
          const int version = expected_version(body);
          send_json(c.res, domain::to_json(c.service.edit_participant(c.account, c.org, path_participant(c.req),
                                                                      body, version)));
        });
    add("POST", R"(/api/participants/([^/]+)/visits)", Action::OpenVisit, "/api/participants/AAA001/visits",
        [](Context& c) {
          send_json(c.res, domain::to_json(c.service.open_visit(c.account, c.org, path_participant(c.req))), 201);
        });
    add("GET", R"(/api/visits/([^/]+))", Action::EditSurvey, "/api/visits/AAA001001", [](Context& c) {
      send_json(c.res, domain::to_json(c.service.visit(c.account, c.org, path_visit(c.req))));
    });
    add("PUT", R"(/api/visits/([^/]+)/survey)", Action::EditSurvey, "/api/visits/AAA001001/survey", [](Context& c) {
      auto body = body_of(c.req);
      const int version = expected_version(body);
      reject_unknown_keys(body, {"answers"});
      if (!body.contains("answers")) fail(ErrorCode::Validation, "answers is required", "answers");
      send_json(c.res, domain::to_json(c.service.edit_survey(c.account, c.org, path_visit(c.req),
                                                             body.at("answers"), version)));
    });
    add("POST", R"(/api/visits/([^/]+)/images)", Action::AttachImage, "/api/visits/AAA001001/images?eye=left",
        [](Context& c) {
          auto eye = domain::parse_token<domain::Eye>(c.req.get_param_value("eye"));
          if (!eye) fail(ErrorCode::MalformedRequest, "eye must be left or right", "eye");
          send_json(c.res, domain::to_json(c.service.attach_image(c.account, c.org, path_visit(c.req), *eye,
                                                                  c.req.body)),
                    201);
        });
    add("POST", R"(/api/visits/([^/]+)/transition)", Action::TransitionVisit, "/api/visits/AAA001001/transition",
        [](Context& c) {
          const auto body = body_of(c.req);
          const auto target_text = string_member(body, "target");
          auto target = domain::parse_token<VisitState>(target_text);
          if (!target) fail(ErrorCode::Validation, "unknown state '" + target_text + "'", "target");
          send_json(c.res, domain::to_json(c.service.transition_visit(c.account, c.org, path_visit(c.req), *target)));
        });
    add("GET", "/api/questionnaire", Action::ViewQuestionnaire, "/api/questionnaire?locale=en", [](Context& c) {
      const auto locale = c.req.has_param("locale") ? c.req.get_param_value("locale") : std::string("en");
      send_json(c.res, survey::to_json(c.service.questionnaire(c.account, locale)));
    });

    // Grader portal.
    add("GET", "/api/grading/queue", Action::ViewGradingQueue, "/api/grading/queue", [](Context& c) {
      send_json(c.res, paginate(c.req, to_json_list(c.service.grading_queue(c.account))));
    });
    add("GET", R"(/api/grading/([^/]+))", Action::EditGrading, "/api/grading/AAA001001", [](Context& c) {
      send_json(c.res, paginate(c.req, to_json_list(c.service.grading_history(c.account, c.org, path_visit(c.req)))));
    });
    add("POST", R"(/api/grading/([^/]+))", Action::SubmitGrading, "/api/grading/AAA001001", [](Context& c) {
      const auto body = body_of(c.req);
      reject_unknown_keys(body, {"left", "right"});
      auto left = eye_from_json(body.value("left", json(nullptr)), "left");
      auto right = eye_from_json(body.value("right", json(nullptr)), "right");
      send_json(c.res, grading::to_json(c.service.submit_grading(c.account, c.org, path_visit(c.req),
                                                                 std::move(left), std::move(right))),
                201);
    });
    add("PUT", R"(/api/grading/([^/]+))", Action::EditGrading, "/api/grading/AAA001001", [](Context& c) {
      const auto body = body_of(c.req);
      reject_unknown_keys(body, {"left", "right"});
      grading::GradingPatch patch;
      if (body.contains("left")) patch.left = eye_from_json(body.at("left"), "left");
      if (body.contains("right")) patch.right = eye_from_json(body.at("right"), "right");
      send_json(c.res, grading::to_json(c.service.edit_grading(c.account, c.org, path_visit(c.req), patch)));
    });
    add("GET", R"(/api/images/([^/]+))", Action::ViewGradingQueue, "/api/images/AAA001001-L-1", [](Context& c) {
      c.res.set_content(c.service.image(c.account, c.org, c.req.matches[1].str()), "application/octet-stream");
    });

    // Report distribution portal.
    add("GET", "/api/reports/pending", Action::ViewPendingReports, "/api/reports/pending", [](Context& c) {
      std::vector<json> items;
      for (const auto& r : c.service.pending_reports(c.account, c.org)) items.push_back(pending_json(r));
      send_json(c.res, paginate(c.req, items));
    });
    add("POST", R"(/api/reports/([^/]+)/letter)", Action::RenderLetter, "/api/reports/AAA001001/letter",
        [](Context& c) {
          const auto rendered = c.service.render_letter(c.account, c.org, path_visit(c.req));
          if (c.req.get_param_value("format") == "html") {
            c.res.status = 201;
            c.res.set_content(rendered.letter.html, "text/html; charset=utf-8");
            return;
          }
          send_json(c.res, {{"letter", reporting::to_json(rendered.letter)},
                            {"dispatch", reporting::to_json(rendered.dispatch)}},
                    201);
        });
    add("POST", R"(/api/reports/([^/]+)/sent)", Action::MarkLetterSent, "/api/reports/AAA001001/sent",
        [](Context& c) {
          send_json(c.res, reporting::to_json(c.service.mark_sent(c.account, c.org, path_visit(c.req))));
        });
    add("POST", R"(/api/reports/([^/]+)/followups)", Action::AddFollowUp, "/api/reports/AAA001001/followups",
        [](Context& c) {
          const auto body = body_of(c.req);
          if (body.contains("created_at")) {
            fail(ErrorCode::Validation, "created_at is assigned by the system", "created_at");
          }
          reject_unknown_keys(body, {"channel", "comment"});
          const auto channel_text = string_member(body, "channel");
          auto channel = reporting::parse_channel(channel_text);
          if (!channel) fail(ErrorCode::Validation, "channel must be phone_call or text", "channel");
          send_json(c.res, reporting::to_json(c.service.add_followup(c.account, c.org, path_visit(c.req), *channel,
                                                                     string_member(body, "comment"))),
                    201);
        });
    add("GET", R"(/api/reports/([^/]+)/followups)", Action::ListFollowUps, "/api/reports/AAA001001/followups",
        [](Context& c) {
          send_json(c.res, paginate(c.req, to_json_list(c.service.list_followups(c.account, c.org, path_visit(c.req)))));
        });
    add("GET", "/api/followups", Action::ListFollowUps, "/api/followups", [](Context& c) {
      send_json(c.res, paginate(c.req, to_json_list(c.service.my_followups(c.account, c.org))));
    });

    // Data management portal.
    add("GET", "/api/export.csv", Action::ExportData, "/api/export.csv", [](Context& c) {
      std::optional<OrganizationId> org;
      if (c.req.has_param("org")) org = c.org;
      c.res.set_content(c.service.export_csv(c.account, org), "text/csv; charset=utf-8");
    });
    return t;
  }();
  return table;
}

std::string bearer_token(const httplib::Request& req) {
  const auto auth = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (auth.size() <= prefix.size() || auth.compare(0, prefix.size(), prefix) != 0) {
    fail(ErrorCode::Unauthenticated, "missing bearer token");
  }
  return auth.substr(prefix.size());
}

void dispatch(const Route& route, Service& service, const httplib::Request& req, httplib::Response& res) {
  const auto started = std::chrono::steady_clock::now();
  try {
    Context c{req, res, service, {}, {}};
    if (route.info.authenticated) {
      c.account = service.authenticate(bearer_token(req));
      const auto org_text = req.has_param("org") ? req.get_param_value("org") : c.account.organization_id.str();
      if (!OrganizationId::valid(org_text)) fail(ErrorCode::MalformedRequest, "malformed organization id", "org");
      c.org = OrganizationId(org_text);
      if (route.info.action) {
        const bool scoped = *route.info.action != Action::ViewGradingQueue || req.has_param("org");
        service.authorizer().require(c.account, *route.info.action, req.path, scoped ? &c.org : nullptr);
      }
    }
    route.handler(c);
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const json::exception& e) {
    send_error(res, Error(ErrorCode::MalformedRequest, e.what()));
  } catch (const std::exception& e) {
    spdlog::error("{} {} failed: {}", req.method, req.path, e.what());
    send_error(res, Error(ErrorCode::Internal, "internal error"));
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  spdlog::info("{} {} {} {}ms", req.method, req.path, res.status, ms.count());
}

}  // namespace

const std::vector<RouteInfo>& ApiServer::routes() {
  static const std::vector<RouteInfo> infos = [] {
    std::vector<RouteInfo> out;
    for (const auto& r : route_table()) out.push_back(r.info);
    return out;
  }();
  return infos;
}

ApiServer::ApiServer(Service& service, const std::optional<std::filesystem::path>& tls_cert,
                     const std::optional<std::filesystem::path>& tls_key)
    : service_(service) {
  if (tls_cert || tls_key) {
    if (!tls_cert || !tls_key) fail(ErrorCode::Validation, "TLS needs both a certificate and a key", "tls_cert");
    auto ssl = std::make_unique<httplib::SSLServer>(tls_cert->c_str(), tls_key->c_str());
    if (!ssl->is_valid()) fail(ErrorCode::Validation, "TLS certificate or key is unusable", "tls_cert");
    http_ = std::move(ssl);
    tls_ = true;
  } else {
    http_ = std::make_unique<httplib::Server>();
  }
  http_->new_task_queue = [] { return new httplib::ThreadPool(8); };
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes() {
  for (const auto& route : route_table()) {
    auto handler = [this, &route](const httplib::Request& req, httplib::Response& res) {
      dispatch(route, service_, req, res);
    };
    if (route.info.method == "GET") http_->Get(route.info.pattern, handler);
    if (route.info.method == "POST") http_->Post(route.info.pattern, handler);
    if (route.info.method == "PUT") http_->Put(route.info.pattern, handler);
    if (route.info.method == "PATCH") http_->Patch(route.info.pattern, handler);
  }
  http_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const auto code = res.status == 404 ? ErrorCode::NotFound : ErrorCode::MalformedRequest;
    const int status = res.status;
    send_error(res, Error(code, "no route for " + req.method + " " + req.path));
    res.status = status;
    return httplib::Server::HandlerResponse::Handled;
  });
  http_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    send_error(res, Error(ErrorCode::Internal, "internal error"));
  });
}

int ApiServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::BackendUnavailable, "cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void ApiServer::run() { http_->listen_after_bind(); }

void ApiServer::start() {
  thread_ = std::thread([this] { run(); });
  http_->wait_until_ready();
}

void ApiServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mtocs::api
