#include "mtocs/domain.hpp"
#include "mtocs/error.hpp"

namespace mtocs::domain {

using survey::json;

namespace {

json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) fail(ErrorCode::Validation, std::string(key) + " must be a string", key);
  return it->get<std::string>();
}

std::optional<std::string> optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail(ErrorCode::Validation, std::string(key) + " must be a string", key);
  return it->get<std::string>();
}

template <class Enum>
Enum enum_field(const json& j, const char* key) {
  const auto text = string_field(j, key);
  if (text.empty()) fail(ErrorCode::Validation, std::string(key) + " is required", key);
  auto v = parse_token<Enum>(text);
  if (!v) fail(ErrorCode::Validation, "unknown " + std::string(key) + " '" + text + "'", key);
  return *v;
}

Date date_field(const json& j, const char* key) {
  const auto text = string_field(j, key);
  if (text.empty()) fail(ErrorCode::Validation, std::string(key) + " is required", key);
  auto d = parse_date(text);
  if (!d) fail(ErrorCode::Validation, std::string(key) + " must be YYYY-MM-DD", key);
  return *d;
}

constexpr const char* kKnownKeys[] = {
    "name",    "first_name", "last_name", "date_of_birth", "sex",           "ethnicity",
    "language", "insurance", "city",      "state",         "zipcode",       "country",
    "primary_phone", "secondary_phone", "email"};

constexpr const char* kImmutableKeys[] = {"participant_id", "organization_id", "created_at",
                                          "version"};

}  // namespace

json to_json(const Demographics& d) {
  return {{"name", d.name},
          {"first_name", d.first_name},
          {"last_name", d.last_name},
          {"date_of_birth", format_date(d.date_of_birth)},
          {"sex", token(d.sex)},
          {"ethnicity", token(d.ethnicity)},
          {"language", token(d.language)},
          {"insurance", token(d.insurance)},
          {"city", d.city},
          {"state", d.state},
          {"zipcode", d.zipcode},
          {"country", d.country},
          {"primary_phone", d.primary_phone},
          {"secondary_phone", optional_json(d.secondary_phone)},
          {"email", optional_json(d.email)}};
}

json to_json(const Participant& p) {
  json j = to_json(p.demographics);
  j["participant_id"] = p.participant_id.str();
  j["organization_id"] = p.organization_id.str();
  j["created_at"] = format_timestamp(p.created_at);
  j["version"] = p.version;
  return j;
}

json to_json(const ImageRef& ref) {
  return {{"eye", token(ref.eye)},
          {"storage_key", ref.storage_key},
          {"captured_at", format_timestamp(ref.captured_at)}};
}

json to_json(const Visit& v) {
  json images = json::array();
  for (const auto& ref : v.image_refs) images.push_back(to_json(ref));
  return {{"visit_id", v.visit_id.str()},
          {"participant_id", v.participant_id.str()},
          {"answers", v.answers.answers},
          {"schema_version", v.answers.schema_version},
          {"image_refs", std::move(images)},
          {"state", token(v.state)},
          {"survey_taken_at", format_timestamp(v.survey_taken_at)},
          {"graded_at", v.graded_at ? json(format_timestamp(*v.graded_at)) : json(nullptr)},
          {"organization_id", v.organization_id.str()},
          {"requires_reissue", v.requires_reissue},
          {"version", v.version}};
}

Demographics demographics_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::Validation, "participant must be a JSON object");
  for (const char* key : kImmutableKeys) {
    if (j.contains(key)) fail(ErrorCode::Validation, std::string(key) + " is assigned by the system", key);
  }
  Demographics d;
  d.name = string_field(j, "name");
  d.first_name = string_field(j, "first_name");
  d.last_name = string_field(j, "last_name");
  d.date_of_birth = date_field(j, "date_of_birth");
  d.sex = enum_field<Sex>(j, "sex");
  d.ethnicity = enum_field<Ethnicity>(j, "ethnicity");
  d.language = enum_field<Language>(j, "language");
  d.insurance = enum_field<Insurance>(j, "insurance");
  d.city = string_field(j, "city");
  d.state = string_field(j, "state");
  d.zipcode = string_field(j, "zipcode");
  d.country = string_field(j, "country");
  d.primary_phone = string_field(j, "primary_phone");
  d.secondary_phone = optional_field(j, "secondary_phone");
  d.email = optional_field(j, "email");
  return d;
}

Demographics apply_patch(const Demographics& base, const json& patch) {
  if (!patch.is_object()) fail(ErrorCode::Validation, "patch must be a JSON object");
  for (const char* key : kImmutableKeys) {
    if (patch.contains(key)) fail(ErrorCode::Validation, std::string(key) + " cannot be changed", key);
  }
  for (const auto& [key, _] : patch.items()) {
    bool known = false;
    for (const char* k : kKnownKeys) known = known || key == k;
    if (!known) fail(ErrorCode::Validation, "unknown field '" + key + "'", key);
  }
  json merged = to_json(base);
  for (const auto& [key, value] : patch.items()) merged[key] = value;
  // A renamed participant gets first/last name re-derived unless supplied.
  if (patch.contains("name")) {
    if (!patch.contains("first_name")) merged["first_name"] = "";
    if (!patch.contains("last_name")) merged["last_name"] = "";
  }
  return demographics_from_json(merged);
}

}  // namespace mtocs::domain
