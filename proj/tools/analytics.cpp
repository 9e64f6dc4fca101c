// Cohort and satisfaction summaries over export and response files.

#include <CLI11.hpp>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mtocs/analytics.hpp"
#include "mtocs/error.hpp"
#include "mtocs/storage/csv.hpp"

namespace an = mtocs::analytics;
namespace csv = mtocs::storage::csv;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw an::AnalyticsError(an::Failure::BadInput, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw an::AnalyticsError(an::Failure::BadInput, "cannot write " + path.string());
  out << text;
}

/// Left-aligned first column, right-aligned rest.
void print_table(const std::vector<csv::Row>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) std::cout << "  ";
      std::cout << (i == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[i])) << r[i];
    }
    std::cout << "\n";
  }
}

void emit(const std::vector<csv::Row>& rows, const std::optional<std::string>& csv_out) {
  print_table(rows);
  if (!csv_out) return;
  std::string text;
  for (const auto& r : rows) csv::append_row(text, r);
  write_file(*csv_out, text);
}

std::vector<mtocs::storage::ExportRow> fetch_export(const std::string& url, const std::string& token,
                                                    const std::optional<std::string>& org) {
  httplib::Client client(url);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  client.enable_server_certificate_verification(std::getenv("MTOCS_INSECURE_TLS") == nullptr);
  std::string path = "/api/export.csv";
  if (org) path += "?org=" + httplib::detail::encode_query_param(*org);
  auto res = client.Get(path, {{"Authorization", "Bearer " + token}});
  if (!res) throw an::AnalyticsError(an::Failure::BadInput, "cannot reach " + url);
  if (res->status != 200) {
    throw an::AnalyticsError(an::Failure::BadInput, "export request failed with HTTP " + std::to_string(res->status));
  }
  return mtocs::storage::parse_export(res->body);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"mTOCS cohort analytics"};
  cli.require_subcommand(1);

  std::string export_file, responses_file, url, token, theme = "Language", out_dir;
  std::optional<std::string> org, csv_out;
  int distributed = 0;
  std::uint64_t seed = 1;

  auto* demo = cli.add_subcommand("demographics", "participant characteristics");
  auto* source = demo->add_option("--export", export_file, "export CSV");
  auto* from_url = demo->add_option("--url", url, "service base URL");
  source->excludes(from_url);
  demo->add_option("--token", token, "bearer token for --url")->needs(from_url);
  demo->add_option("--org", org, "organization to export (admin token)")->needs(from_url);
  demo->add_option("--csv", csv_out, "also write the table as CSV");

  auto* likert = cli.add_subcommand("likert", "satisfaction per theme");
  likert->add_option("--responses", responses_file)->required();
  likert->add_option("--distributed", distributed, "surveys handed out, for the response rate");
  likert->add_option("--csv", csv_out);

  auto* strat = cli.add_subcommand("stratify", "one theme by preferred language");
  strat->add_option("--export", export_file)->required();
  strat->add_option("--responses", responses_file)->required();
  strat->add_option("--theme", theme);
  strat->add_option("--csv", csv_out);

  auto* synth = cli.add_subcommand("synthesize", "write a fixture cohort matching the published tables");
  synth->add_option("--seed", seed);
  synth->add_option("--out-dir", out_dir)->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*demo) {
      if (export_file.empty() && url.empty()) throw an::AnalyticsError(an::Failure::BadInput, "need --export or --url");
      const auto rows = export_file.empty() ? fetch_export(url, token, org)
                                            : mtocs::storage::parse_export(read_file(export_file));
      const auto s = an::demographics(rows);
      std::vector<csv::Row> table{{"field", "category", "count", "percent"}};
      table.push_back({"participants", "", std::to_string(s.participants), ""});
      table.push_back({"age", "mean", s.age.mean.str(), ""});
      table.push_back({"age", "range", std::to_string(s.age.min) + "-" + std::to_string(s.age.max), ""});
      for (const auto& f : s.fields) {
        for (const auto& c : f.categories) {
          table.push_back({f.field, c.category, std::to_string(c.count), c.percent.str()});
        }
      }
      emit(table, csv_out);
    } else if (*likert) {
      const auto responses = an::parse_responses(read_file(responses_file));
      const auto n = an::respondents(responses);
      if (distributed > 0) {
        std::cout << "respondents " << n << " of " << distributed << " ("
                  << an::pct(static_cast<std::int64_t>(n), distributed).str() << "%)\n";
      } else {
        std::cout << "respondents " << n << "\n";
      }
      std::vector<csv::Row> table{{"theme", "n", "mean", "sd"}};
      for (const auto& t : an::likert_by_theme(responses)) {
        table.push_back({t.theme, std::to_string(t.stats.count), t.stats.mean_2dp.str(), t.stats.sd_2dp.str()});
      }
      emit(table, csv_out);
    } else if (*strat) {
      const auto rows = mtocs::storage::parse_export(read_file(export_file));
      const auto responses = an::parse_responses(read_file(responses_file));
      const auto s = an::stratify_by_language(responses, theme, rows);
      std::vector<csv::Row> table{{"language", "1", "2", "3", "4", "5", "n"}};
      for (const auto& [group, h] : s.histograms) {
        csv::Row r{std::string(an::label(group))};
        int total = 0;
        for (int c : h) {
          r.push_back(std::to_string(c));
          total += c;
        }
        r.push_back(std::to_string(total));
        table.push_back(std::move(r));
      }
      std::cout << s.theme << "\n";
      emit(table, csv_out);
    } else if (*synth) {
      const auto cohort = an::synthesize_cohort(an::published_targets(), seed);
      std::filesystem::create_directories(out_dir);
      write_file(std::filesystem::path(out_dir) / "export.csv", mtocs::storage::to_csv(cohort.rows));
      write_file(std::filesystem::path(out_dir) / "responses.csv", an::responses_to_csv(cohort.responses));
      std::cout << cohort.rows.size() << " visits, " << cohort.responses.size() << " responses written to " << out_dir
                << "\n";
    }
    return 0;
  } catch (const an::AnalyticsError& e) {
    std::cerr << "error: " << an::to_string(e.kind()) << ": " << e.what() << "\n";
    return 2;
  } catch (const mtocs::Error& e) {
    std::cerr << "error: " << mtocs::to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
}
