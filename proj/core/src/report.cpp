#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "survbal/error.hpp"
#include "survbal/experiment.hpp"

namespace survbal {

namespace {

using nlohmann::json;

constexpr const char* kCsvHeader =
    "method,dataset,budget,probe_depth,cost_mode,seed,mae_po,mae_unc,cindex,ibs,status,n_probed,spent,"
    "mae_po_ci95,mae_unc_ci95,cindex_ci95,ibs_ci95,message";

std::string exact(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_exact(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError("bad number '" + s + "' in report");
  return v;
}

std::string_view status_name(CellStatus s) {
  switch (s) {
    case CellStatus::Ok: return "ok";
    case CellStatus::Failed: return "failed";
    case CellStatus::Timeout: return "timeout";
  }
  return "failed";
}

CellStatus parse_status(std::string_view s) {
  if (s == "ok") return CellStatus::Ok;
  if (s == "failed") return CellStatus::Failed;
  if (s == "timeout") return CellStatus::Timeout;
  throw ParseError("bad cell status '" + std::string(s) + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) throw ParseError("unterminated quote in report CSV");
  return out;
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(exact(v)); }

double number_from(const json& j) {
  if (j.is_string()) return parse_exact(j.get<std::string>());
  return j.get<double>();
}

json report_json(const MetricReport& r) {
  return {{"mae_po", r.mae_po},
          {"mae_uncensored", r.mae_uncensored},
          {"c_index", r.c_index},
          {"ibs", r.ibs},
          {"ci95",
           {{"mae_po", r.ci95.mae_po},
            {"mae_uncensored", r.ci95.mae_uncensored},
            {"c_index", r.ci95.c_index},
            {"ibs", r.ci95.ibs}}}};
}

MetricReport report_from(const json& j) {
  MetricReport r;
  r.mae_po = j.at("mae_po").get<double>();
  r.mae_uncensored = j.at("mae_uncensored").get<double>();
  r.c_index = j.at("c_index").get<double>();
  r.ibs = j.at("ibs").get<double>();
  const auto& c = j.at("ci95");
  r.ci95 = {c.at("mae_po").get<double>(), c.at("mae_uncensored").get<double>(), c.at("c_index").get<double>(),
            c.at("ibs").get<double>()};
  return r;
}

void write_csv_report(const ResultTable& table, std::ostream& out) {
  out << kCsvHeader << "\n";
  for (const auto& c : table.cells) {
    const auto& r = c.report;
    out << method_name(c.method) << ',' << csv_field(c.dataset) << ',' << exact(c.budget) << ','
        << exact(c.probe_depth) << ',' << csv_field(c.cost_mode) << ',' << c.seed << ',' << exact(r.mae_po) << ','
        << exact(r.mae_uncensored) << ',' << exact(r.c_index) << ',' << exact(r.ibs) << ',' << status_name(c.status)
        << ',' << c.n_probed << ',' << exact(c.spent) << ',' << exact(r.ci95.mae_po) << ','
        << exact(r.ci95.mae_uncensored) << ',' << exact(r.ci95.c_index) << ',' << exact(r.ci95.ibs) << ','
        << csv_field(c.message) << "\n";
  }
}

ResultTable read_csv_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("report CSV header mismatch");
  ResultTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 18) throw ParseError("report CSV row has " + std::to_string(f.size()) + " fields, expected 18");
    CellResult c;
    c.method = parse_method(f[0]);
    c.dataset = f[1];
    c.budget = parse_exact(f[2]);
    c.probe_depth = parse_exact(f[3]);
    c.cost_mode = f[4];
    c.seed = std::stoull(f[5]);
    c.report.mae_po = parse_exact(f[6]);
    c.report.mae_uncensored = parse_exact(f[7]);
    c.report.c_index = parse_exact(f[8]);
    c.report.ibs = parse_exact(f[9]);
    c.status = parse_status(f[10]);
    c.n_probed = std::stoull(f[11]);
    c.spent = parse_exact(f[12]);
    c.report.ci95.mae_po = parse_exact(f[13]);
    c.report.ci95.mae_uncensored = parse_exact(f[14]);
    c.report.ci95.c_index = parse_exact(f[15]);
    c.report.ci95.ibs = parse_exact(f[16]);
    c.message = f[17];
    t.cells.push_back(std::move(c));
  }
  return t;
}

void write_json_report(const ResultTable& table, std::ostream& out) {
  json cells = json::array();
  for (const auto& c : table.cells)
    cells.push_back({{"method", method_name(c.method)},
                     {"dataset", c.dataset},
                     {"budget", number_json(c.budget)},
                     {"probe_depth", number_json(c.probe_depth)},
                     {"cost_mode", c.cost_mode},
                     {"seed", c.seed},
                     {"status", status_name(c.status)},
                     {"message", c.message},
                     {"n_probed", c.n_probed},
                     {"spent", c.spent},
                     {"report", report_json(c.report)}});
  out << json{{"cells", cells}}.dump(2) << "\n";
}

ResultTable read_json_report(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what());
  }
  ResultTable t;
  try {
    for (const auto& c : j.at("cells")) {
      CellResult r;
      r.method = parse_method(c.at("method").get<std::string>());
      r.dataset = c.at("dataset").get<std::string>();
      r.budget = number_from(c.at("budget"));
      r.probe_depth = number_from(c.at("probe_depth"));
      r.cost_mode = c.at("cost_mode").get<std::string>();
      r.seed = c.at("seed").get<std::uint64_t>();
      r.status = parse_status(c.at("status").get<std::string>());
      r.message = c.at("message").get<std::string>();
      r.n_probed = c.at("n_probed").get<std::size_t>();
      r.spent = c.at("spent").get<double>();
      r.report = report_from(c.at("report"));
      t.cells.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("report JSON: ") + e.what());
  }
  return t;
}

std::string fixed3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_markdown_report(const ResultTable& table, std::ostream& out) {
  const auto rows = table.rows();
  std::vector<Method> methods;
  for (const auto& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);

  struct Key {
    std::string cost_mode;
    double probe_depth;
    double budget;
    bool operator==(const Key&) const = default;
  };
  std::vector<Key> keys;
  for (const auto& r : rows) {
    const Key k{r.cost_mode, r.probe_depth, r.budget};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }

  out << "| cost | k | budget |";
  for (auto m : methods) out << ' ' << method_name(m) << " |";
  out << "\n|---|---|---|";
  for (std::size_t i = 0; i < methods.size(); ++i) out << "---|";
  out << "\n";

  for (const auto& key : keys) {
    std::vector<const ResultRow*> line(methods.size(), nullptr);
    for (const auto& r : rows)
      if (Key{r.cost_mode, r.probe_depth, r.budget} == key) {
        const auto at = std::find(methods.begin(), methods.end(), r.method) - methods.begin();
        line[static_cast<std::size_t>(at)] = &r;
      }
    std::vector<std::vector<double>> maes;
    for (const auto* r : line) maes.push_back(r ? r->mae_po_by_seed : std::vector<double>{});
    const auto bold = bold_group(maes);

    out << "| " << key.cost_mode << " | " << exact(key.probe_depth) << " | " << exact(key.budget) << " |";
    for (std::size_t i = 0; i < line.size(); ++i) {
      std::string cell = "n/a";
      if (line[i] && line[i]->n_ok > 0)
        cell = fixed3(line[i]->mean.mae_po) + " ± " + fixed3(line[i]->mean.ci95.mae_po);
      if (std::find(bold.begin(), bold.end(), i) != bold.end()) cell = "**" + cell + "**";
      out << ' ' << cell << " |";
    }
    out << "\n";
  }
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

std::vector<std::size_t> bold_group(const std::vector<std::vector<double>>& maes, double alpha) {
  std::optional<std::size_t> best;
  double best_mean = 0.0;
  std::size_t filled = 0;
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (std::size_t i = 0; i < maes.size(); ++i) {
    if (maes[i].empty()) continue;
    ++filled;
    const double m = mean(maes[i]);
    if (!best || m < best_mean) {
      best = i;
      best_mean = m;
    }
  }
  if (!best) return {};
  std::vector<std::size_t> group;
  for (std::size_t i = 0; i < maes.size(); ++i) {
    if (maes[i].empty()) continue;
    if (i == *best) {
      group.push_back(i);
      continue;
    }
    bool tied = false;
    if (maes[i].size() >= 2 && maes[*best].size() >= 2)
      tied = welch_t_test(maes[i], maes[*best]).p_two_sided >= alpha;
    else
      tied = mean(maes[i]) == best_mean;
    if (tied) group.push_back(i);
  }
  if (group.size() == filled && filled > 1) return {};
  return group;
}

void emit_report(const ResultTable& table, ReportFormat format, std::ostream& out) {
  if (table.cells.empty()) throw ValidationError("cannot report an empty result table");
  switch (format) {
    case ReportFormat::Csv: write_csv_report(table, out); break;
    case ReportFormat::Json: write_json_report(table, out); break;
    case ReportFormat::Markdown: write_markdown_report(table, out); break;
  }
  if (!out) throw Error("failed writing report");
}

void emit_report(const ResultTable& table, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  emit_report(table, format, out);
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

ResultTable read_report(std::istream& in, ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv: return read_csv_report(in);
    case ReportFormat::Json: return read_json_report(in);
    case ReportFormat::Markdown: break;
  }
  throw ConfigError("markdown reports cannot be read back");
}

ResultTable read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const auto ext = path.extension().string();
  if (ext == ".csv") return read_report(in, ReportFormat::Csv);
  if (ext == ".json") return read_report(in, ReportFormat::Json);
  throw ConfigError("report input must be .csv or .json");
}

}  // namespace survbal
