#include "koopcheck/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace koopcheck {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::supported: return "supported";
    case Verdict::violated: return "violated";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict parse_verdict(const std::string& text) {
  if (text == "supported") return Verdict::supported;
  if (text == "violated") return Verdict::violated;
  if (text == "inconclusive") return Verdict::inconclusive;
  throw ConfigError("unknown verdict '" + text + "'");
}

void TheoremReport::set_statistic(const std::string& key, double value) {
  if (std::isfinite(value)) {
    statistics[key] = value;
  } else {
    statistics.erase(key);
    notes.push_back("statistic '" + key + "' is not finite and was omitted");
  }
}

void TheoremReport::add_counterexample(Vector point, std::vector<double> values) {
  ++counterexample_count;
  if (counterexamples.size() < kMaxStoredCounterexamples)
    counterexamples.push_back({std::move(point), std::move(values)});
}

void TheoremReport::mark_inconclusive(const std::string& reason) {
  verdict = Verdict::inconclusive;
  notes.push_back(reason);
}

void TheoremReport::conclude() {
  verdict = counterexample_count > 0 ? Verdict::violated : Verdict::supported;
}

namespace {

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json TheoremReport::to_json() const {
  Json j;
  j["theorem_id"] = theorem_id;
  j["verdict"] = to_string(verdict);
  j["statistics"] = Json::object();
  for (const auto& [k, v] : statistics) j["statistics"][k] = finite_or_null(v);
  j["tolerances"] = Json::object();
  for (const auto& [k, v] : tolerances) j["tolerances"][k] = finite_or_null(v);
  j["counterexample_count"] = counterexample_count;
  Json ces = Json::array();
  for (const auto& c : counterexamples) {
    Json point = Json::array();
    for (Eigen::Index i = 0; i < c.point.size(); ++i) point.push_back(finite_or_null(c.point[i]));
    Json values = Json::array();
    for (double v : c.values) values.push_back(finite_or_null(v));
    ces.push_back({{"point", point}, {"values", values}});
  }
  j["counterexamples"] = ces;
  j["notes"] = notes;
  j["inputs_hash"] = inputs_hash;
  return j;
}

TheoremReport TheoremReport::from_json(const Json& j) {
  TheoremReport r;
  r.theorem_id = j.at("theorem_id").get<std::string>();
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  for (const auto& [k, v] : j.at("statistics").items())
    if (v.is_number()) r.statistics[k] = v.get<double>();
  for (const auto& [k, v] : j.at("tolerances").items())
    if (v.is_number()) r.tolerances[k] = v.get<double>();
  for (const auto& c : j.at("counterexamples")) {
    const auto& p = c.at("point");
    Vector point(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i)
      point[static_cast<Eigen::Index>(i)] = p[i].is_number() ? p[i].get<double>() : NAN;
    std::vector<double> values;
    for (const auto& v : c.at("values")) values.push_back(v.is_number() ? v.get<double>() : NAN);
    r.counterexamples.push_back({std::move(point), std::move(values)});
  }
  r.counterexample_count = j.at("counterexample_count").get<std::size_t>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
  r.inputs_hash = j.at("inputs_hash").get<std::string>();
  return r;
}

TheoremReport merge_reports(const std::string& id, const std::vector<TheoremReport>& parts) {
  TheoremReport out;
  out.theorem_id = id;
  bool any_supported = false;
  bool any_violated = false;
  std::string hashes;
  for (const auto& p : parts) {
    any_supported = any_supported || p.verdict == Verdict::supported;
    any_violated = any_violated || p.verdict == Verdict::violated;
    const std::string prefix = p.theorem_id + ".";
    out.statistics[prefix + "verdict_code"] = static_cast<double>(static_cast<int>(p.verdict));
    for (const auto& [k, v] : p.statistics) out.statistics[prefix + k] = v;
    for (const auto& [k, v] : p.tolerances) out.tolerances[prefix + k] = v;
    for (const auto& n : p.notes) out.notes.push_back(p.theorem_id + ": " + n);
    for (const auto& c : p.counterexamples)
      if (out.counterexamples.size() < kMaxStoredCounterexamples) out.counterexamples.push_back(c);
    out.counterexample_count += p.counterexample_count;
    hashes += p.inputs_hash;
  }
  out.verdict = any_violated    ? Verdict::violated
                : any_supported ? Verdict::supported
                                : Verdict::inconclusive;
  out.inputs_hash = to_hex64(fnv1a64(hashes));
  return out;
}

Verdict aggregate_verdict(const std::vector<TheoremReport>& reports) {
  bool any_supported = false;
  for (const auto& r : reports) {
    if (r.verdict == Verdict::violated) return Verdict::violated;
    any_supported = any_supported || r.verdict == Verdict::supported;
  }
  return any_supported ? Verdict::supported : Verdict::inconclusive;
}

Json report_document(const std::vector<TheoremReport>& reports, const std::string& config_hash,
                     std::uint64_t seed) {
  Json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["config_hash"] = config_hash;
  doc["seed"] = seed;
  doc["aggregate_verdict"] = to_string(aggregate_verdict(reports));
  Json list = Json::array();
  for (const auto& r : reports) list.push_back(r.to_json());
  doc["reports"] = list;
  return doc;
}

void write_counterexamples_csv(std::ostream& os, const TheoremReport& report) {
  std::size_t d = 0;
  std::size_t m = 0;
  for (const auto& c : report.counterexamples) {
    d = std::max(d, static_cast<std::size_t>(c.point.size()));
    m = std::max(m, c.values.size());
  }
  std::string header;
  for (std::size_t i = 0; i < d; ++i) header += (i ? ",p" : "p") + std::to_string(i + 1);
  for (std::size_t i = 0; i < m; ++i) header += (header.empty() ? "v" : ",v") + std::to_string(i + 1);
  os << header << '\n';
  char buf[40];
  for (const auto& c : report.counterexamples) {
    std::string row;
    for (std::size_t i = 0; i < d; ++i) {
      const double v = i < static_cast<std::size_t>(c.point.size()) ? c.point[static_cast<Eigen::Index>(i)] : NAN;
      std::snprintf(buf, sizeof buf, "%.17g", v);
      row += (i ? "," : "") + std::string(buf);
    }
    for (std::size_t i = 0; i < m; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", i < c.values.size() ? c.values[i] : NAN);
      row += (row.empty() && i == 0 ? "" : ",") + std::string(buf);
    }
    os << row << '\n';
  }
}

}  // namespace koopcheck
