#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopcheck/common.hpp"

namespace koopcheck {

using Json = nlohmann::json;

enum class Verdict { supported, violated, inconclusive };
std::string to_string(Verdict v);
Verdict parse_verdict(const std::string& text);

struct Counterexample {
  Vector point;
  std::vector<double> values;
};

// Counterexamples beyond this many are counted but not stored.
constexpr std::size_t kMaxStoredCounterexamples = 100;

struct TheoremReport {
  std::string theorem_id;
  Verdict verdict = Verdict::inconclusive;
  std::map<std::string, double> statistics;
  std::vector<Counterexample> counterexamples;
  std::size_t counterexample_count = 0;
  std::map<std::string, double> tolerances;
  std::vector<std::string> notes;
  std::string inputs_hash;

  // Non-finite values are not stored; a note records the omission instead.
  void set_statistic(const std::string& key, double value);
  void add_counterexample(Vector point, std::vector<double> values);
  // inconclusive with the reason attached.
  void mark_inconclusive(const std::string& reason);
  // violated iff a counterexample was recorded, supported otherwise.
  void conclude();

  [[nodiscard]] Json to_json() const;
  static TheoremReport from_json(const Json& j);
};

// Sub-reports joined under one id: violated if any is violated, otherwise
// supported if any is supported, otherwise inconclusive. Keys are prefixed
// with the sub-report id.
TheoremReport merge_reports(const std::string& id, const std::vector<TheoremReport>& parts);

constexpr int kReportSchemaVersion = 1;

// Whole-suite document; the aggregate verdict is violated if any report is.
Json report_document(const std::vector<TheoremReport>& reports, const std::string& config_hash,
                     std::uint64_t seed);
Verdict aggregate_verdict(const std::vector<TheoremReport>& reports);

// One row per stored counterexample: p1..pd,v1..vm.
void write_counterexamples_csv(std::ostream& os, const TheoremReport& report);

}  // namespace koopcheck
