#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "constellation/harness.hpp"

namespace constellation {

// Doubles print with 9 significant digits, which round-trips our metric
// ranges well inside 1e-9 relative error.
inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// RFC 4180 quoting: quote when a field holds a comma, quote, or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Per-evaluation-episode rows for every experiment cell.
inline std::string results_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "experiment_id,agent,seed,episode,reward_sum,tcr_percent,art_seconds,failures,"
         "capacity_violations,tmax_violations\n";
  for (const auto& cell : report.cells) {
    for (const auto& ep : cell.eval_episodes) {
      out << csv_field(report.experiment_id) << ',' << cell.agent_name << ',' << cell.seed << ','
          << ep.episode_index << ',' << csv_double(ep.reward_sum) << ','
          << csv_double(ep.tcr_percent) << ',' << (ep.art_s ? csv_double(*ep.art_s) : "") << ','
          << ep.failures << ',' << ep.capacity_violations << ',' << ep.tmax_violations << '\n';
    }
  }
  return out.str();
}

// Cross-seed medians per agent.
inline std::string summary_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "experiment_id,agent,median_reward,median_tcr,median_art_seconds,"
         "capacity_violations,tmax_violations\n";
  for (const auto& s : report.summaries) {
    out << csv_field(report.experiment_id) << ',' << s.agent_name << ','
        << csv_double(s.median_reward) << ',' << csv_double(s.median_tcr) << ','
        << (s.median_art ? csv_double(*s.median_art) : "") << ',' << s.capacity_violations << ','
        << s.tmax_violations << '\n';
  }
  return out.str();
}

// Train-curve rows (one per training episode) for a single cell.
inline std::string train_curve_csv(const std::string& experiment_id, const std::string& agent,
                                   std::uint64_t seed, const std::vector<EpisodeMetrics>& curve) {
  std::ostringstream out;
  out << "experiment_id,agent,seed,episode,reward_sum,tcr_percent,art_seconds,failures,"
         "capacity_violations,tmax_violations\n";
  for (const auto& ep : curve) {
    out << csv_field(experiment_id) << ',' << agent << ',' << seed << ',' << ep.episode_index
        << ',' << csv_double(ep.reward_sum) << ',' << csv_double(ep.tcr_percent) << ','
        << (ep.art_s ? csv_double(*ep.art_s) : "") << ',' << ep.failures << ','
        << ep.capacity_violations << ',' << ep.tmax_violations << '\n';
  }
  return out.str();
}

// Minimal CSV reader for files this module wrote (quoted fields supported).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
    } else if (c == '\n') {
      row.push_back(field);
      field.clear();
      rows.push_back(row);
      row.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace constellation
