// Copyright 2026 The storyeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Table-style summaries (Mean (SD) per metric and group) and the
// significance section, rendered as aligned text and CSV.

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyeval/metrics.hpp"
#include "storyeval/stats.hpp"
#include "storyeval/text.hpp"

namespace storyeval {

struct GroupKey {
  std::string experiment;
  std::string model;

  std::string label() const { return experiment.empty() ? model : experiment + "/" + model; }
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct GroupedSample {
  GroupKey group;
  std::string metric;
  std::vector<double> values;
};

inline std::vector<GroupedSample> group_metric_samples(const std::vector<MetricRecord>& records) {
  std::map<std::pair<GroupKey, int>, std::vector<double>> acc;
  for (const auto& r : records) {
    GroupKey key{r.source.experiment, r.source.model};
    for (auto m : kAllMetrics) acc[{key, static_cast<int>(m)}].push_back(r.metrics.get(m));
  }
  std::vector<GroupedSample> out;
  for (auto& [k, values] : acc) out.push_back({k.first, to_string(kAllMetrics[k.second]), std::move(values)});
  return out;
}

struct ReportRow {
  std::string label;  // e.g. "Spache Readability ↓"
  std::vector<std::optional<Summary>> cells;
};

struct SignificanceRow {
  std::string comparison;
  std::string metric;
  WelchResult result;
};

struct Report {
  std::vector<GroupKey> groups;
  std::vector<ReportRow> rows;
  std::vector<SignificanceRow> significance;
  std::vector<std::string> notes;
};

inline std::string metric_row_label(Metric m) {
  switch (m) {
    case Metric::coherence: return "Coherence ↑";
    case Metric::syntactic_complexity: return "Syntactic Complexity ↓";
    case Metric::spache: return "Spache Readability ↓";
    case Metric::toxicity: return "Toxicity ↓";
    case Metric::ppl: return "LM-PPL ↓";
  }
  return "?";
}

// Rows follow the published table order; the two repetition rows come from
// diversity "group" records when supplied.
inline Report build_report(const std::vector<MetricRecord>& records, const std::vector<nlohmann::json>& diversity_groups,
                           const std::vector<std::string>& baselines) {
  Report rep;
  std::map<GroupKey, std::map<std::string, std::vector<double>>> samples;
  for (const auto& s : group_metric_samples(records)) samples[s.group][s.metric] = s.values;
  std::map<GroupKey, const nlohmann::json*> div;
  for (const auto& g : diversity_groups) div[{g.value("experiment", ""), g.value("model", "")}] = &g;

  std::set<GroupKey> keys;
  for (const auto& [k, _] : samples) keys.insert(k);
  for (const auto& [k, _] : div) keys.insert(k);
  rep.groups.assign(keys.begin(), keys.end());

  const Metric order[] = {Metric::coherence, Metric::syntactic_complexity, Metric::spache, Metric::toxicity, Metric::ppl};
  for (auto m : order) {
    ReportRow row{metric_row_label(m), {}};
    for (const auto& g : rep.groups) {
      auto it = samples.find(g);
      if (it == samples.end()) {
        row.cells.emplace_back();
      } else {
        row.cells.emplace_back(summarize(it->second.at(to_string(m))));
      }
    }
    rep.rows.push_back(std::move(row));
  }
  if (!div.empty()) {
    auto summary_from = [](const nlohmann::json& s) -> std::optional<Summary> {
      if (!s.is_object() || !s.contains("mean") || s["mean"].is_null()) return std::nullopt;
      Summary out;
      out.n = s.value("n", 0);
      out.mean = s["mean"].get<double>();
      out.sd = s["sd"].is_null() ? 0.0 : s["sd"].get<double>();
      out.degenerate = out.n < 2;
      return out;
    };
    ReportRow lesson{"Repetition in lessons ↓", {}};
    ReportRow total{"Total repetition ↓", {}};
    for (const auto& g : rep.groups) {
      auto it = div.find(g);
      if (it == div.end()) {
        lesson.cells.emplace_back();
        total.cells.emplace_back();
        continue;
      }
      const auto& j = *it->second;
      lesson.cells.push_back(summary_from(j["lesson_repetition"]["over_stories"]));
      total.cells.push_back(summary_from(j["total_repetition"]));
    }
    rep.rows.push_back(std::move(lesson));
    rep.rows.push_back(std::move(total));
    rep.notes.push_back("Repetition in lessons: SD over per-story lesson Self-BLEU scores.");
  }

  for (const auto& base_label : baselines) {
    auto bt = std::find_if(rep.groups.begin(), rep.groups.end(), [&](const GroupKey& g) { return g.label() == base_label; });
    if (bt == rep.groups.end() || !samples.contains(*bt)) throw ValidationError("report: unknown baseline group '" + base_label + "'");
    for (const auto& g : rep.groups) {
      if (g == *bt || !samples.contains(g)) continue;
      for (auto m : order) {
        const auto& a = samples.at(g).at(to_string(m));
        const auto& b = samples.at(*bt).at(to_string(m));
        if (a.size() < 2 || b.size() < 2) continue;
        rep.significance.push_back({g.label() + " vs " + base_label, to_string(m), significance(a, b)});
      }
    }
  }
  if (!rep.significance.empty())
    rep.notes.push_back("Welch's t-test, two-sided p; Cohen's d uses the pooled SD.");
  return rep;
}

namespace detail {

inline std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < s.size()) {
    text::decode_utf8(s, pos);
    ++n;
  }
  return n;
}

inline std::string pad_right(const std::string& s, std::size_t width) {
  auto w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

inline std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

inline std::string cell_text(const std::optional<Summary>& s) { return s ? format_mean_sd(*s) : "-"; }

inline std::string format_p(double p) { return p < 0.001 ? "<0.001" : fmt("%.3f", p); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string render_aligned(const std::vector<std::vector<std::string>>& table) {
  std::vector<std::size_t> widths;
  for (const auto& row : table) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], display_width(row[c]));
  }
  std::string out;
  for (const auto& row : table) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += c + 1 == row.size() ? row[c] : pad_right(row[c], widths[c]);
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

inline std::string render_report_text(const Report& rep) {
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Metric"};
  for (const auto& g : rep.groups) header.push_back(g.label());
  table.push_back(header);
  for (const auto& row : rep.rows) {
    std::vector<std::string> line{row.label};
    for (const auto& c : row.cells) line.push_back(detail::cell_text(c));
    table.push_back(std::move(line));
  }
  std::string out = "Values are Mean (SD). ↑ higher is better; ↓ lower is better.\n\n";
  out += detail::render_aligned(table);
  if (!rep.significance.empty()) {
    out += "\nSignificance\n\n";
    std::vector<std::vector<std::string>> sig{{"Comparison", "Metric", "t", "df", "p", "d"}};
    for (const auto& s : rep.significance) {
      sig.push_back({s.comparison, s.metric, detail::fmt("%.4f", s.result.t), detail::fmt("%.2f", s.result.df),
                     detail::format_p(s.result.p), detail::fmt("%.4f", s.result.d) + (s.result.degenerate ? " *" : "")});
    }
    out += detail::render_aligned(sig);
  }
  if (!rep.notes.empty()) {
    out += "\n";
    for (const auto& n : rep.notes) out += "Note: " + n + "\n";
    if (std::any_of(rep.significance.begin(), rep.significance.end(), [](const auto& s) { return s.result.degenerate; }))
      out += "Note: * zero variance in both samples; t and d set by convention.\n";
  }
  return out;
}

inline std::string render_report_csv(const Report& rep) {
  std::string out = "metric";
  for (const auto& g : rep.groups) out += "," + detail::csv_field(g.label());
  out += "\n";
  for (const auto& row : rep.rows) {
    out += detail::csv_field(row.label);
    for (const auto& c : row.cells) out += "," + detail::csv_field(detail::cell_text(c));
    out += "\n";
  }
  return out;
}

inline std::string render_significance_csv(const Report& rep) {
  std::string out = "comparison,metric,t,df,p,d,degenerate\n";
  for (const auto& s : rep.significance) {
    out += detail::csv_field(s.comparison) + "," + s.metric + "," + detail::fmt("%.10g", s.result.t) + "," +
           detail::fmt("%.10g", s.result.df) + "," + detail::fmt("%.6e", s.result.p) + "," + detail::fmt("%.10g", s.result.d) +
           "," + (s.result.degenerate ? "true" : "false") + "\n";
  }
  return out;
}

}  // namespace storyeval
