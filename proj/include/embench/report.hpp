#pragma once

// Static documentation bundle for a run: index.html plus models.csv and
// correlations.csv.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "embench/analysis.hpp"
#include "embench/sweep.hpp"

namespace embench {

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string hyper_cell(const HyperParams& h, const std::string& field) {
  const json v = to_json(h).at(field);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace detail

inline std::string models_csv(const RunState& state) {
  std::ostringstream out;
  out << "model_id,status";
  for (const auto& f : hyper_field_names()) out << ',' << f;
  for (const auto& m : metric_names()) out << ',' << m;
  out << ",path,trained_at,error\n";
  for (const auto& e : state.entries) {
    out << e.model_id << ',' << to_string(e.status);
    for (const auto& f : hyper_field_names()) out << ',' << detail::csv_field(detail::hyper_cell(e.hyper, f));
    for (const auto& m : metric_names()) {
      out << ',';
      if (auto v = e.metrics.score(m)) out << exact_decimal(*v);
    }
    out << ',' << detail::csv_field(e.model_path) << ',' << e.trained_at << ',' << detail::csv_field(e.error) << '\n';
  }
  return out.str();
}

inline std::vector<Correlation> state_correlations(const RunState& state) {
  std::vector<ModelSummary> pop;
  for (const auto& e : state.entries) {
    if (e.status == Status::Trained) pop.push_back({e.model_id, e.hyper, e.metrics});
  }
  return pairwise_correlations(pop);
}

inline std::string correlations_csv(const std::vector<Correlation>& corr) {
  std::ostringstream out;
  out << "dim_x,dim_y,r,n\n";
  for (const auto& c : corr) {
    out << c.dim_x << ',' << c.dim_y << ',' << (c.r ? exact_decimal(*c.r) : "") << ',' << c.points.size() << '\n';
  }
  return out.str();
}

inline std::string report_html(const RunState& state, const std::vector<Correlation>& corr) {
  std::ostringstream h;
  h << "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Embedding sweep report</title>\n"
    << "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;font-size:13px}"
    << "td,th{border:1px solid #ccc;padding:2px 6px;text-align:right}th{background:#eee}"
    << ".failed{color:#a00}</style></head><body>\n";
  h << "<h1>Embedding sweep report</h1>\n<p>" << state.entries.size() << " models, " << state.count(Status::Trained)
    << " trained, " << state.count(Status::Failed) << " failed; " << state.labels.size()
    << " labels (version " << state.labels.version() << ").</p>\n";
  h << "<h2>Configuration</h2>\n<pre>" << detail::html_escape(state.config.dump(2)) << "</pre>\n";
  h << "<h2>Models</h2>\n<table><tr><th>model</th><th>status</th>";
  for (const auto& f : hyper_field_names()) h << "<th>" << f << "</th>";
  for (const auto& m : metric_names()) h << "<th>" << m << "</th>";
  h << "</tr>\n";
  for (const auto& e : state.entries) {
    h << "<tr" << (e.status == Status::Failed ? " class=\"failed\" title=\"" + detail::html_escape(e.error) + "\"" : "")
      << "><td>" << e.model_id << "</td><td>" << to_string(e.status) << "</td>";
    for (const auto& f : hyper_field_names()) h << "<td>" << detail::html_escape(detail::hyper_cell(e.hyper, f)) << "</td>";
    for (const auto& m : metric_names()) {
      char buf[32] = "";
      if (auto v = e.metrics.score(m)) std::snprintf(buf, sizeof buf, "%.4f", *v);
      h << "<td>" << buf << "</td>";
    }
    h << "</tr>\n";
  }
  h << "</table>\n<h2>Correlations</h2>\n<table><tr><th>x</th><th>y</th><th>r</th><th>n</th></tr>\n";
  for (const auto& c : corr) {
    if (c.dim_x == c.dim_y) continue;
    char buf[32] = "";
    if (c.r) std::snprintf(buf, sizeof buf, "%.3f", *c.r);
    h << "<tr><td>" << c.dim_x << "</td><td>" << c.dim_y << "</td><td>" << buf << "</td><td>" << c.points.size()
      << "</td></tr>\n";
  }
  h << "</table>\n<h2>Labels</h2>\n<table><tr><th>word a</th><th>word b</th><th>relation</th><th>created</th></tr>\n";
  for (const auto& l : state.labels.list()) {
    h << "<tr><td>" << detail::html_escape(l.word_a) << "</td><td>" << detail::html_escape(l.word_b) << "</td><td>"
      << to_string(l.relation) << "</td><td>" << l.created_at << "</td></tr>\n";
  }
  h << "</table>\n</body></html>\n";
  return h.str();
}

/// Writes index.html, models.csv and correlations.csv into `dir`.
inline void write_report(const RunState& state, const fs::path& dir) {
  fs::create_directories(dir);
  const auto corr = state_correlations(state);
  write_file_atomic(dir / "models.csv", models_csv(state));
  write_file_atomic(dir / "correlations.csv", correlations_csv(corr));
  write_file_atomic(dir / "index.html", report_html(state, corr));
}

}  // namespace embench
