#include "condforge/stats.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "condforge/error.hpp"

namespace condforge {

using nlohmann::json;

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

std::map<std::string, double> StatsReport::perspective_fractions() const {
  std::map<std::string, double> out;
  if (!perspective_histogram) return out;
  std::size_t n = 0;
  for (const auto& [k, c] : *perspective_histogram) n += c;
  for (const auto& [k, c] : *perspective_histogram) out[k] = n ? static_cast<double>(c) / n : 0.0;
  return out;
}

std::optional<double> StatsReport::retention() const {
  if (!funnel || !funnel->ingested || !funnel->emitted || *funnel->ingested == 0) return std::nullopt;
  return static_cast<double>(*funnel->emitted) / static_cast<double>(*funnel->ingested);
}

json StatsReport::to_json() const {
  json j{{"total", total}};
  if (perspective_histogram) {
    j["perspective_histogram"] = *perspective_histogram;
    j["perspective_fractions"] = perspective_fractions();
  }
  if (box_histogram) {
    json boxes = json::object();
    for (const auto& [n, c] : *box_histogram) boxes[std::to_string(n)] = c;
    j["box_histogram"] = boxes;
  }
  if (funnel) {
    auto v = [](const std::optional<std::size_t>& x) { return x ? json(*x) : json(nullptr); };
    j["funnel"] = {{"ingested", v(funnel->ingested)},
                   {"post_aesthetic", v(funnel->post_aesthetic)},
                   {"post_geometry", v(funnel->post_geometry)},
                   {"emitted", v(funnel->emitted)}};
  }
  if (const auto r = retention()) {
    j["retention"] = *r;
    j["retention_percent"] = format_percent(*r);
  }
  if (!errors.empty()) {
    j["errors"] = json::array();
    for (const auto& e : errors) j["errors"].push_back({{"line", e.line}, {"message", e.message}});
  }
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

FunnelCounts funnel_from_report_json(const json& report) {
  const json& f = report.contains("funnel") ? report["funnel"] : report;
  if (!f.is_object()) throw Error("report funnel is not an object");
  auto get = [&](const char* key) -> std::optional<std::size_t> {
    if (!f.contains(key) || f[key].is_null()) return std::nullopt;
    if (!f[key].is_number_unsigned() && !(f[key].is_number_integer() && f[key].get<long long>() >= 0)) {
      throw Error(std::string("funnel count '") + key + "' is not a non-negative integer");
    }
    return f[key].get<std::size_t>();
  };
  return {get("ingested"), get("post_aesthetic"), get("post_geometry"), get("emitted")};
}

StatsReport compute_stats(const std::filesystem::path& manifest_path,
                          std::optional<std::filesystem::path> report_path) {
  StatsReport out;
  const auto contents = read_manifest(manifest_path);
  out.errors = contents.errors;
  out.total = contents.entries.size();
  for (const auto& e : contents.entries) {
    if (e.perspective) {
      if (!out.perspective_histogram) out.perspective_histogram.emplace();
      ++(*out.perspective_histogram)[std::string(to_string(*e.perspective))];
    }
    if (e.boxes) {
      if (!out.box_histogram) out.box_histogram.emplace();
      ++(*out.box_histogram)[*e.boxes];
    }
  }

  if (!report_path) {
    const auto sibling = manifest_path.parent_path() / "report.json";
    if (std::filesystem::exists(sibling)) report_path = sibling;
  }
  if (report_path) {
    std::ifstream in(*report_path);
    if (!in) throw Error("cannot open run report " + report_path->string());
    try {
      out.funnel = funnel_from_report_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error("run report " + report_path->string() + ": " + e.what());
    }
    const auto& f = *out.funnel;
    const std::array<std::optional<std::size_t>, 4> chain{f.ingested, f.post_aesthetic, f.post_geometry, f.emitted};
    std::optional<std::size_t> prev;
    for (const auto& c : chain) {
      if (!c) continue;
      if (prev && *c > *prev) out.warnings.push_back("funnel counts increase between stages");
      prev = c;
    }
    if (f.emitted && *f.emitted != out.total) {
      out.warnings.push_back("manifest has " + std::to_string(out.total) + " entries but the report records " +
                             std::to_string(*f.emitted) + " emitted");
    }
  }
  return out;
}

}  // namespace condforge
