#include "bugloc/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bugloc/errors.hpp"

namespace bugloc {
namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r'))
    --last;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("cannot parse number '" + s + "' in " + context);
  return value;
}

// Shortest decimal that round-trips to the same double.
std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

CounterTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open trace file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "ipc")
    throw ParseError("trace header must end with 'ipc' column: " + path.string());

  CounterTrace trace;
  trace.counter_names.assign(header.begin(), header.end() - 1);
  const size_t cols = header.size();

  std::vector<std::vector<double>> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != cols)
      throw SchemaError("row " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(cols) + " in " + path.string());
    std::vector<double> row(cols);
    for (size_t i = 0; i < cols; ++i)
      row[i] = parse_number(fields[i], path.string() + ":" + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("trace has no data rows: " + path.string());

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(cols - 1);
  trace.samples.resize(n, c);
  trace.ipc.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < c; ++j) trace.samples(r, j) = rows[r][j];
    trace.ipc[r] = rows[r][cols - 1];
  }
  trace.window_cycles = 1;  // placeholder; the manifest stamps the real value
  trace.validate();
  return trace;
}

void write_trace(const CounterTrace& trace, const std::filesystem::path& path) {
  trace.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file " + path.string());
  for (const auto& n : trace.counter_names) out << n << ',';
  out << "ipc\n";
  for (Eigen::Index r = 0; r < trace.steps(); ++r) {
    for (Eigen::Index j = 0; j < trace.counters(); ++j)
      out << format_number(trace.samples(r, j)) << ',';
    out << format_number(trace.ipc[r]) << '\n';
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("manifest JSON parse failure: " + std::string(e.what()));
  }
  try {
    Manifest m;
    m.version = j.at("version").get<int>();
    m.window_cycles = j.at("window_cycles").get<long>();
    for (const auto& t : j.at("traces")) {
      ManifestEntry e;
      e.path = t.at("path").get<std::string>();
      e.workload_id = t.at("workload_id").get<std::string>();
      e.arch_id = t.at("arch_id").get<std::string>();
      e.label = unit_from_string(t.at("label").get<std::string>());
      if (t.contains("bug_id") && !t["bug_id"].is_null())
        e.bug_id = t["bug_id"].get<std::string>();
      m.traces.push_back(std::move(e));
    }
    for (const auto& [arch, s] : j.at("splits").items()) {
      if (s == "train") m.splits[arch] = Split::Train;
      else if (s == "test") m.splits[arch] = Split::Test;
      else throw ManifestError("bad split value '" + s.get<std::string>() + "'");
    }
    for (const auto& [bug, c] : j.at("categories").items()) {
      if (c == "seen") m.categories[bug] = BugCategory::SeenVariation;
      else if (c == "unseen_variation") m.categories[bug] = BugCategory::UnseenVariation;
      else if (c == "unseen_type") m.categories[bug] = BugCategory::UnseenType;
      else throw ManifestError("bad category value '" + c.get<std::string>() + "'");
    }
    if (m.traces.empty()) throw ManifestError("manifest lists no traces");
    if (m.window_cycles <= 0) throw ManifestError("window_cycles must be positive");
    return m;
  } catch (const json::exception& e) {
    throw ManifestError("manifest schema failure: " + std::string(e.what()));
  }
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  json j;
  j["version"] = manifest.version;
  j["window_cycles"] = manifest.window_cycles;
  j["traces"] = json::array();
  for (const auto& t : manifest.traces) {
    json e = {{"path", t.path},
              {"workload_id", t.workload_id},
              {"arch_id", t.arch_id},
              {"label", to_string(t.label)}};
    if (t.bug_id) e["bug_id"] = *t.bug_id;
    j["traces"].push_back(std::move(e));
  }
  j["splits"] = json::object();
  for (const auto& [arch, s] : manifest.splits)
    j["splits"][arch] = (s == Split::Train ? "train" : "test");
  j["categories"] = json::object();
  for (const auto& [bug, c] : manifest.categories) {
    switch (c) {
      case BugCategory::SeenVariation: j["categories"][bug] = "seen"; break;
      case BugCategory::UnseenVariation: j["categories"][bug] = "unseen_variation"; break;
      case BugCategory::UnseenType: j["categories"][bug] = "unseen_type"; break;
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

Dataset load_dataset(const Manifest& manifest, const std::filesystem::path& base_dir) {
  Dataset ds;
  ds.window_cycles = manifest.window_cycles;
  ds.splits = manifest.splits;
  ds.categories = manifest.categories;
  ds.units = all_units();

  for (const auto& e : manifest.traces) {
    if (!manifest.splits.count(e.arch_id))
      throw ManifestError("architecture " + e.arch_id + " has no split assignment");
    std::filesystem::path p = e.path;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    if (!std::filesystem::exists(p))
      throw ManifestError("missing trace file " + p.string());
    CounterTrace t = load_trace(p);
    t.workload_id = e.workload_id;
    t.arch_id = e.arch_id;
    t.label = e.label;
    t.bug_id = e.bug_id;
    t.window_cycles = manifest.window_cycles;
    ds.traces.push_back(std::move(t));
  }

  std::set<std::string> wset;
  for (const auto& t : ds.traces) wset.insert(t.workload_id);
  ds.workloads.assign(wset.begin(), wset.end());

  std::stable_sort(ds.traces.begin(), ds.traces.end(),
                   [](const CounterTrace& a, const CounterTrace& b) {
                     if (a.arch_id != b.arch_id) return a.arch_id < b.arch_id;
                     if (a.workload_id != b.workload_id)
                       return a.workload_id < b.workload_id;
                     return a.bug_id.value_or("") < b.bug_id.value_or("");
                   });
  ds.validate();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(load_manifest(manifest_path), manifest_path.parent_path());
}

}  // namespace bugloc
