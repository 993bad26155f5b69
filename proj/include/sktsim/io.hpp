#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sktsim/diagnostics.hpp"
#include "sktsim/ensemble.hpp"
#include "sktsim/errors.hpp"
#include "sktsim/version.hpp"

namespace sktsim {

/// Shortest decimal that round-trips to the same binary double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw IoError("cannot parse float: " + s);
  return v;
}

/// FNV-1a over the key-sorted JSON dump, so semantically identical configs
/// (key order permuted) hash identically.
inline std::string config_hash(const nlohmann::json& j) {
  const std::string dump = j.dump(); // nlohmann::json objects iterate in key order
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

struct OutputHeader {
  std::string config_hash;
  uint64_t base_seed = 0;
  std::string version = sktsim::version;
};

// --- diagnostics records --------------------------------------------------------

inline std::string record_to_ndjson(const DiagnosticsRecord& r) {
  std::ostringstream os;
  os << "{\"t\":" << format_double(r.t)
     << ",\"entropy\":" << format_double(r.entropy)
     << ",\"production\":" << format_double(r.production)
     << ",\"mass\":[";
  for (size_t i = 0; i < r.mass.size(); ++i) os << (i ? "," : "") << format_double(r.mass[i]);
  os << "],\"l2_norm\":" << format_double(r.l2_norm)
     << ",\"linf\":" << format_double(r.linf)
     << ",\"sqrt_grad\":[";
  for (size_t i = 0; i < r.sqrt_grad.size(); ++i) os << (i ? "," : "") << format_double(r.sqrt_grad[i]);
  os << "],\"cross_sqrt_grad\":[";
  for (size_t i = 0; i < r.cross_sqrt_grad.size(); ++i)
    os << (i ? "," : "") << format_double(r.cross_sqrt_grad[i]);
  os << "],\"clamp_events\":" << r.clamp_events
     << ",\"segregation\":" << format_double(r.segregation) << "}";
  return os.str();
}

inline DiagnosticsRecord record_from_json(const nlohmann::json& j) {
  DiagnosticsRecord r;
  r.t = j.at("t").get<double>();
  r.entropy = j.at("entropy").get<double>();
  r.production = j.at("production").get<double>();
  r.mass = j.at("mass").get<std::vector<double>>();
  r.l2_norm = j.at("l2_norm").get<double>();
  r.linf = j.at("linf").get<double>();
  r.sqrt_grad = j.at("sqrt_grad").get<std::vector<double>>();
  r.cross_sqrt_grad = j.at("cross_sqrt_grad").get<std::vector<double>>();
  r.clamp_events = j.at("clamp_events").get<long>();
  r.segregation = j.at("segregation").get<double>();
  return r;
}

inline std::string header_comment(const OutputHeader& h) {
  return "config_hash=" + h.config_hash + " base_seed=" + std::to_string(h.base_seed) +
         " version=" + h.version;
}

/// NDJSON: header object first, then one record per line, keys in fixed order.
inline void write_records_ndjson(const std::vector<DiagnosticsRecord>& records,
                                 const std::filesystem::path& path, const OutputHeader& h) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << "{\"type\":\"header\",\"config_hash\":\"" << h.config_hash << "\",\"base_seed\":" << h.base_seed
    << ",\"version\":\"" << h.version << "\"}\n";
  for (const auto& r : records) f << record_to_ndjson(r) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

struct NdjsonRecords {
  OutputHeader header;
  std::vector<DiagnosticsRecord> records;
};

inline NdjsonRecords read_records_ndjson(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  NdjsonRecords out;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (first && j.contains("type") && j["type"] == "header") {
      out.header.config_hash = j.value("config_hash", "");
      out.header.base_seed = j.value("base_seed", 0ULL);
      out.header.version = j.value("version", "");
      first = false;
      continue;
    }
    first = false;
    out.records.push_back(record_from_json(j));
  }
  return out;
}

inline void write_records_csv(const std::vector<DiagnosticsRecord>& records,
                              const std::filesystem::path& path, const OutputHeader& h) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  const int n = records.empty() ? 0 : static_cast<int>(records.front().mass.size());
  const int np = records.empty() ? 0 : static_cast<int>(records.front().cross_sqrt_grad.size());
  f << "# " << header_comment(h) << "\n";
  f << "t,entropy,production";
  for (int i = 0; i < n; ++i) f << ",mass_" << i;
  f << ",l2_norm,linf";
  for (int i = 0; i < n; ++i) f << ",sqrt_grad_" << i;
  for (int q = 0; q < np; ++q) f << ",cross_sqrt_grad_" << q;
  f << ",clamp_events,segregation\n";
  for (const auto& r : records) {
    f << format_double(r.t) << "," << format_double(r.entropy) << "," << format_double(r.production);
    for (double m : r.mass) f << "," << format_double(m);
    f << "," << format_double(r.l2_norm) << "," << format_double(r.linf);
    for (double v : r.sqrt_grad) f << "," << format_double(v);
    for (double v : r.cross_sqrt_grad) f << "," << format_double(v);
    f << "," << r.clamp_events << "," << format_double(r.segregation) << "\n";
  }
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::vector<DiagnosticsRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::string line;
  std::vector<std::string> cols;
  std::vector<DiagnosticsRecord> out;
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == ',') { parts.push_back(cur); cur.clear(); }
      else cur.push_back(c);
    }
    parts.push_back(cur);
    return parts;
  };
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (cols.empty()) { cols = split(line); continue; }
    const auto parts = split(line);
    DiagnosticsRecord r;
    for (size_t k = 0; k < cols.size() && k < parts.size(); ++k) {
      const std::string& c = cols[k];
      if (c == "t") r.t = parse_double(parts[k]);
      else if (c == "entropy") r.entropy = parse_double(parts[k]);
      else if (c == "production") r.production = parse_double(parts[k]);
      else if (c == "l2_norm") r.l2_norm = parse_double(parts[k]);
      else if (c == "linf") r.linf = parse_double(parts[k]);
      else if (c == "clamp_events") r.clamp_events = std::stol(parts[k]);
      else if (c == "segregation") r.segregation = parse_double(parts[k]);
      else if (c.rfind("mass_", 0) == 0) r.mass.push_back(parse_double(parts[k]));
      else if (c.rfind("sqrt_grad_", 0) == 0) r.sqrt_grad.push_back(parse_double(parts[k]));
      else if (c.rfind("cross_sqrt_grad_", 0) == 0) r.cross_sqrt_grad.push_back(parse_double(parts[k]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

// --- ensemble stats ---------------------------------------------------------------

inline std::string stats_to_ndjson(const EnsembleStats& s) {
  std::ostringstream os;
  os << "{\"functional\":\"" << s.functional_name << "\",\"m_paths\":" << s.m_paths
     << ",\"mean\":" << format_double(s.mean) << ",\"variance\":" << format_double(s.variance)
     << ",\"ci95_halfwidth\":" << format_double(s.ci95_halfwidth)
     << ",\"stopped_fraction\":" << format_double(s.stopped_fraction) << "}";
  return os.str();
}

inline void write_stats_ndjson(const std::vector<EnsembleStats>& stats,
                               const std::filesystem::path& path, const OutputHeader& h) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << "{\"type\":\"header\",\"config_hash\":\"" << h.config_hash << "\",\"base_seed\":" << h.base_seed
    << ",\"version\":\"" << h.version << "\"}\n";
  for (const auto& s : stats) f << stats_to_ndjson(s) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

/// Optional debug dump of a Wiener path: one line per node (index, t, W values).
inline void write_path_ndjson(const WienerPath& p, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  for (int k = 0; k <= p.M; ++k) {
    f << "{\"index\":" << k << ",\"t\":" << format_double(p.time(k)) << ",\"W\":[";
    for (int j = 0; j < p.n; ++j) f << (j ? "," : "") << format_double(p.node(k, j));
    f << "]}\n";
  }
}

} // namespace sktsim
