#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtscal/calibrate.hpp"
#include "rtscal/errors.hpp"
#include "rtscal/metrics.hpp"
#include "rtscal/se3.hpp"
#include "rtscal/simulate.hpp"
#include "rtscal/types.hpp"
#include "rtscal/version.hpp"

namespace rtscal {

// ---------------------------------------------------------------------------
// Text utilities
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(trim(s.substr(pos)));
      break;
    }
    out.push_back(trim(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_int(const std::string& s, long& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

/// Whitespace-separated doubles; throws on any malformed token.
inline std::vector<double> parse_double_list(const std::string& s,
                                             const std::string& what) {
  std::vector<double> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) {
    double v = 0.0;
    if (!parse_double(tok, v)) throw IoError("malformed number in " + what);
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Shortest decimal that round-trips the double bit-exactly (17 significant
/// digits).
inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// FNV-1a 64-bit digest; used to fingerprint input files in run manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string digest_hex(std::string_view bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// key = value documents (configs, reports, truth files)
// ---------------------------------------------------------------------------
//
// Lines of `key = value` grouped under optional `[section]` headers; `#`
// starts a comment.  Keys may repeat (dropouts, waypoints, ...).

struct KeyValueDoc {
  struct Entry {
    std::string section;  ///< "" before the first header
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;

  [[nodiscard]] const std::string* find(std::string_view section,
                                        std::string_view key) const {
    for (const auto& e : entries)
      if (e.section == section && e.key == key) return &e.value;
    return nullptr;
  }

  [[nodiscard]] std::vector<std::string> all(std::string_view section,
                                             std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (e.section == section && e.key == key) out.push_back(e.value);
    return out;
  }

  [[nodiscard]] bool has_section(std::string_view section) const {
    for (const auto& e : entries)
      if (e.section == section) return true;
    return false;
  }

  [[nodiscard]] const std::string& require(std::string_view section,
                                           std::string_view key) const {
    const std::string* v = find(section, key);
    if (v == nullptr)
      throw IoError("missing key '" + std::string(key) + "'" +
                    (section.empty() ? "" : " in section [" +
                                                std::string(section) + "]"));
    return *v;
  }

  [[nodiscard]] double require_double(std::string_view section,
                                      std::string_view key) const {
    double v = 0.0;
    if (!detail::parse_double(require(section, key), v))
      throw IoError("key '" + std::string(key) + "' is not a number");
    return v;
  }
};

inline KeyValueDoc parse_key_values(std::istream& in) {
  KeyValueDoc doc;
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[' && t.back() == ']') {
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError("malformed line (expected key = value): '" + t + "'");
    doc.entries.push_back({section, detail::trim(t.substr(0, eq)),
                           detail::trim(t.substr(eq + 1))});
  }
  return doc;
}

inline KeyValueDoc parse_key_values(const std::string& text) {
  std::istringstream ss(text);
  return parse_key_values(ss);
}

// ---------------------------------------------------------------------------
// Measurement logs
// ---------------------------------------------------------------------------

inline constexpr const char* kLogHeader =
    "time_s,azimuth_deg,elevation_deg,range_m,prism_id";

struct ParsedLog {
  MeasurementLog log;
  std::size_t malformed_rows = 0;
  std::size_t collapsed_duplicates = 0;
};

/// Parses a per-station tracking CSV.  Angles are degrees in files and
/// radians in memory.  Records come out sorted by time with duplicate
/// timestamps (dt < 1e-6 s) collapsed, keeping the first.  An unexpected
/// header or more than 10% malformed rows is a hard error.
inline ParsedLog parse_measurement_log(std::istream& in, int station_id) {
  std::string line;
  if (!std::getline(in, line))
    throw IoError("measurement log: empty stream");
  {
    std::string header = detail::trim(line);
    std::erase(header, ' ');
    if (header != kLogHeader)
      throw IoError("measurement log: unexpected header '" + line +
                    "' (want '" + std::string(kLogHeader) + "')");
  }

  ParsedLog out;
  out.log.station_id = station_id;
  std::size_t data_rows = 0;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    ++data_rows;
    const std::vector<std::string> f = detail::split(t, ',');
    double time = 0.0, az_deg = 0.0, el_deg = 0.0, range = 0.0;
    long prism = 0;
    if (f.size() != 5 || !detail::parse_double(f[0], time) ||
        !detail::parse_double(f[1], az_deg) ||
        !detail::parse_double(f[2], el_deg) ||
        !detail::parse_double(f[3], range) || !detail::parse_int(f[4], prism)) {
      ++out.malformed_rows;
      continue;
    }
    PolarMeasurement m;
    m.time_s = time;
    m.azimuth_rad = wrap_two_pi(deg_to_rad(az_deg));
    m.elevation_rad = deg_to_rad(el_deg);
    m.range_m = range;
    m.station_id = station_id;
    m.prism_id = static_cast<int>(prism);
    if (!m.valid() || prism < 1 || prism > 3) {
      ++out.malformed_rows;
      continue;
    }
    out.log.records.push_back(m);
  }
  if (data_rows == 0) throw IoError("measurement log: no data rows");
  if (out.malformed_rows * 10 > data_rows)
    throw IoError("measurement log: " + std::to_string(out.malformed_rows) +
                  " of " + std::to_string(data_rows) +
                  " rows malformed; wrong file?");
  if (out.log.records.empty())
    throw IoError("measurement log: no valid rows");

  std::stable_sort(out.log.records.begin(), out.log.records.end(),
                   [](const PolarMeasurement& a, const PolarMeasurement& b) {
                     return a.time_s < b.time_s;
                   });
  std::vector<PolarMeasurement> unique;
  unique.reserve(out.log.records.size());
  for (const auto& m : out.log.records) {
    if (!unique.empty() && m.time_s - unique.back().time_s < 1e-6) {
      ++out.collapsed_duplicates;
      continue;
    }
    unique.push_back(m);
  }
  out.log.records = std::move(unique);
  return out;
}

inline void write_measurement_log(const MeasurementLog& log,
                                  std::ostream& out) {
  out << kLogHeader << "\n";
  for (const auto& m : log.records)
    out << format_g17(m.time_s) << ',' << format_g17(rad_to_deg(m.azimuth_rad))
        << ',' << format_g17(rad_to_deg(m.elevation_rad)) << ','
        << format_g17(m.range_m) << ',' << m.prism_id << "\n";
  if (!out) throw IoError("measurement log: write failed");
}

// ---------------------------------------------------------------------------
// GCP files
// ---------------------------------------------------------------------------

inline constexpr const char* kGcpHeader = "label,x_m,y_m,z_m";

/// Parses a labeled control-point CSV.  Duplicate labels and empty files are
/// hard errors; the malformed-row policy matches the measurement logs.
inline GcpSet parse_gcp_file(std::istream& in, std::string frame_id) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("gcp file: empty stream");
  {
    std::string header = detail::trim(line);
    std::erase(header, ' ');
    if (header != kGcpHeader)
      throw IoError("gcp file: unexpected header '" + line + "' (want '" +
                    std::string(kGcpHeader) + "')");
  }
  GcpSet set;
  set.frame_id = std::move(frame_id);
  std::size_t data_rows = 0, malformed = 0;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    ++data_rows;
    const std::vector<std::string> f = detail::split(t, ',');
    Eigen::Vector3d p;
    if (f.size() != 4 || f[0].empty() || !detail::parse_double(f[1], p.x()) ||
        !detail::parse_double(f[2], p.y()) ||
        !detail::parse_double(f[3], p.z()) || !p.allFinite()) {
      ++malformed;
      continue;
    }
    if (set.find(f[0]) != nullptr)
      throw IoError("gcp file: duplicate label '" + f[0] + "'");
    set.points.push_back({f[0], p});
  }
  if (data_rows == 0) throw IoError("gcp file: no data rows");
  if (malformed * 10 > data_rows)
    throw IoError("gcp file: too many malformed rows");
  if (set.points.empty()) throw IoError("gcp file: no valid rows");
  return set;
}

inline void write_gcp_file(const GcpSet& set, std::ostream& out) {
  out << kGcpHeader << "\n";
  for (const auto& g : set.points)
    out << g.label << ',' << format_g17(g.position.x()) << ','
        << format_g17(g.position.y()) << ',' << format_g17(g.position.z())
        << "\n";
  if (!out) throw IoError("gcp file: write failed");
}

// ---------------------------------------------------------------------------
// Inter-prism distances
// ---------------------------------------------------------------------------

/// Reads alpha_m / beta_m / gamma_m from key=value lines.  Unknown keys and
/// section headers are ignored, so a scene truth file works here too.
inline InterPrismDistances parse_distances_file(std::istream& in) {
  const KeyValueDoc doc = parse_key_values(in);
  InterPrismDistances d;
  for (const char* key : {"alpha_m", "beta_m", "gamma_m"}) {
    double found = 0.0;
    std::size_t hits = 0;
    for (const auto& e : doc.entries) {
      if (e.key != key) continue;
      ++hits;
      if (!detail::parse_double(e.value, found))
        throw IoError(std::string("distances: '") + key + "' is not a number");
    }
    if (hits == 0)
      throw IoError(std::string("distances: missing key '") + key + "'");
    if (hits > 1)
      throw IoError(std::string("distances: duplicate key '") + key + "'");
    if (key[0] == 'a') d.alpha_m = found;
    if (key[0] == 'b') d.beta_m = found;
    if (key[0] == 'g') d.gamma_m = found;
  }
  d.require_valid();
  return d;
}

inline void write_distances_file(const InterPrismDistances& d,
                                 std::ostream& out) {
  d.require_valid();
  out << "alpha_m = " << format_g17(d.alpha_m) << "\n"
      << "beta_m = " << format_g17(d.beta_m) << "\n"
      << "gamma_m = " << format_g17(d.gamma_m) << "\n";
  if (!out) throw IoError("distances: write failed");
}

// ---------------------------------------------------------------------------
// Transforms in documents
// ---------------------------------------------------------------------------

namespace detail {

inline void write_transform_section(std::ostream& out,
                                    const std::string& section,
                                    const RigidTransform& t) {
  out << "[" << section << "]\n";
  if (!t.from_frame.empty()) out << "from = " << t.from_frame << "\n";
  if (!t.to_frame.empty()) out << "to = " << t.to_frame << "\n";
  const Eigen::Matrix4d m = t.matrix();
  for (int r = 0; r < 4; ++r) {
    out << "row" << r << " =";
    for (int c = 0; c < 4; ++c) out << ' ' << format_g17(m(r, c));
    out << "\n";
  }
  if (t.yaw_only()) {
    const Twist xi = log_map(t);
    out << "twist_rho_m = " << format_g17(xi.rho.x()) << ' '
        << format_g17(xi.rho.y()) << ' ' << format_g17(xi.rho.z()) << "\n";
    out << "twist_phi_rad = " << format_g17(xi.phi) << "\n";
  }
  out << "\n";
}

inline RigidTransform parse_transform_section(const KeyValueDoc& doc,
                                              const std::string& section) {
  RigidTransform t;
  if (const std::string* v = doc.find(section, "from")) t.from_frame = *v;
  if (const std::string* v = doc.find(section, "to")) t.to_frame = *v;
  for (int r = 0; r < 3; ++r) {
    const std::vector<double> row = parse_double_list(
        doc.require(section, "row" + std::to_string(r)), section);
    if (row.size() != 4)
      throw IoError(section + ": row" + std::to_string(r) +
                    " must have 4 entries");
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = row[static_cast<std::size_t>(c)];
    t.translation(r) = row[3];
  }
  if (!t.orthonormal(1e-6))
    throw IoError(section + ": rotation block is not orthonormal");
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// Everything needed to reproduce a run bit-for-bit.  Timestamps refer to
/// the data's own time axis; wall-clock time is deliberately absent so that
/// identical runs produce identical bytes.
struct RunManifest {
  std::string command;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> config_snapshot;
  std::vector<std::pair<std::string, std::string>> input_digests;
  double data_time_start_s = 0.0;
  double data_time_end_s = 0.0;
};

inline void write_manifest(const RunManifest& m, std::ostream& out) {
  out << "[manifest]\n";
  out << "tool = rtscal " << kVersion << "\n";
  out << "command = " << m.command << "\n";
  if (m.seed) out << "seed = " << *m.seed << "\n";
  out << "data_time_start_s = " << format_g17(m.data_time_start_s) << "\n";
  out << "data_time_end_s = " << format_g17(m.data_time_end_s) << "\n";
  for (const auto& [name, digest] : m.input_digests)
    out << "input." << name << " = " << digest << "\n";
  out << "\n";
  if (!m.config_snapshot.empty()) {
    out << "[config]\n";
    for (const auto& [key, value] : m.config_snapshot)
      out << key << " = " << value << "\n";
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Calibration reports
// ---------------------------------------------------------------------------

inline constexpr const char* kReportFormat = "rtscal-report-v1";

namespace detail {

inline bool result_finite(const CalibrationResult& r) {
  if (!std::isfinite(r.final_cost_m2)) return false;
  if (!r.t_12.rotation.allFinite() || !r.t_12.translation.allFinite())
    return false;
  if (!r.t_13.rotation.allFinite() || !r.t_13.translation.allFinite())
    return false;
  for (double x : r.residuals_m)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// Writes the structured result document.  Transforms round-trip bit-exactly
/// through the 17-digit decimal fields.  Refuses non-finite results.
inline void write_calibration_report(
    const CalibrationResult& result, std::ostream& out,
    const std::vector<MetricReport>& metrics = {},
    const RunManifest* manifest = nullptr) {
  if (!detail::result_finite(result))
    throw ConfigError("calibration report: refusing to write non-finite result");
  out << "# rtscal calibration report\n";
  out << "format = " << kReportFormat << "\n\n";
  out << "[result]\n";
  out << "method = " << result.method << "\n";
  out << "converged = " << (result.converged ? "true" : "false") << "\n";
  out << "validation = " << to_string(result.validation) << "\n";
  out << "iterations = " << result.iterations << "\n";
  out << "final_cost_m2 = " << format_g17(result.final_cost_m2) << "\n";
  out << "residual_count = " << result.residuals_m.size() << "\n";
  if (!result.residuals_m.empty()) {
    out << "residual_median_m = " << format_g17(median(result.residuals_m))
        << "\n";
    out << "residual_iqr_m = " << format_g17(iqr(result.residuals_m)) << "\n";
    out << "residual_max_m = "
        << format_g17(*std::max_element(result.residuals_m.begin(),
                                        result.residuals_m.end()))
        << "\n";
  }
  if (!result.cost_history.empty()) {
    out << "cost_history =";
    for (double c : result.cost_history) out << ' ' << format_g17(c);
    out << "\n";
  }
  out << "\n";
  detail::write_transform_section(out, "transform.t_12", result.t_12);
  detail::write_transform_section(out, "transform.t_13", result.t_13);
  if (result.world_poses) {
    for (int s = 0; s < 3; ++s)
      detail::write_transform_section(
          out, "transform.world_from_station" + std::to_string(s + 1),
          (*result.world_poses)[static_cast<std::size_t>(s)]);
  }
  for (const auto& m : metrics) {
    out << "[metric." << m.metric << "]\n";
    out << "count = " << m.count << "\n";
    out << "median_m = " << format_g17(m.median_m) << "\n";
    out << "iqr_m = " << format_g17(m.iqr_m) << "\n";
    if (m.skipped > 0) out << "skipped = " << m.skipped << "\n";
    out << "\n";
  }
  if (manifest != nullptr) write_manifest(*manifest, out);
  if (!out) throw IoError("calibration report: write failed");
}

struct MetricSummary {
  std::size_t count = 0;
  double median_m = 0.0;
  double iqr_m = 0.0;
};

struct ParsedReport {
  CalibrationResult result;
  std::map<std::string, MetricSummary> metrics;
};

inline ParsedReport parse_calibration_report(std::istream& in) {
  const KeyValueDoc doc = parse_key_values(in);
  if (const std::string* f = doc.find("", "format");
      f == nullptr || *f != kReportFormat)
    throw IoError("calibration report: missing or unknown format marker");

  ParsedReport out;
  CalibrationResult& r = out.result;
  r.method = doc.require("result", "method");
  r.converged = doc.require("result", "converged") == "true";
  r.iterations = static_cast<int>(doc.require_double("result", "iterations"));
  r.final_cost_m2 = doc.require_double("result", "final_cost_m2");
  const std::string& v = doc.require("result", "validation");
  r.validation = v == "validated"    ? Validation::validated
                 : v == "degenerate" ? Validation::degenerate
                                     : Validation::unvalidated;
  r.t_12 = detail::parse_transform_section(doc, "transform.t_12");
  r.t_13 = detail::parse_transform_section(doc, "transform.t_13");
  if (doc.has_section("transform.world_from_station1")) {
    std::array<RigidTransform, 3> poses;
    for (int s = 0; s < 3; ++s)
      poses[static_cast<std::size_t>(s)] = detail::parse_transform_section(
          doc, "transform.world_from_station" + std::to_string(s + 1));
    r.world_poses = poses;
  }
  for (const auto& e : doc.entries) {
    if (e.section.rfind("metric.", 0) != 0) continue;
    MetricSummary& m = out.metrics[e.section.substr(7)];
    double val = 0.0;
    if (!detail::parse_double(e.value, val)) continue;
    if (e.key == "count") m.count = static_cast<std::size_t>(val);
    if (e.key == "median_m") m.median_m = val;
    if (e.key == "iqr_m") m.iqr_m = val;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene truth files
// ---------------------------------------------------------------------------

inline constexpr const char* kTruthFormat = "rtscal-truth-v1";

/// Writes ground truth (transforms, distances, injected-fault index) plus the
/// run manifest for a simulated scene.  The [delta] section makes the file
/// directly usable wherever an inter-prism distances file is expected.
inline void write_truth_file(const GroundTruth& truth, std::ostream& out,
                             const RunManifest* manifest = nullptr) {
  out << "# rtscal scene truth\n";
  out << "format = " << kTruthFormat << "\n\n";
  if (manifest != nullptr) write_manifest(*manifest, out);
  out << "[delta]\n";
  out << "alpha_m = " << format_g17(truth.delta.alpha_m) << "\n";
  out << "beta_m = " << format_g17(truth.delta.beta_m) << "\n";
  out << "gamma_m = " << format_g17(truth.delta.gamma_m) << "\n\n";
  detail::write_transform_section(out, "truth.world_from_station1",
                                  truth.world_from_station1);
  detail::write_transform_section(out, "truth.t_12", truth.t_12);
  detail::write_transform_section(out, "truth.t_13", truth.t_13);
  out << "[outliers]\n";
  out << "count = " << truth.outliers.size() << "\n";
  for (const auto& o : truth.outliers)
    out << "injected = " << o.station_id << ' ' << o.record_index << ' '
        << format_g17(o.time_s) << "\n";
  if (!out) throw IoError("truth file: write failed");
}

struct ParsedTruth {
  RigidTransform world_from_station1, t_12, t_13;
  InterPrismDistances delta;
  std::size_t outlier_count = 0;
};

inline ParsedTruth parse_truth_file(std::istream& in) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const KeyValueDoc doc = parse_key_values(text);
  if (const std::string* f = doc.find("", "format");
      f == nullptr || *f != kTruthFormat)
    throw IoError("truth file: missing or unknown format marker");
  ParsedTruth out;
  out.world_from_station1 =
      detail::parse_transform_section(doc, "truth.world_from_station1");
  out.t_12 = detail::parse_transform_section(doc, "truth.t_12");
  out.t_13 = detail::parse_transform_section(doc, "truth.t_13");
  {
    std::istringstream again(text);
    out.delta = parse_distances_file(again);
  }
  if (const std::string* c = doc.find("outliers", "count"))
    out.outlier_count = static_cast<std::size_t>(std::stoul(*c));
  return out;
}

// ---------------------------------------------------------------------------
// Synced-trajectory CSV (preprocess subcommand output)
// ---------------------------------------------------------------------------

inline constexpr const char* kSyncedHeader =
    "time_s,interval,x1_m,y1_m,z1_m,x2_m,y2_m,z2_m,x3_m,y3_m,z3_m";

inline void write_synced_csv(const SyncedTrajectories& synced,
                             std::ostream& out) {
  out << kSyncedHeader << "\n";
  std::size_t seg = 0;
  for (std::size_t j = 0; j < synced.size(); ++j) {
    while (seg + 1 < synced.segment_start.size() &&
           j >= synced.segment_start[seg + 1])
      ++seg;
    out << format_g17(synced.times_s[j]) << ',' << seg;
    for (int s = 0; s < 3; ++s)
      for (int c = 0; c < 3; ++c)
        out << ',' << format_g17(synced.positions[static_cast<std::size_t>(s)][j](c));
    out << "\n";
  }
  if (!out) throw IoError("synced csv: write failed");
}

/// Raw metric samples, one column per metric, padded rows absent (long form).
inline void write_metric_samples_csv(const std::vector<MetricReport>& metrics,
                                     std::ostream& out) {
  out << "metric,sample_index,residual_m\n";
  for (const auto& m : metrics)
    for (std::size_t i = 0; i < m.samples_m.size(); ++i)
      out << m.metric << ',' << i << ',' << format_g17(m.samples_m[i]) << "\n";
  if (!out) throw IoError("metric samples csv: write failed");
}

}  // namespace rtscal
