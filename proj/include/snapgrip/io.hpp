#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "snapgrip/characteristic.hpp"
#include "snapgrip/continuation.hpp"
#include "snapgrip/fixture_beam.hpp"
#include "snapgrip/grasp_sim.hpp"
#include "snapgrip/hydraulic_network.hpp"
#include "snapgrip/pv_analysis.hpp"

namespace snapgrip::io {

using Json = nlohmann::ordered_json;

std::string tool_version();

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Shortest round-trip decimal form ("nan", "inf", "-inf" for non-finite).
std::string format_number(double v);
/// Inverse of format_number; throws ValidationError naming what on failure.
double parse_number(const std::string& text, const std::string& what);

// ---------------------------------------------------------------------------
// Generic CSV table

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  ///< source line of every row

    /// Column index by name, or nullopt.
    std::optional<std::size_t> column(const std::string& name) const;
    std::size_t require(const std::string& name) const;
};

/// Comma separated, '#' comment lines and blank lines skipped. The first
/// non-comment line is the header when header is set.
CsvTable read_csv(std::istream& in, bool header = true);
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

// ---------------------------------------------------------------------------
// Curves and paths

void write_path_csv(std::ostream& out, const EquilibriumPath& path);
EquilibriumPath read_path_csv(std::istream& in);

void write_characteristic_csv(std::ostream& out, const Characteristic& c);

struct IngestResult {
    Characteristic characteristic;
    std::vector<std::string> warnings;
};

/// Columns V_mm3, p_kPa and optionally stability, u_mm, arc (by header name;
/// a header-less file is read as V, p[, stability]). Duplicate consecutive
/// points are dropped with a warning; missing stability tags are inferred
/// from the curve shape. Throws ValidationError on non-numeric rows,
/// decreasing arc values or fewer than 3 points.
IngestResult ingest_characteristic(std::istream& in, const std::string& name = "ingested");
IngestResult ingest_characteristic(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Analyses

Json bistability_json(const BistabilityReport& r);
Json limit_point_json(const LimitPoint& l);

void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
Json sweep_json(const SweepResult& sweep);

struct SweepRow {
    double angle_deg = 0.0;
    bool ok = false;
    double p_s = 0.0;
    double min_pressure = 0.0;
    double enclosed_area = 0.0;
    double released_energy = 0.0;
    bool has_critical_pressure = false;
    bool has_enclosed_area = false;
    bool has_negative_pressure = false;
    bool bistable = false;
    std::string error;
};
std::vector<SweepRow> read_sweep_csv(std::istream& in);

Json beam_json(const FixtureBeam& beam);
/// Key/value form accepted by beam_from_ini.
void write_beam_ini(std::ostream& out, const FixtureBeam& beam);

// ---------------------------------------------------------------------------
// Network and grasp traces

void write_injection_trace_csv(std::ostream& out, const InjectionTrace& trace,
                               const std::vector<std::string>& node_names);
InjectionTrace read_injection_trace_csv(std::istream& in, std::vector<std::string>* node_names = nullptr);

void write_events_csv(std::ostream& out, const std::vector<SnapEvent>& events);
std::vector<SnapEvent> read_events_csv(std::istream& in);

void write_grasp_trace_csv(std::ostream& out, const GraspTrace& trace);
/// Samples, gap and object flag; events, outcome and summary values are not
/// part of the CSV.
GraspTrace read_grasp_trace_csv(std::istream& in);
Json grasp_summary_json(const GraspTrace& trace);

Json calibration_json(const CalibrationResult& r, const std::vector<CalibrationTarget>& targets);

// ---------------------------------------------------------------------------
// Strict configuration

/// INI document kept together with its exact bytes. Keys are only read
/// after check() has accepted every section and key present.
class Config {
public:
    using Schema = std::map<std::string, std::set<std::string>>;

    static Config parse(std::string text, std::string origin = "<config>");
    static Config load(const std::filesystem::path& path);
    static Config empty() { return parse(""); }

    const std::string& bytes() const { return bytes_; }
    const std::string& origin() const { return origin_; }

    /// Throws ValidationError for any section or key not in the schema.
    /// Section names may end in ".*" to accept any suffix ("node.*").
    void check(const Schema& schema) const;

    bool has_section(const std::string& section) const;
    /// Sections whose name starts with prefix, in file order.
    std::vector<std::string> sections_with_prefix(const std::string& prefix) const;
    std::optional<std::string> get(const std::string& section, const std::string& key) const;

    std::string text(const std::string& section, const std::string& key, const std::string& fallback) const;
    double number(const std::string& section, const std::string& key, double fallback) const;
    long integer(const std::string& section, const std::string& key, long fallback) const;
    bool flag(const std::string& section, const std::string& key, bool fallback) const;
    /// Comma-separated numbers.
    std::vector<double> numbers(const std::string& section, const std::string& key,
                                const std::vector<double>& fallback) const;
    /// The section as flat key = value lines.
    std::string section_text(const std::string& section) const;

private:
    std::string bytes_;
    std::string origin_;
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections_;
};

// ---------------------------------------------------------------------------
// Result bundle

/// Output directory of one command: artifacts plus manifest.json with the
/// command, the SHA-256 of the config bytes, tool version, seed, timestamps
/// and status.
class ResultBundle {
public:
    ResultBundle(std::filesystem::path dir, std::string command, const Config& config, std::uint64_t seed);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& content);
    void write_json(const std::string& name, const Json& value);

    /// Extra manifest fields.
    Json& info() { return info_; }

    /// Writes manifest.json; status is "ok" or an error class.
    void finish(const std::string& status, const std::string& diagnostic = {});

    static Json read_manifest(const std::filesystem::path& dir);

private:
    std::filesystem::path dir_;
    std::string command_;
    std::string config_origin_;
    std::string config_hash_;
    std::uint64_t seed_ = 0;
    std::string started_;
    std::vector<std::string> artifacts_;
    Json info_ = Json::object();
};

std::string utc_timestamp();

}  // namespace snapgrip::io
