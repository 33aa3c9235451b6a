#include "snapgrip/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "snapgrip/error.hpp"

namespace snapgrip::io {

std::string tool_version() { return "0.4.0"; }

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_number(const std::string& text, const std::string& what) {
    std::string t = text;
    t.erase(0, t.find_first_not_of(" \t\r"));
    t.erase(t.find_last_not_of(" \t\r") + 1);
    if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t[0] == '+') ++first;
    const auto r = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
        throw ValidationError(what + ": expected a number, got '" + text + "'");
    }
    return v;
}

namespace {

std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    const auto end = s.find_last_not_of(" \t\r");
    s.erase(end == std::string::npos ? 0 : end + 1);
    return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string flag_text(bool b) { return b ? "1" : "0"; }

bool parse_flag(const std::string& s, const std::string& what) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw ValidationError(what + ": expected 0/1, got '" + s + "'");
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line); }

}  // namespace

// ---------------------------------------------------------------------------

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t CsvTable::require(const std::string& name) const {
    if (auto c = column(name)) return *c;
    throw ValidationError("CSV: missing column '" + name + "'");
}

CsvTable read_csv(std::istream& in, bool header) {
    CsvTable t;
    std::string line;
    std::size_t n = 0;
    bool have_header = !header;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto cells = split(s, ',');
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (!t.header.empty() && cells.size() != t.header.size()) {
            throw ValidationError("CSV " + at_line(n) + ": expected " + std::to_string(t.header.size()) +
                                  " columns, got " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
        t.lines.push_back(n);
    }
    return t;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
    }
    out << '\n';
}

// ---------------------------------------------------------------------------
// Paths and characteristics

void write_path_csv(std::ostream& out, const EquilibriumPath& path) {
    out << "# equilibrium path; reference_volume_mm3=" << format_number(path.reference_volume)
        << "; termination=" << to_string(path.termination) << '\n';
    write_csv_row(out, {"arc", "V_mm3", "dV_mm3", "p_kPa", "dVds_mm3", "dpds_kPa", "energy_kPa_mm3", "residual",
                        "stability", "negative_modes", "limit"});
    for (const auto& s : path.samples) {
        write_csv_row(out, {format_number(s.arc_length), format_number(s.volume),
                            format_number(s.volume - path.reference_volume), format_number(s.pressure),
                            format_number(s.dvds), format_number(s.dpds), format_number(s.energy),
                            format_number(s.residual), to_string(s.stability), std::to_string(s.negative_modes),
                            flag_text(s.is_limit_point)});
    }
}

EquilibriumPath read_path_csv(std::istream& in) {
    std::string first;
    std::getline(in, first);
    EquilibriumPath path;
    path.termination = Termination::Ingested;
    const auto ref = first.find("reference_volume_mm3=");
    const CsvTable t = read_csv(in);
    const auto c_arc = t.require("arc"), c_v = t.require("V_mm3"), c_p = t.require("p_kPa");
    const auto c_dv = t.require("dVds_mm3"), c_dp = t.require("dpds_kPa"), c_e = t.require("energy_kPa_mm3");
    const auto c_r = t.require("residual"), c_s = t.require("stability"), c_n = t.require("negative_modes");
    const auto c_l = t.require("limit");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::string where = "path CSV " + at_line(t.lines[i]);
        PathSample s;
        s.arc_length = parse_number(r[c_arc], where);
        s.volume = parse_number(r[c_v], where);
        s.pressure = parse_number(r[c_p], where);
        s.dvds = parse_number(r[c_dv], where);
        s.dpds = parse_number(r[c_dp], where);
        s.energy = parse_number(r[c_e], where);
        s.residual = parse_number(r[c_r], where);
        s.stability = stability_from_string(r[c_s]);
        s.negative_modes = static_cast<int>(parse_number(r[c_n], where));
        s.is_limit_point = parse_flag(r[c_l], where);
        path.samples.push_back(std::move(s));
    }
    if (ref != std::string::npos) {
        const auto start = ref + std::string("reference_volume_mm3=").size();
        path.reference_volume = parse_number(first.substr(start, first.find(';', start) - start), "path reference");
    } else if (!path.samples.empty()) {
        path.reference_volume = path.samples.front().volume;
    }
    return path;
}

void write_characteristic_csv(std::ostream& out, const Characteristic& c) {
    out << "# characteristic " << c.name << '\n';
    std::vector<std::string> head{"V_mm3", "p_kPa", "stability"};
    if (c.has_displacement()) head.push_back("u_mm");
    write_csv_row(out, head);
    for (std::size_t k = 0; k < c.points(); ++k) {
        std::vector<std::string> row{format_number(c.volume[k]), format_number(c.pressure[k]),
                                     to_string(c.stability[k])};
        if (c.has_displacement()) row.push_back(format_number(c.displacement[k]));
        write_csv_row(out, row);
    }
}

IngestResult ingest_characteristic(std::istream& in, const std::string& name) {
    CsvTable t = read_csv(in, false);
    if (t.rows.empty()) throw ValidationError("characteristic '" + name + "': no data rows");
    std::size_t c_v = 0, c_p = 1;
    std::optional<std::size_t> c_s, c_u, c_arc;
    bool has_header = false;
    {
        double probe = 0.0;
        const std::string& cell = t.rows.front().front();
        const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), probe);
        has_header = r.ec != std::errc() && cell != "nan" && cell != "inf";
    }
    const std::size_t first_row = has_header ? 1 : 0;
    if (has_header) {
        CsvTable h;
        h.header = t.rows.front();
        c_v = h.require("V_mm3");
        c_p = h.require("p_kPa");
        c_s = h.column("stability");
        c_u = h.column("u_mm");
        c_arc = h.column("arc");
    } else if (t.rows.front().size() >= 3) {
        c_s = 2;
    }
    const std::size_t width = t.rows.front().size();

    IngestResult res;
    Characteristic& c = res.characteristic;
    c.name = name;
    std::vector<double> arc;
    bool tagged = c_s.has_value();
    for (std::size_t i = first_row; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::string where = "characteristic '" + name + "' " + at_line(t.lines[i]);
        if (r.size() != width) throw ValidationError(where + ": inconsistent column count");
        const double v = parse_number(r[c_v], where + " V_mm3");
        const double p = parse_number(r[c_p], where + " p_kPa");
        if (!std::isfinite(v) || !std::isfinite(p)) throw ValidationError(where + ": non-finite value");
        if (c_arc) {
            const double a = parse_number(r[*c_arc], where + " arc");
            if (!arc.empty() && !(a > arc.back())) {
                throw ValidationError(where + ": arc samples must be strictly increasing");
            }
            arc.push_back(a);
        }
        if (!c.volume.empty() && v == c.volume.back() && p == c.pressure.back()) {
            res.warnings.push_back(where + ": duplicate of the previous point dropped");
            continue;
        }
        c.volume.push_back(v);
        c.pressure.push_back(p);
        if (tagged) {
            try {
                c.stability.push_back(stability_from_string(r[*c_s]));
            } catch (const std::exception&) {
                throw ValidationError(where + ": unknown stability tag '" + r[*c_s] + "'");
            }
        }
        if (c_u) c.displacement.push_back(parse_number(r[*c_u], where + " u_mm"));
    }
    if (c.volume.size() < 3) {
        throw ValidationError("characteristic '" + name + "': at least 3 distinct points required, got " +
                              std::to_string(c.volume.size()));
    }
    if (!tagged) c.stability = infer_stability(c.volume);
    c.validate();
    return res;
}

IngestResult ingest_characteristic(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open characteristic file '" + path.string() + "'");
    return ingest_characteristic(in, path.stem().string());
}

// ---------------------------------------------------------------------------
// Analyses

Json limit_point_json(const LimitPoint& l) {
    return Json{{"kind", to_string(l.kind)},         {"maximum", l.maximum},
                {"volume_mm3", l.volume},            {"pressure_kPa", l.pressure},
                {"arc_length", l.arc_length},        {"energy_kPa_mm3", l.energy},
                {"path_index", l.path_index}};
}

Json bistability_json(const BistabilityReport& r) {
    Json limits = Json::array();
    for (const auto& l : r.limit_points) limits.push_back(limit_point_json(l));
    Json jumps = Json::array();
    for (const auto& j : r.jumps) {
        jumps.push_back(Json{{"volume_mm3", j.volume},
                             {"pressure_before_kPa", j.pressure_before},
                             {"pressure_after_kPa", j.pressure_after}});
    }
    return Json{{"bistable", r.bistable()},
                {"has_critical_pressure", r.has_critical_pressure},
                {"p_s_kPa", r.p_s},
                {"has_enclosed_area", r.has_enclosed_area},
                {"enclosed_area_kPa_mm3", r.enclosed_area},
                {"has_negative_pressure", r.has_negative_pressure},
                {"min_pressure_kPa", r.min_pressure},
                {"released_energy_kPa_mm3", r.released_energy},
                {"limit_points", limits},
                {"jumps", jumps}};
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    write_csv_row(out, {"angle_deg", "ok", "p_s_kPa", "min_pressure_kPa", "enclosed_area_kPa_mm3",
                        "released_energy_kPa_mm3", "has_critical_pressure", "has_enclosed_area",
                        "has_negative_pressure", "bistable", "error"});
    for (const auto& e : sweep.entries) {
        const auto& r = e.report;
        std::string err = e.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        write_csv_row(out, {format_number(e.angle_deg), flag_text(e.ok), format_number(r.p_s),
                            format_number(r.min_pressure), format_number(r.enclosed_area),
                            format_number(r.released_energy), flag_text(r.has_critical_pressure),
                            flag_text(r.has_enclosed_area), flag_text(r.has_negative_pressure),
                            flag_text(r.bistable()), err});
    }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
    const CsvTable t = read_csv(in);
    std::vector<SweepRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::string where = "sweep CSV " + at_line(t.lines[i]);
        SweepRow s;
        s.angle_deg = parse_number(r[t.require("angle_deg")], where);
        s.ok = parse_flag(r[t.require("ok")], where);
        s.p_s = parse_number(r[t.require("p_s_kPa")], where);
        s.min_pressure = parse_number(r[t.require("min_pressure_kPa")], where);
        s.enclosed_area = parse_number(r[t.require("enclosed_area_kPa_mm3")], where);
        s.released_energy = parse_number(r[t.require("released_energy_kPa_mm3")], where);
        s.has_critical_pressure = parse_flag(r[t.require("has_critical_pressure")], where);
        s.has_enclosed_area = parse_flag(r[t.require("has_enclosed_area")], where);
        s.has_negative_pressure = parse_flag(r[t.require("has_negative_pressure")], where);
        s.bistable = parse_flag(r[t.require("bistable")], where);
        s.error = r[t.require("error")];
        out.push_back(std::move(s));
    }
    return out;
}

Json sweep_json(const SweepResult& sweep) {
    Json entries = Json::array();
    for (const auto& e : sweep.entries) {
        Json j{{"angle_deg", e.angle_deg}, {"ok", e.ok}};
        if (e.ok) {
            j["report"] = bistability_json(e.report);
        } else {
            j["error"] = e.error;
        }
        entries.push_back(std::move(j));
    }
    Json out{{"entries", entries}};
    out["recommended_angle_deg"] = sweep.recommended_angle ? Json(*sweep.recommended_angle) : Json(nullptr);
    out["note"] = sweep.note;
    return out;
}

Json beam_json(const FixtureBeam& beam) {
    Json segs = Json::array();
    for (const auto& s : beam.segments) {
        segs.push_back(Json{{"length_mm", s.length},
                            {"second_moment_mm4", s.second_moment},
                            {"inclination_deg", s.inclination * 180.0 / M_PI}});
    }
    Json nodes = Json::array();
    for (const auto& n : beam.nodes()) nodes.push_back(Json{{"x_mm", n.x}, {"y_mm", n.y}});
    const auto c = compliance(beam);
    return Json{{"youngs_modulus_MPa", beam.youngs_modulus},
                {"effective_area_mm2", beam.effective_area},
                {"calibration", beam.calibrated ? "calibrated" : "uncalibrated"},
                {"segments", segs},
                {"nodes", nodes},
                {"compliance_mm_per_N", c.compliance},
                {"stiffness_N_per_mm", c.stiffness}};
}

void write_beam_ini(std::ostream& out, const FixtureBeam& beam) {
    out << "E = " << format_number(beam.youngs_modulus) << '\n';
    out << "A_eff = " << format_number(beam.effective_area) << '\n';
    for (int i = 0; i < 3; ++i) {
        const auto& s = beam.segments[i];
        out << 'L' << i + 1 << " = " << format_number(s.length) << '\n';
        out << 'I' << i + 1 << " = " << format_number(s.second_moment) << '\n';
        out << "theta" << i + 1 << "_deg = " << format_number(s.inclination * 180.0 / M_PI) << '\n';
    }
    out << "calibrated = " << (beam.calibrated ? "true" : "false") << '\n';
}

// ---------------------------------------------------------------------------
// Traces

void write_injection_trace_csv(std::ostream& out, const InjectionTrace& trace,
                               const std::vector<std::string>& node_names) {
    std::vector<std::string> head{"t_s", "total_mm3", "p_kPa"};
    for (const auto& n : node_names) head.push_back("V_" + n + "_mm3");
    head.push_back("event");
    write_csv_row(out, head);
    for (const auto& s : trace.samples) {
        if (s.volumes.size() != node_names.size()) throw ValidationError("trace sample width differs from node list");
        std::vector<std::string> row{format_number(s.time), format_number(s.total_volume), format_number(s.pressure)};
        for (double v : s.volumes) row.push_back(format_number(v));
        row.push_back(flag_text(s.event));
        write_csv_row(out, row);
    }
}

InjectionTrace read_injection_trace_csv(std::istream& in, std::vector<std::string>* node_names) {
    const CsvTable t = read_csv(in);
    if (t.header.size() < 4) throw ValidationError("injection trace CSV: too few columns");
    std::vector<std::size_t> vcols;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        const auto& h = t.header[i];
        if (h.size() > 6 && h.rfind("V_", 0) == 0 && h.substr(h.size() - 4) == "_mm3") {
            vcols.push_back(i);
            names.push_back(h.substr(2, h.size() - 6));
        }
    }
    InjectionTrace trace;
    const auto c_t = t.require("t_s"), c_tot = t.require("total_mm3"), c_p = t.require("p_kPa");
    const auto c_e = t.require("event");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::string where = "injection trace CSV " + at_line(t.lines[i]);
        TraceSample s;
        s.time = parse_number(r[c_t], where);
        s.total_volume = parse_number(r[c_tot], where);
        s.pressure = parse_number(r[c_p], where);
        for (auto c : vcols) s.volumes.push_back(parse_number(r[c], where));
        s.event = parse_flag(r[c_e], where);
        trace.samples.push_back(std::move(s));
    }
    if (node_names) *node_names = names;
    return trace;
}

void write_events_csv(std::ostream& out, const std::vector<SnapEvent>& events) {
    write_csv_row(out, {"node", "name", "step", "t_s", "p_before_kPa", "p_after_kPa", "V_before_mm3", "V_after_mm3",
                        "total_before_mm3", "total_after_mm3", "region_before", "region_after"});
    for (const auto& e : events) {
        write_csv_row(out, {std::to_string(e.node), e.name, std::to_string(e.step), format_number(e.time),
                            format_number(e.p_before), format_number(e.p_after), format_number(e.v_before),
                            format_number(e.v_after), format_number(e.total_before), format_number(e.total_after),
                            std::to_string(e.region_before), std::to_string(e.region_after)});
    }
}

std::vector<SnapEvent> read_events_csv(std::istream& in) {
    const CsvTable t = read_csv(in);
    std::vector<SnapEvent> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::string where = "events CSV " + at_line(t.lines[i]);
        SnapEvent e;
        e.node = static_cast<std::size_t>(parse_number(r[t.require("node")], where));
        e.name = r[t.require("name")];
        e.step = static_cast<long>(parse_number(r[t.require("step")], where));
        e.time = parse_number(r[t.require("t_s")], where);
        e.p_before = parse_number(r[t.require("p_before_kPa")], where);
        e.p_after = parse_number(r[t.require("p_after_kPa")], where);
        e.v_before = parse_number(r[t.require("V_before_mm3")], where);
        e.v_after = parse_number(r[t.require("V_after_mm3")], where);
        e.total_before = parse_number(r[t.require("total_before_mm3")], where);
        e.total_after = parse_number(r[t.require("total_after_mm3")], where);
        e.region_before = static_cast<int>(parse_number(r[t.require("region_before")], where));
        e.region_after = static_cast<int>(parse_number(r[t.require("region_after")], where));
        out.push_back(std::move(e));
    }
    return out;
}

void write_grasp_trace_csv(std::ostream& out, const GraspTrace& trace) {
    out << "# grasp trace; gap_mm=" << format_number(trace.gap) << "; object=" << flag_text(trace.has_object) << '\n';
    write_csv_row(out, {"t_s", "volume_mm3", "p_kPa", "u_mm", "force_N", "snapped", "event", "phase"});
    for (const auto& s : trace.samples) {
        write_csv_row(out, {format_number(s.time), format_number(s.volume), format_number(s.pressure),
                            format_number(s.displacement), format_number(s.force), flag_text(s.snapped),
                            flag_text(s.event), to_string(s.phase)});
    }
}

GraspTrace read_grasp_trace_csv(std::istream& in) {
    std::string first;
    std::getline(in, first);
    GraspTrace trace;
    auto field = [&](const std::string& key) -> std::string {
        const auto at = first.find(key + "=");
        if (at == std::string::npos) throw ValidationError("grasp trace CSV: header comment lacks " + key);
        const auto start = at + key.size() + 1;
        return trim(first.substr(start, first.find(';', start) - start));
    };
    trace.gap = parse_number(field("gap_mm"), "grasp trace gap");
    trace.has_object = parse_flag(field("object"), "grasp trace object flag");
    const CsvTable t = read_csv(in);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::string where = "grasp trace CSV " + at_line(t.lines[i]);
        GraspSample s;
        s.time = parse_number(r[t.require("t_s")], where);
        s.volume = parse_number(r[t.require("volume_mm3")], where);
        s.pressure = parse_number(r[t.require("p_kPa")], where);
        s.displacement = parse_number(r[t.require("u_mm")], where);
        s.force = parse_number(r[t.require("force_N")], where);
        s.snapped = parse_flag(r[t.require("snapped")], where);
        s.event = parse_flag(r[t.require("event")], where);
        const std::string ph = r[t.require("phase")];
        if (ph == "I") s.phase = Phase::I;
        else if (ph == "II") s.phase = Phase::II;
        else if (ph == "III") s.phase = Phase::III;
        else throw ValidationError(where + ": unknown phase '" + ph + "'");
        trace.samples.push_back(s);
    }
    return trace;
}

Json grasp_summary_json(const GraspTrace& trace) {
    Json events = Json::array();
    for (const auto& e : trace.events) {
        events.push_back(Json{{"node", e.name},
                              {"volume_mm3", trace.samples.empty() ? 0.0 : e.time},
                              {"p_before_kPa", e.p_before},
                              {"p_after_kPa", e.p_after}});
    }
    Json out{{"outcome", to_string(trace.outcome)},
             {"plateau_pressure_kPa", trace.plateau_pressure},
             {"trigger_volume_mm3", trace.trigger_volume >= 0.0 ? Json(trace.trigger_volume) : Json(nullptr)},
             {"events", trace.events.size()},
             {"truncated", trace.truncated},
             {"samples", trace.samples.size()}};
    double peak = trace.samples.empty() ? 0.0 : trace.samples.front().pressure;
    for (const auto& s : trace.samples) peak = std::max(peak, s.pressure);
    out["peak_pressure_kPa"] = peak;
    if (!trace.diagnostic.empty()) out["diagnostic"] = trace.diagnostic;
    return out;
}

Json calibration_json(const CalibrationResult& r, const std::vector<CalibrationTarget>& targets) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < targets.size() && i < r.predicted.size(); ++i) {
        rows.push_back(Json{{"label", targets[i].label},
                            {"target_kPa", targets[i].pressure},
                            {"predicted_kPa", r.predicted[i]},
                            {"residual_kPa", r.residuals[i]}});
    }
    return Json{{"stiffness_N_per_mm", r.stiffness},
                {"effective_area_mm2", r.effective_area},
                {"rms_residual_kPa", r.rms},
                {"targets", rows},
                {"fixture", beam_json(r.fixture)}};
}

// ---------------------------------------------------------------------------
// Config

Config Config::parse(std::string text, std::string origin) {
    namespace pt = boost::property_tree;
    Config c;
    c.bytes_ = std::move(text);
    c.origin_ = std::move(origin);
    pt::ptree tree;
    std::istringstream in(c.bytes_);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(c.origin_ + ": " + e.message() + " (" + at_line(e.line()) + ")");
    }
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            throw ValidationError(c.origin_ + ": key '" + name + "' must be inside a [section]");
        }
        std::vector<std::pair<std::string, std::string>> keys;
        for (const auto& [key, value] : node) keys.emplace_back(key, trim(value.get_value<std::string>()));
        c.sections_.emplace_back(name, std::move(keys));
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void Config::check(const Schema& schema) const {
    for (const auto& [section, keys] : sections_) {
        const std::set<std::string>* allowed = nullptr;
        for (const auto& [pattern, set] : schema) {
            const bool wild = pattern.size() > 2 && pattern.substr(pattern.size() - 2) == ".*";
            if (pattern == section ||
                (wild && section.rfind(pattern.substr(0, pattern.size() - 1), 0) == 0 &&
                 section.size() > pattern.size() - 1)) {
                allowed = &set;
                break;
            }
        }
        if (!allowed) {
            std::string list;
            for (const auto& [p, set] : schema) list += " [" + p + "]";
            throw ValidationError(origin_ + ": unknown section [" + section + "]; expected one of" + list);
        }
        for (const auto& [key, value] : keys) {
            if (allowed->count(key)) continue;
            std::string list;
            for (const auto& k : *allowed) list += " " + k;
            throw ValidationError(origin_ + ": unknown key '" + key + "' in [" + section + "]; expected one of" + list);
        }
    }
}

bool Config::has_section(const std::string& section) const {
    return std::any_of(sections_.begin(), sections_.end(), [&](const auto& s) { return s.first == section; });
}

std::vector<std::string> Config::sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& s : sections_) {
        if (s.first.rfind(prefix, 0) == 0) out.push_back(s.first);
    }
    return out;
}

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
    for (const auto& [name, keys] : sections_) {
        if (name != section) continue;
        for (const auto& [k, v] : keys) {
            if (k == key) return v;
        }
    }
    return std::nullopt;
}

std::string Config::text(const std::string& section, const std::string& key, const std::string& fallback) const {
    return get(section, key).value_or(fallback);
}

double Config::number(const std::string& section, const std::string& key, double fallback) const {
    const auto v = get(section, key);
    if (!v) return fallback;
    return parse_number(*v, origin_ + ": [" + section + "] " + key);
}

long Config::integer(const std::string& section, const std::string& key, long fallback) const {
    const auto v = get(section, key);
    if (!v) return fallback;
    long out = 0;
    const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
    if (v->empty() || r.ec != std::errc() || r.ptr != v->data() + v->size()) {
        throw ValidationError(origin_ + ": [" + section + "] " + key + ": expected an integer, got '" + *v + "'");
    }
    return out;
}

bool Config::flag(const std::string& section, const std::string& key, bool fallback) const {
    const auto v = get(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw ValidationError(origin_ + ": [" + section + "] " + key + ": expected true or false, got '" + *v + "'");
}

std::vector<double> Config::numbers(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const {
    const auto v = get(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    if (trim(*v).empty()) return out;
    for (const auto& cell : split(*v, ',')) {
        out.push_back(parse_number(cell, origin_ + ": [" + section + "] " + key + " (comma-separated numbers)"));
    }
    return out;
}

std::string Config::section_text(const std::string& section) const {
    std::string out;
    for (const auto& [name, keys] : sections_) {
        if (name != section) continue;
        for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bundle

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ResultBundle::ResultBundle(std::filesystem::path dir, std::string command, const Config& config, std::uint64_t seed)
    : dir_(std::move(dir)),
      command_(std::move(command)),
      config_origin_(config.origin()),
      config_hash_(sha256_hex(config.bytes())),
      seed_(seed),
      started_(utc_timestamp()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    const auto probe = dir_ / ".write-test";
    {
        std::ofstream out(probe);
        if (!out) throw ValidationError("output directory '" + dir_.string() + "' is not writable");
    }
    std::filesystem::remove(probe, ec);
}

void ResultBundle::write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + (dir_ / name).string() + "'");
    out << content;
    if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
}

void ResultBundle::write_json(const std::string& name, const Json& value) { write(name, value.dump(2) + "\n"); }

void ResultBundle::finish(const std::string& status, const std::string& diagnostic) {
    Json m{{"command", command_},
           {"status", status},
           {"tool_version", tool_version()},
           {"config", config_origin_},
           {"config_sha256", config_hash_},
           {"seed", seed_},
           {"started_utc", started_},
           {"finished_utc", utc_timestamp()},
           {"artifacts", artifacts_}};
    if (!diagnostic.empty()) m["diagnostic"] = diagnostic;
    if (!info_.empty()) m["info"] = info_;
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw ValidationError("cannot write manifest in '" + dir_.string() + "'");
    out << m.dump(2) << '\n';
}

Json ResultBundle::read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ValidationError("no manifest in '" + dir.string() + "'");
    return Json::parse(in);
}

}  // namespace snapgrip::io
