#include "snapgrip/fixture_beam.hpp"

#include <fstream>
#include <numbers>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "snapgrip/chamber.hpp"
#include "snapgrip/error.hpp"
#include "snapgrip/materials.hpp"

namespace snapgrip {

void BeamSegment::validate() const {
    if (!std::isfinite(length) || length <= 0.0) throw ValidationError("beam segment length must be positive");
    if (!std::isfinite(second_moment) || second_moment <= 0.0) {
        throw ValidationError("beam segment second moment must be positive");
    }
    if (!std::isfinite(inclination) || std::abs(inclination) >= 0.5 * std::numbers::pi) {
        throw ValidationError("beam segment inclination must satisfy |theta| < pi/2");
    }
}

void FixtureBeam::validate() const {
    for (const auto& s : segments) s.validate();
    if (!std::isfinite(youngs_modulus) || youngs_modulus <= 0.0) {
        throw ValidationError("beam Young's modulus must be positive");
    }
    if (!std::isfinite(effective_area) || effective_area <= 0.0) {
        throw ValidationError("beam effective area A_eff must be positive");
    }
}

std::array<BeamNode, 4> FixtureBeam::nodes() const {
    std::array<BeamNode, 4> n{};
    for (int i = 0; i < 3; ++i) {
        const auto& s = segments[i];
        n[i + 1].x = n[i].x + s.length * std::cos(s.inclination);
        n[i + 1].y = n[i].y + s.length * std::sin(s.inclination);
    }
    return n;
}

FixtureBeam FixtureBeam::defaults() {
    // 10 mm wide, 2 mm thick printed strip; I = b t^3 / 12.
    constexpr double kI = 10.0 * 8.0 / 12.0;
    FixtureBeam b;
    b.segments = {BeamSegment{20.0, kI, 0.0}, BeamSegment{15.0, kI, std::numbers::pi / 4.0},
                  BeamSegment{20.0, kI, 0.0}};
    b.youngs_modulus = 3500.0;
    b.effective_area = ChamberGeometry::gripping().face_area();
    b.calibrated = false;
    return b;
}

double tip_deflection(const FixtureBeam& beam, double load) {
    beam.validate();
    if (!std::isfinite(load)) throw ValidationError("tip_deflection: load must be finite");
    const auto n = beam.nodes();
    const double xl = n[3].x;
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        const auto& s = beam.segments[i];
        const double c = std::cos(s.inclination);
        const double dx0 = xl - n[i].x;
        const double l = s.length;
        sum += (l * dx0 * dx0 - dx0 * c * l * l + c * c / 3.0 * l * l * l) / s.second_moment;
    }
    return load / beam.youngs_modulus * sum;
}

BeamCompliance compliance(const FixtureBeam& beam) {
    const double cb = tip_deflection(beam, 1.0);
    if (!(cb > 0.0) || !std::isfinite(1.0 / cb)) {
        throw AnalysisError("beam compliance vanishes (unbounded stiffness)");
    }
    return {cb, 1.0 / cb};
}

ObjectModel ObjectModel::rigid(double size, std::string label) {
    return {std::numeric_limits<double>::infinity(), size, std::move(label)};
}

void ObjectModel::validate() const {
    if (std::isnan(stiffness) || stiffness <= 0.0 || (std::isinf(stiffness) && stiffness < 0.0)) {
        throw ValidationError("object stiffness k_o must be positive (or +inf for rigid)");
    }
    if (!std::isfinite(size) || size <= 0.0) throw ValidationError("object size must be positive");
}

double series_stiffness(double k_b, double k_o) {
    if (!(k_b > 0.0) || !(k_o > 0.0)) throw ValidationError("series_stiffness: stiffnesses must be positive");
    if (std::isinf(k_o) && std::isinf(k_b)) return k_b;
    if (std::isinf(k_o)) return k_b;
    if (std::isinf(k_b)) return k_o;
    return k_b * k_o / (k_b + k_o);
}

double pressure_from_deflection(double deflection, double effective_area, double compliance_mm_per_n) {
    if (!(effective_area > 0.0) || !(compliance_mm_per_n > 0.0)) {
        throw ValidationError("pressure_from_deflection: A_eff and C_b must be positive");
    }
    if (!(deflection >= 0.0) || !std::isfinite(deflection)) {
        throw ValidationError("pressure_from_deflection: deflection must be finite and >= 0");
    }
    return deflection / (effective_area * compliance_mm_per_n) * kKPaPerMPa;
}

double pressure_from_deflection(const FixtureBeam& beam, double deflection) {
    return pressure_from_deflection(deflection, beam.effective_area, compliance(beam).compliance);
}

FixtureBeam beam_from_ini(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(std::string("beam config: ") + e.what());
    }
    FixtureBeam b = FixtureBeam::defaults();
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ValidationError("beam config: unexpected section [" + key + "]");
        const std::string v = node.get_value<std::string>();
        if (key == "calibrated") {
            if (v != "true" && v != "false") throw ValidationError("beam config: calibrated must be true or false");
            b.calibrated = v == "true";
            continue;
        }
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::logic_error&) {
            throw ValidationError("beam config: " + key + " must be a number, got '" + v + "'");
        }
        if (key == "E") {
            b.youngs_modulus = value;
        } else if (key == "A_eff") {
            b.effective_area = value;
        } else if (key.size() == 2 && (key[0] == 'L' || key[0] == 'I') && key[1] >= '1' && key[1] <= '3') {
            auto& seg = b.segments[key[1] - '1'];
            (key[0] == 'L' ? seg.length : seg.second_moment) = value;
        } else if (key.size() == 10 && key.rfind("theta", 0) == 0 && key.substr(6) == "_deg" && key[5] >= '1' &&
                   key[5] <= '3') {
            b.segments[key[5] - '1'].inclination = value * std::numbers::pi / 180.0;
        } else {
            throw ValidationError("beam config: unknown key '" + key +
                                  "' (expected E, A_eff, L1..L3, I1..I3, theta1_deg..theta3_deg, calibrated)");
        }
    }
    b.validate();
    return b;
}

FixtureBeam beam_from_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open beam config '" + path + "'");
    return beam_from_ini(in);
}

}  // namespace snapgrip
