#include "snapgrip/materials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "snapgrip/error.hpp"

namespace snapgrip {

namespace {

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void MaterialParams::validate() const {
    if (!finite(c10) || !finite(d1) || !finite(density)) {
        throw ValidationError("material constants must be finite");
    }
    if (c10 <= 0.0) throw ValidationError("c10 must be positive");
    if (d1 < 0.0) throw ValidationError("d1 must be non-negative");
    if (density <= 0.0) throw ValidationError("density must be positive");
}

void DeformationInvariants::validate() const {
    if (!finite(i1) || !finite(j)) throw ValidationError("invariants must be finite");
    if (j <= 0.0) throw ValidationError("volume ratio J must be positive");
    // I1 >= 3 J^(2/3) by the AM-GM inequality on the squared principal stretches.
    const double bound = 3.0 * std::cbrt(j * j);
    if (i1 < bound * (1.0 - 1e-12)) {
        throw ValidationError("invariants not attainable: I1 < 3 J^(2/3)");
    }
}

double strain_energy(const MaterialParams& params, const DeformationInvariants& inv) {
    params.validate();
    inv.validate();
    const double jm23 = 1.0 / std::cbrt(inv.j * inv.j);
    const double dj = inv.j - 1.0;
    return params.c10 * (inv.i1 * jm23 - 3.0) + params.d1 * dj * dj;
}

double membrane_strain_energy(const MaterialParams& params, double lambda_m, double lambda_c) {
    const double l3 = 1.0 / (lambda_m * lambda_c);
    const DeformationInvariants inv{lambda_m * lambda_m + lambda_c * lambda_c + l3 * l3, 1.0};
    return strain_energy(params, inv);
}

MembraneTensions membrane_tensions(const MaterialParams& params, double lambda_m, double lambda_c,
                                   double h0) {
    params.validate();
    if (params.d1 != 0.0) {
        throw ValidationError("membrane reduction requires an incompressible material (d1 = 0)");
    }
    if (!(lambda_m > 0.0) || !(lambda_c > 0.0) || !(h0 > 0.0) || !finite(lambda_m) ||
        !finite(lambda_c) || !finite(h0)) {
        throw ValidationError("stretches and thickness must be positive and finite");
    }
    const double l3 = 1.0 / (lambda_m * lambda_c);
    const double l3sq = l3 * l3;
    const double thickness = h0 * l3;
    return {2.0 * params.c10 * (lambda_m * lambda_m - l3sq) * thickness,
            2.0 * params.c10 * (lambda_c * lambda_c - l3sq) * thickness};
}

MaterialCatalog MaterialCatalog::defaults() {
    MaterialCatalog c;
    // Chamber silicones, incompressible.
    c.add({"ecoflex-00-30", {0.0115, 0.0, 1000.0}, true});
    c.add({"dragon-skin-00-30", {0.1, 0.0, 1000.0}, true});
    c.add({"sil950", {0.4, 0.0, 1000.0}, true});
    // Test-block grades without published constants. Values only preserve the
    // softest-to-stiffest ordering Gel 2 < 00-10 < 00-30 < DS 00-20 < DS 00-30.
    c.add({"ecoflex-gel-2", {0.003, 0.0, 1000.0}, false});
    c.add({"ecoflex-00-10", {0.007, 0.0, 1000.0}, false});
    c.add({"dragon-skin-00-20", {0.05, 0.0, 1000.0}, false});
    return c;
}

void MaterialCatalog::add(CatalogEntry e) {
    e.params.validate();
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const CatalogEntry& x) { return x.name == e.name; });
    if (it != entries_.end()) {
        *it = std::move(e);
    } else {
        entries_.push_back(std::move(e));
    }
}

bool MaterialCatalog::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const CatalogEntry& e) { return e.name == name; });
}

std::vector<std::string> MaterialCatalog::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

const CatalogEntry& MaterialCatalog::entry(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e;
    }
    std::string msg = "unknown material '" + name + "'; available:";
    for (const auto& e : entries_) msg += " " + e.name;
    throw ValidationError(msg);
}

MaterialCatalog MaterialCatalog::from_ini(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(std::string("material catalog: ") + e.what());
    }
    MaterialCatalog c;
    for (const auto& [name, section] : tree) {
        if (section.empty()) {
            throw ValidationError("material catalog: key '" + name + "' outside a [material] section");
        }
        CatalogEntry e;
        e.name = name;
        bool has_c10 = false;
        for (const auto& [key, value] : section) {
            const std::string v = value.get_value<std::string>();
            try {
                if (key == "c10") {
                    e.params.c10 = std::stod(v);
                    has_c10 = true;
                } else if (key == "d1") {
                    e.params.d1 = std::stod(v);
                } else if (key == "density") {
                    e.params.density = std::stod(v);
                } else if (key == "calibrated") {
                    if (v != "true" && v != "false") {
                        throw ValidationError("material catalog: [" + name +
                                              "] calibrated must be true or false");
                    }
                    e.calibrated = v == "true";
                } else {
                    throw ValidationError("material catalog: unknown key '" + key + "' in [" + name +
                                          "] (expected c10, d1, density, calibrated)");
                }
            } catch (const std::logic_error& ex) {
                if (dynamic_cast<const ValidationError*>(&ex)) throw;
                throw ValidationError("material catalog: [" + name + "] " + key +
                                      " is not a number: '" + v + "'");
            }
        }
        if (!has_c10) throw ValidationError("material catalog: [" + name + "] missing c10");
        if (e.params.density == 0.0) e.params.density = 1000.0;
        c.add(std::move(e));
    }
    return c;
}

MaterialCatalog MaterialCatalog::from_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open material catalog '" + path + "'");
    return from_ini(in);
}

void MaterialCatalog::to_ini(std::ostream& out) const {
    std::ostringstream num;
    num.precision(17);
    for (const auto& e : entries_) {
        out << "[" << e.name << "]\n";
        num.str("");
        num << e.params.c10;
        out << "c10 = " << num.str() << "\n";
        num.str("");
        num << e.params.d1;
        out << "d1 = " << num.str() << "\n";
        num.str("");
        num << e.params.density;
        out << "density = " << num.str() << "\n";
        out << "calibrated = " << (e.calibrated ? "true" : "false") << "\n\n";
    }
}

MaterialParams material_from_catalog(const std::string& name) {
    static const MaterialCatalog catalog = MaterialCatalog::defaults();
    return catalog.get(name);
}

}  // namespace snapgrip
