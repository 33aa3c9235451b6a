#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace snapgrip {

// Units used throughout the library: mm, N, MPa (= N/mm^2) internally; kPa
// for pressures reported on paths, traces and files.
inline constexpr double kKPaPerMPa = 1000.0;

/// Neo-Hookean constants. d1 == 0 encodes incompressibility.
struct MaterialParams {
    double c10 = 0.0;      ///< MPa
    double d1 = 0.0;       ///< 1/MPa
    double density = 0.0;  ///< kg/m^3

    /// Throws ValidationError when c10 <= 0, d1 < 0, density <= 0 or any
    /// value is non-finite.
    void validate() const;

    /// Small-strain Young's modulus of the incompressible limit, E = 6 C10.
    double youngs_modulus() const { return 6.0 * c10; }
};

/// First invariant and volume ratio of a deformation gradient.
struct DeformationInvariants {
    double i1 = 3.0;
    double j = 1.0;

    void validate() const;
};

/// W = C10 (I1 J^(-2/3) - 3) + D1 (J - 1)^2, energy per reference volume (MPa).
double strain_energy(const MaterialParams& params, const DeformationInvariants& inv);

/// Strain energy of the incompressible membrane reduction with principal
/// in-plane stretches (meridional, circumferential); thickness stretch is
/// 1/(lm*lc).
double membrane_strain_energy(const MaterialParams& params, double lambda_m, double lambda_c);

/// Membrane tensions (force per deformed length, N/mm).
struct MembraneTensions {
    double meridional = 0.0;
    double circumferential = 0.0;
};

/// Principal Cauchy stresses sigma_i = 2 C10 (lambda_i^2 - lambda_3^2)
/// integrated over the deformed thickness h0 * lambda_3. Requires d1 == 0.
MembraneTensions membrane_tensions(const MaterialParams& params, double lambda_m, double lambda_c,
                                   double h0);

struct CatalogEntry {
    std::string name;
    MaterialParams params;
    bool calibrated = true;  ///< false for stiffness-ordered placeholders
};

/// Name -> constants. The default catalog holds the three chamber silicones
/// and the five test-block grades (three of which have no published
/// constants and are stored as ordered placeholders).
class MaterialCatalog {
public:
    static MaterialCatalog defaults();

    /// Parses the key/value format written by to_ini().
    static MaterialCatalog from_ini(std::istream& in);
    static MaterialCatalog from_ini_file(const std::string& path);
    void to_ini(std::ostream& out) const;

    /// Throws ValidationError naming the available entries on a miss.
    const CatalogEntry& entry(const std::string& name) const;
    MaterialParams get(const std::string& name) const { return entry(name).params; }

    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;
    const std::vector<CatalogEntry>& entries() const { return entries_; }

    void add(CatalogEntry e);

private:
    std::vector<CatalogEntry> entries_;
};

/// Lookup in the default catalog.
MaterialParams material_from_catalog(const std::string& name);

}  // namespace snapgrip
