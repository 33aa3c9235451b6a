#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "snapgrip/error.hpp"
#include "snapgrip/materials.hpp"

using namespace snapgrip;

namespace {

MaterialParams dragon_skin() { return {0.1, 0.0, 1000.0}; }

// Energy of the incompressible membrane as a function of both stretches; its
// partial derivatives give the nominal tensions per unit reference area.
double membrane_energy(const MaterialParams& m, double lm, double lc) {
    const double i1 = lm * lm + lc * lc + 1.0 / (lm * lm * lc * lc);
    return strain_energy(m, {i1, 1.0});
}

}  // namespace

TEST_CASE("strain energy vanishes in the reference state") {
    CHECK(strain_energy(dragon_skin(), {3.0, 1.0}) == 0.0);
    CHECK(strain_energy(material_from_catalog("ecoflex-00-30"), {3.0, 1.0}) == 0.0);
    CHECK(strain_energy({0.2, 0.5, 1000.0}, {3.0, 1.0}) == 0.0);
}

TEST_CASE("uniaxial incompressible stretch of two") {
    // lambda = 2 gives I1 = 4 + 2 / 2 = 5
    const double lambda = 2.0;
    const double i1 = lambda * lambda + 2.0 / lambda;
    CHECK(i1 == doctest::Approx(5.0));
    CHECK(strain_energy(dragon_skin(), {i1, 1.0}) == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("strain energy rejects unattainable or non-finite invariants") {
    CHECK_THROWS_AS(strain_energy(dragon_skin(), {2.5, 1.0}), ValidationError);
    CHECK_THROWS_AS(strain_energy(dragon_skin(), {3.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(strain_energy(dragon_skin(), {NAN, 1.0}), ValidationError);
    CHECK_THROWS_AS(strain_energy({0.1, 0.0, 1000.0}, {3.0, INFINITY}), ValidationError);
}

TEST_CASE("strain energy is non-negative and zero only at the identity") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> j_dist(0.3, 3.0), extra(0.0, 5.0);
    const MaterialParams m{0.05, 0.7, 1000.0};
    for (int k = 0; k < 2000; ++k) {
        const double j = j_dist(rng);
        const double i1 = 3.0 * std::cbrt(j * j) + extra(rng);
        const double w = strain_energy(m, {i1, j});
        CHECK(w >= 0.0);
        if (std::abs(i1 - 3.0) > 1e-9 || std::abs(j - 1.0) > 1e-9) CHECK(w > 0.0);
    }
}

TEST_CASE("membrane tensions at identity stretch") {
    const auto t = membrane_tensions(dragon_skin(), 1.0, 1.0, 2.0);
    CHECK(t.meridional == 0.0);
    CHECK(t.circumferential == 0.0);
    CHECK_THROWS_AS(membrane_tensions({0.1, 0.2, 1000.0}, 1.1, 1.0, 2.0), ValidationError);
    CHECK_THROWS_AS(membrane_tensions(dragon_skin(), 0.0, 1.0, 2.0), ValidationError);
    CHECK_THROWS_AS(membrane_tensions(dragon_skin(), 1.0, 1.0, -1.0), ValidationError);
}

TEST_CASE("equibiaxial tension follows the closed form and rises on [1, 2]") {
    const double h0 = 1.5;
    double previous = -1.0;
    for (int k = 0; k <= 100; ++k) {
        const double l = 1.0 + k / 100.0;
        const auto t = membrane_tensions(dragon_skin(), l, l, h0);
        const double expected = 2.0 * 0.1 * h0 * (l * l - std::pow(l, -4.0)) / (l * l);
        CHECK(t.meridional == doctest::Approx(expected).epsilon(1e-13));
        CHECK(t.circumferential == doctest::Approx(expected).epsilon(1e-13));
        CHECK(t.meridional > previous);
        previous = t.meridional;
    }
}

TEST_CASE("tensions agree with finite differences of the energy") {
    // T_m (Cauchy tension per deformed length) = h0 / lambda_c * dW/dlambda_m.
    const MaterialParams m = dragon_skin();
    const double h0 = 2.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> s(0.5, 3.0);
    for (int k = 0; k < 200; ++k) {
        const double lm = s(rng), lc = s(rng);
        const double h = 1e-5;
        const double dwm = (membrane_energy(m, lm + h, lc) - membrane_energy(m, lm - h, lc)) / (2 * h);
        const double dwc = (membrane_energy(m, lm, lc + h) - membrane_energy(m, lm, lc - h)) / (2 * h);
        const auto t = membrane_tensions(m, lm, lc, h0);
        CHECK(t.meridional == doctest::Approx(h0 * dwm / lc).epsilon(1e-6));
        CHECK(t.circumferential == doctest::Approx(h0 * dwc / lm).epsilon(1e-6));
        CHECK(membrane_strain_energy(m, lm, lc) == doctest::Approx(membrane_energy(m, lm, lc)).epsilon(1e-14));
    }
}

TEST_CASE("catalog carries the published constants") {
    const auto eco = material_from_catalog("ecoflex-00-30");
    CHECK(eco.c10 == 0.0115);
    CHECK(eco.d1 == 0.0);
    const auto ds = material_from_catalog("dragon-skin-00-30");
    CHECK(ds.c10 == 0.1);
    CHECK(ds.d1 == 0.0);
    const auto sil = material_from_catalog("sil950");
    CHECK(sil.c10 == 0.4);
    CHECK(sil.d1 == 0.0);
}

TEST_CASE("catalog miss names the available entries") {
    try {
        material_from_catalog("unobtainium");
        FAIL("expected a catalog miss");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("unobtainium") != std::string::npos);
        CHECK(what.find("dragon-skin-00-30") != std::string::npos);
    }
}

TEST_CASE("test-block grades are stiffness-ordered placeholders") {
    const auto cat = MaterialCatalog::defaults();
    const char* ordered[] = {"ecoflex-gel-2", "ecoflex-00-10", "ecoflex-00-30", "dragon-skin-00-20",
                             "dragon-skin-00-30"};
    for (int k = 0; k + 1 < 5; ++k) CHECK(cat.get(ordered[k]).c10 < cat.get(ordered[k + 1]).c10);
    CHECK_FALSE(cat.entry("ecoflex-gel-2").calibrated);
    CHECK_FALSE(cat.entry("ecoflex-00-10").calibrated);
    CHECK_FALSE(cat.entry("dragon-skin-00-20").calibrated);
    CHECK(cat.entry("sil950").calibrated);
}

TEST_CASE("catalog round trip through its text form") {
    const auto cat = MaterialCatalog::defaults();
    std::stringstream buf;
    cat.to_ini(buf);
    const auto back = MaterialCatalog::from_ini(buf);
    REQUIRE(back.names() == cat.names());
    for (const auto& e : cat.entries()) {
        const auto& b = back.entry(e.name);
        CHECK(b.params.c10 == e.params.c10);
        CHECK(b.params.d1 == e.params.d1);
        CHECK(b.params.density == e.params.density);
        CHECK(b.calibrated == e.calibrated);
        CHECK_NOTHROW(b.params.validate());
    }
}

TEST_CASE("shipped catalog file matches the built-in defaults") {
    const auto file = MaterialCatalog::from_ini_file(SNAPGRIP_SOURCE_DIR "/data/materials.ini");
    const auto cat = MaterialCatalog::defaults();
    CHECK(file.names() == cat.names());
    for (const auto& e : cat.entries()) CHECK(file.get(e.name).c10 == e.params.c10);
}

TEST_CASE("material validation") {
    CHECK_THROWS_AS((MaterialParams{0.0, 0.0, 1000.0}).validate(), ValidationError);
    CHECK_THROWS_AS((MaterialParams{0.1, -1.0, 1000.0}).validate(), ValidationError);
    CHECK_THROWS_AS((MaterialParams{0.1, 0.0, 0.0}).validate(), ValidationError);
    CHECK(dragon_skin().youngs_modulus() == doctest::Approx(0.6));
}
