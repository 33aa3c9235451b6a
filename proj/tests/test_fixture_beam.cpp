#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"

#include "snapgrip/error.hpp"
#include "snapgrip/fixture_beam.hpp"

using namespace snapgrip;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

FixtureBeam collinear(double l1, double l2, double l3, double e, double i) {
    FixtureBeam b;
    b.segments = {BeamSegment{l1, i, 0.0}, BeamSegment{l2, i, 0.0}, BeamSegment{l3, i, 0.0}};
    b.youngs_modulus = e;
    b.effective_area = 500.0;
    return b;
}

FixtureBeam random_beam(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> len(2.0, 60.0), mom(0.5, 200.0), ang(-kPi / 3, kPi / 3), mod(50.0, 5000.0);
    FixtureBeam b;
    for (auto& s : b.segments) s = {len(rng), mom(rng), ang(rng)};
    b.youngs_modulus = mod(rng);
    b.effective_area = 1000.0;
    return b;
}

// Complementary energy of the bent beam: the moment of a vertical tip load at
// horizontal position x is P (X_L - x); each segment is integrated over its
// horizontal projection with ds = dx / cos(theta).
double quadrature_deflection(const FixtureBeam& b, double load) {
    using boost::math::quadrature::gauss_kronrod;
    double x0 = 0.0;
    double xl = 0.0;
    for (const auto& s : b.segments) xl += s.length * std::cos(s.inclination);
    double sum = 0.0;
    for (const auto& s : b.segments) {
        const double c = std::cos(s.inclination);
        const double x1 = x0 + s.length * c;
        auto f = [&](double x) { return (xl - x) * (xl - x) / (s.second_moment * c); };
        sum += gauss_kronrod<double, 31>::integrate(f, x0, x1, 15, 1e-14);
        x0 = x1;
    }
    return load * sum / b.youngs_modulus;
}

}  // namespace

TEST_CASE("collinear beam reduces to the cantilever formula") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> len(1.0, 80.0), mod(10.0, 1e5), mom(0.1, 1e3), force(-50.0, 50.0);
    for (int k = 0; k < 50; ++k) {
        const double l1 = len(rng), l2 = len(rng), l3 = len(rng), e = mod(rng), i = mom(rng), p = force(rng);
        const auto b = collinear(l1, l2, l3, e, i);
        const double l = l1 + l2 + l3;
        const double expected = p * l * l * l / (3.0 * e * i);
        CHECK(std::abs(tip_deflection(b, p) - expected) <= 1e-12 * std::abs(expected));
        const auto c = compliance(b);
        CHECK(c.compliance == doctest::Approx(l * l * l / (3.0 * e * i)).epsilon(1e-12));
    }
}

TEST_CASE("zero load gives zero deflection") {
    std::mt19937_64 rng(1);
    CHECK(tip_deflection(random_beam(rng), 0.0) == 0.0);
}

TEST_CASE("closed form equals quadrature of the bending integral") {
    std::mt19937_64 rng(77);
    for (int k = 0; k < 100; ++k) {
        const auto b = random_beam(rng);
        const double q = quadrature_deflection(b, 3.0);
        CHECK(std::abs(tip_deflection(b, 3.0) - q) <= 1e-9 * std::abs(q));
    }
}

TEST_CASE("deflection is linear in the load") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int k = 0; k < 50; ++k) {
        const auto b = random_beam(rng);
        const double a = u(rng), c = u(rng), p = u(rng), q = u(rng);
        const double lhs = tip_deflection(b, a * p + c * q);
        const double rhs = a * tip_deflection(b, p) + c * tip_deflection(b, q);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12).scale(std::abs(tip_deflection(b, 10.0))));
    }
}

TEST_CASE("compliance is load independent and inverts the stiffness") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> force(0.1, 40.0);
    for (int k = 0; k < 20; ++k) {
        const auto b = random_beam(rng);
        const auto c = compliance(b);
        CHECK(c.compliance * c.stiffness == doctest::Approx(1.0).epsilon(1e-15));
        for (int j = 0; j < 3; ++j) {
            const double p = force(rng);
            const double d = tip_deflection(b, p);
            CHECK(std::abs(c.compliance * p - d) <= 1e-12 * std::abs(d));
        }
        CHECK(tip_deflection(b, 2.0) / 2.0 == doctest::Approx(tip_deflection(b, 7.0) / 7.0).epsilon(1e-13));
    }
}

TEST_CASE("doubling every second moment halves the compliance") {
    std::mt19937_64 rng(4);
    auto b = random_beam(rng);
    const double c0 = compliance(b).compliance;
    for (auto& s : b.segments) s.second_moment *= 2.0;
    CHECK(compliance(b).compliance == doctest::Approx(c0 / 2.0).epsilon(1e-14));
}

TEST_CASE("vertical segments are rejected") {
    auto b = FixtureBeam::defaults();
    b.segments[1].inclination = kPi / 2;
    CHECK_THROWS_AS(tip_deflection(b, 1.0), ValidationError);
    b.segments[1].inclination = -kPi / 2;
    CHECK_THROWS_AS(compliance(b), ValidationError);
    b = FixtureBeam::defaults();
    b.segments[0].length = 0.0;
    CHECK_THROWS_AS(b.validate(), ValidationError);
    b = FixtureBeam::defaults();
    b.effective_area = 0.0;
    CHECK_THROWS_AS(b.validate(), ValidationError);
    CHECK_THROWS_AS(tip_deflection(FixtureBeam::defaults(), NAN), ValidationError);
}

TEST_CASE("nodes follow the cumulative rule") {
    std::mt19937_64 rng(6);
    const auto b = random_beam(rng);
    const auto n = b.nodes();
    CHECK(n[0].x == 0.0);
    CHECK(n[0].y == 0.0);
    for (int i = 1; i < 4; ++i) {
        const auto& s = b.segments[i - 1];
        CHECK(n[i].x == doctest::Approx(n[i - 1].x + s.length * std::cos(s.inclination)));
        CHECK(n[i].y == doctest::Approx(n[i - 1].y + s.length * std::sin(s.inclination)));
    }
    CHECK(b.tip_x() == n[3].x);
}

TEST_CASE("series stiffness") {
    CHECK(series_stiffness(2.0, 2.0) == doctest::Approx(1.0));
    CHECK(series_stiffness(3.0, 6.0) == doctest::Approx(2.0));
    CHECK(series_stiffness(4.5, kInf) == 4.5);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> k(0.01, 100.0);
    for (int i = 0; i < 200; ++i) {
        const double a = k(rng), b = k(rng);
        CHECK(series_stiffness(a, b) == doctest::Approx(series_stiffness(b, a)).epsilon(1e-15));
        CHECK(series_stiffness(a, b) <= std::min(a, b));
        CHECK(series_stiffness(a, a) == doctest::Approx(a / 2.0).epsilon(1e-15));
    }
}

TEST_CASE("reaction force grows with object stiffness at fixed displacement") {
    const double k_b = compliance(FixtureBeam::defaults()).stiffness;
    const double u = 1.7;
    double previous = 0.0;
    for (double k_o = 0.05; k_o < 1e4; k_o *= 1.7) {
        const double force = series_stiffness(k_b, k_o) * u;
        CHECK(force > previous);
        previous = force;
    }
    CHECK(series_stiffness(k_b, kInf) * u > previous);
}

TEST_CASE("pressure from deflection") {
    const auto b = FixtureBeam::defaults();
    CHECK(pressure_from_deflection(b, 0.0) == 0.0);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> d(0.01, 20.0);
    for (int i = 0; i < 50; ++i) {
        const double delta = d(rng);
        const double p_kpa = pressure_from_deflection(b, delta);
        const double load = p_kpa / 1000.0 * b.effective_area;  // kPa -> N/mm^2
        CHECK(std::abs(tip_deflection(b, load) - delta) <= 1e-12 * delta);
    }
    const double c = compliance(b).compliance;
    CHECK(pressure_from_deflection(3.0, 2.0 * b.effective_area, c) ==
          doctest::Approx(pressure_from_deflection(3.0, b.effective_area, c) / 2.0).epsilon(1e-15));
    CHECK_THROWS_AS(pressure_from_deflection(b, -1.0), ValidationError);
    CHECK_THROWS_AS(pressure_from_deflection(1.0, 0.0, c), ValidationError);
    CHECK_THROWS_AS(pressure_from_deflection(1.0, 100.0, 0.0), ValidationError);
}

TEST_CASE("default fixture is flagged uncalibrated and uses the chamber face") {
    const auto b = FixtureBeam::defaults();
    CHECK_FALSE(b.calibrated);
    CHECK(b.effective_area == doctest::Approx(kPi * 13.0 * 13.0));
    CHECK_NOTHROW(b.validate());
}

TEST_CASE("beam key/value form") {
    std::istringstream in(
        "E = 2000\nA_eff = 800\nL1 = 10\nL2 = 20\nL3 = 5\nI1 = 4\nI2 = 5\nI3 = 6\n"
        "theta1_deg = 0\ntheta2_deg = 30\ntheta3_deg = -10\ncalibrated = true\n");
    const auto b = beam_from_ini(in);
    CHECK(b.youngs_modulus == 2000.0);
    CHECK(b.effective_area == 800.0);
    CHECK(b.segments[1].length == 20.0);
    CHECK(b.segments[2].second_moment == 6.0);
    CHECK(b.segments[1].inclination == doctest::Approx(kPi / 6));
    CHECK(b.calibrated);
    std::istringstream bad("E = 2000\nlength = 3\n");
    CHECK_THROWS_AS(beam_from_ini(bad), ValidationError);
}

TEST_CASE("object model") {
    const auto rigid = ObjectModel::rigid(30.0);
    CHECK(rigid.is_rigid());
    CHECK_NOTHROW(rigid.validate());
    ObjectModel o;
    o.stiffness = -1.0;
    CHECK_THROWS_AS(o.validate(), ValidationError);
    o.stiffness = 0.0;
    CHECK_THROWS_AS(o.validate(), ValidationError);
}
