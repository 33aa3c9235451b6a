#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace snapgrip {

// Second-order forward-mode jet: value, gradient and Hessian with respect to N
// seeded variables. Element energies are written once against this type and
// yield exact element forces and stiffness matrices.
template <int N>
struct Jet2 {
    using Vec = Eigen::Matrix<double, N, 1>;
    using Mat = Eigen::Matrix<double, N, N>;

    double v = 0.0;
    Vec g = Vec::Zero();
    Mat h = Mat::Zero();

    Jet2() = default;
    Jet2(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

    static Jet2 variable(double value, int index) {
        Jet2 j(value);
        j.g[index] = 1.0;
        return j;
    }

    // Apply a scalar function given f(v), f'(v), f''(v).
    Jet2 chain(double f, double df, double d2f) const {
        Jet2 r(f);
        r.g = df * g;
        r.h = df * h + d2f * (g * g.transpose());
        return r;
    }
};

template <int N>
Jet2<N> operator+(const Jet2<N>& a, const Jet2<N>& b) {
    Jet2<N> r(a.v + b.v);
    r.g = a.g + b.g;
    r.h = a.h + b.h;
    return r;
}

template <int N>
Jet2<N> operator-(const Jet2<N>& a, const Jet2<N>& b) {
    Jet2<N> r(a.v - b.v);
    r.g = a.g - b.g;
    r.h = a.h - b.h;
    return r;
}

template <int N>
Jet2<N> operator-(const Jet2<N>& a) {
    Jet2<N> r(-a.v);
    r.g = -a.g;
    r.h = -a.h;
    return r;
}

template <int N>
Jet2<N> operator*(const Jet2<N>& a, const Jet2<N>& b) {
    Jet2<N> r(a.v * b.v);
    r.g = a.g * b.v + b.g * a.v;
    r.h = a.h * b.v + b.h * a.v + a.g * b.g.transpose() + b.g * a.g.transpose();
    return r;
}

template <int N>
Jet2<N> operator*(double s, const Jet2<N>& a) {
    Jet2<N> r(s * a.v);
    r.g = s * a.g;
    r.h = s * a.h;
    return r;
}

template <int N>
Jet2<N> operator*(const Jet2<N>& a, double s) {
    return s * a;
}

template <int N>
Jet2<N> operator+(const Jet2<N>& a, double s) {
    Jet2<N> r = a;
    r.v += s;
    return r;
}

template <int N>
Jet2<N> operator+(double s, const Jet2<N>& a) {
    return a + s;
}

template <int N>
Jet2<N> operator-(const Jet2<N>& a, double s) {
    return a + (-s);
}

template <int N>
Jet2<N> operator-(double s, const Jet2<N>& a) {
    return (-a) + s;
}

template <int N>
Jet2<N> reciprocal(const Jet2<N>& a) {
    const double inv = 1.0 / a.v;
    return a.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
}

template <int N>
Jet2<N> operator/(const Jet2<N>& a, const Jet2<N>& b) {
    return a * reciprocal(b);
}

template <int N>
Jet2<N> operator/(const Jet2<N>& a, double s) {
    return (1.0 / s) * a;
}

template <int N>
Jet2<N> sqrt(const Jet2<N>& a) {
    const double s = std::sqrt(a.v);
    return a.chain(s, 0.5 / s, -0.25 / (s * a.v));
}

// atan2(y, x) through the two-argument chain rule.
template <int N>
Jet2<N> atan2(const Jet2<N>& y, const Jet2<N>& x) {
    const double q = x.v * x.v + y.v * y.v;
    const double fy = x.v / q;
    const double fx = -y.v / q;
    const double q2 = q * q;
    const double fyy = -2.0 * x.v * y.v / q2;
    const double fxx = 2.0 * x.v * y.v / q2;
    const double fxy = (y.v * y.v - x.v * x.v) / q2;

    Jet2<N> r(std::atan2(y.v, x.v));
    r.g = fy * y.g + fx * x.g;
    r.h = fy * y.h + fx * x.h + fyy * (y.g * y.g.transpose()) + fxx * (x.g * x.g.transpose()) +
          fxy * (x.g * y.g.transpose() + y.g * x.g.transpose());
    return r;
}

}  // namespace snapgrip
