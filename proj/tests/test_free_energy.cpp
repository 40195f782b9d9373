#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "doctest.h"
#include "mf/free_energy.hpp"
#include "mf/freebm.hpp"

using namespace mf;

namespace {

// log E[exp(z (e^{iB} + e^{-iB}))], B ~ N(0, t), by adaptive Gauss-Kronrod on the density.
double u1_log_laplace(double z, double t) {
    double s = std::sqrt(t);
    auto f = [&](double x) { return std::exp(2 * z * std::cos(x)) * std::exp(-x * x / (2 * t)) / std::sqrt(2 * M_PI * t); };
    double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -14 * s, 14 * s, 15, 1e-15);
    return std::log(v);
}

// Same quantity through the Jacobi-Anger expansion, as a second reference.
double u1_log_laplace_bessel(double z, double t) {
    double v = boost::math::cyl_bessel_i(0, 2 * z);
    for (int k = 1; k < 40; ++k) v += 2 * boost::math::cyl_bessel_i(k, 2 * z) * std::exp(-0.5 * k * k * t);
    return std::log(v);
}

Potential pot(std::initializer_list<std::pair<const char*, Complex>> xs) {
    Potential V;
    for (auto& [w, c] : xs) V.add(parse_word(w), c);
    return V;
}

}  // namespace

TEST_CASE("potential statistics") {
    auto V = pot({{"x1", 1.0}});
    auto s = potential_stats(V, {0.8});
    CHECK(s.l1 == 1.0);
    CHECK(s.eta == doctest::Approx(0.8 * spectral_edges(0.8).second));
    CHECK_FALSE(s.symmetric);
    CHECK(adjoint(V).at(parse_word("x1'")) == Complex(1.0, 0.0));
    auto S = pot({{"x1", 1.0}, {"x1'", 1.0}});
    CHECK(is_symmetric(S));
    auto C = pot({{"x1 x2", Complex(0.0, 1.0)}, {"x2' x1'", Complex(0.0, -1.0)}});
    CHECK(is_symmetric(C));
    CHECK(pot({{"x1 x2", 1.0}}).at(parse_word("x2 x1")) == Complex(1.0, 0.0));
}

TEST_CASE("radii") {
    auto r = radius_bounds(pot({{"x1", 1.0}}), {1.0});
    CHECK(r.r == doctest::Approx(1.0 / std::exp(1.0)));
    CHECK(std::isinf(radius_bounds(Potential{}, {1.0}).r));
    CHECK(std::isinf(radius_bounds(Potential{}, {1.0}).r_prime));
    auto r2 = radius_bounds(pot({{"x1", 1.0}, {"x1'", 1.0}}), {1.0});
    CHECK(r2.r == doctest::Approx(1.0 / (2 * std::exp(1.0))));
    CHECK(r2.r_prime > 0);
    CHECK(std::isfinite(r2.r_prime));
}

TEST_CASE("series coefficients") {
    double t = 0.9;
    auto V = pot({{"x1", 1.0}});
    auto s = free_energy_series(V, {t}, 3, INFINITY);
    CHECK(s.c[1].real() == doctest::Approx(std::exp(-t / 2)));
    auto s1 = free_energy_series(V, {t}, 2, 1.0);
    CHECK(s1.c[2].real() == doctest::Approx(0.5 * (std::exp(-2 * t) - std::exp(-t))));
    auto z = free_energy_series(Potential{}, {t}, 3, 2.0);
    for (auto c : z.c) CHECK(c == Complex(0.0, 0.0));
    auto S = pot({{"x1", 0.7}, {"x1'", 0.7}, {"x1 x1", Complex(0.1, 0.2)}});
    auto b = free_energy_series(S, {t}, 4, 3.0);
    for (int m = 1; m <= 4; ++m) CHECK(std::abs(b.c[m]) <= b.coeff_bound[m] * (1 + 1e-12));
    auto e = free_energy_series_eps(S, {t}, 3, 1);
    auto inf = free_energy_series(S, {t}, 3, INFINITY);
    for (int m = 1; m <= 3; ++m) CHECK(std::abs(e.c[m] - inf.c[m]) < 1e-12);
}

TEST_CASE("N = 1 series reproduces the quadrature of the Laplace transform") {
    auto V = pot({{"x1", 1.0}, {"x1'", 1.0}});
    double t = 1.0;
    auto s = free_energy_series(V, {t}, 4, 1.0);
    for (double z : {0.05, 0.1}) {
        double series = 0.0;
        for (int m = 1; m <= 4; ++m) series += s.c[m].real() * std::pow(z, m);
        double quad = u1_log_laplace(z, t);
        CHECK(std::abs(quad - u1_log_laplace_bessel(z, t)) < 1e-13);
        CHECK(std::abs(series - quad) <= 1e-6);
    }
}

TEST_CASE("potential expectation") {
    double t = 1.0;
    auto W = pot({{"x1", 1.0}});
    auto r0 = potential_expectation(W, Potential{}, {t}, 3, INFINITY);
    CHECK(r0.value.real() == doctest::Approx(std::exp(-0.5)));
    auto We = pot({{"e", 1.0}});
    auto V = pot({{"x1", 0.05}, {"x1'", 0.05}});
    for (int M : {0, 1, 3}) CHECK(std::abs(potential_expectation(We, V, {t}, M, 3.0).value - 1.0) < 1e-14);
    auto r = potential_expectation(W, V, {t}, 3, 3.0);
    double tail = 0.0;  // c = 1, |V|_1 = 0.1, |W|_1 = 1
    for (int m = 4; m < 80; ++m) tail += std::pow(0.1, m) * std::pow(m + 1.0, m - 1) / std::tgamma(m + 1.0);
    CHECK(r.tail_bound == doctest::Approx(tail).epsilon(1e-10));
    CHECK_FALSE(r.tail_divergent);
    CHECK_FALSE(r.asymmetric_potential);
    auto big = potential_expectation(W, pot({{"x1", 5.0}}), {t}, 2, 3.0);
    CHECK(big.tail_divergent);
    CHECK(big.asymmetric_potential);
}

TEST_CASE("candidate closed form is finite and reported") {
    CHECK(candidate_free_energy(0.1, 1.0) == doctest::Approx(std::expm1(0.1) * std::exp(-0.5)));
}
