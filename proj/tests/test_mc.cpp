#include <cmath>
#include <random>

#include "doctest.h"
#include "mf/engine.hpp"
#include "mf/errors.hpp"
#include "mf/free_energy.hpp"
#include "mf/mc.hpp"

using namespace mf;
using cd = std::complex<double>;

namespace {

bool within(const Estimate& e, double target, double k = 3.0) {
    return std::abs(e.value.real() - target) <= k * e.stderr_re;
}

// Univariate k-statistics from raw power sums.
double k3_power_sums(const std::vector<double>& x) {
    double n = x.size(), s1 = 0, s2 = 0, s3 = 0;
    for (double v : x) s1 += v, s2 += v * v, s3 += v * v * v;
    return (n * n * s3 - 3 * n * s2 * s1 + 2 * s1 * s1 * s1) / (n * (n - 1) * (n - 2));
}
double k4_power_sums(const std::vector<double>& x) {
    double n = x.size(), s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (double v : x) s1 += v, s2 += v * v, s3 += v * v * v, s4 += v * v * v * v;
    return ((n * n * n + n * n) * s4 - 4 * (n * n + n) * s3 * s1 - 3 * (n * n - n) * s2 * s2 + 12 * n * s2 * s1 * s1 -
            6 * s1 * s1 * s1 * s1) /
           (n * (n - 1) * (n - 2) * (n - 3));
}

}  // namespace

TEST_CASE("step exponential") {
    std::mt19937_64 rng(5);
    for (int N : {1, 2, 3, 5, 8, 9}) {
        for (double scale : {0.03, 0.7, 3.0}) {
            CMatrix A = scale * gaussian_algebra(N, rng);
            CHECK((A + A.adjoint()).cwiseAbs().maxCoeff() == 0.0);
            CMatrix T = expm_skew(A, ExpMethod::taylor);
            CMatrix E = expm_skew(A, ExpMethod::eigen);
            CHECK((T - E).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(unitarity_defect(T) < 1e-13);
        }
    }
}

TEST_CASE("algebra normalization") {
    // E[xi^2] = -Id; diagonal variance 1/N, off-diagonal second moment 1/N.
    std::mt19937_64 rng(9);
    const int N = 4, n = 40000;
    CMatrix acc = CMatrix::Zero(N, N);
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
        CMatrix X = gaussian_algebra(N, rng);
        acc += X * X;
        off += std::norm(X(0, 1));
    }
    acc /= n;
    CHECK((acc + CMatrix::Identity(N, N)).cwiseAbs().maxCoeff() < 0.03);
    CHECK(off / n == doctest::Approx(1.0 / N).epsilon(0.03));
}

TEST_CASE("t = 0 gives the identity") {
    BmConfig c;
    c.N = 3;
    auto U = sample_unitary_bm(c, {0.0, 0.0});
    CHECK(U[0] == CMatrix::Identity(3, 3));
    std::mt19937_64 rng(1);
    auto e = sample_coupled(3, 0.0, 1e-3, rng);
    CHECK(e.fine == CMatrix::Identity(3, 3));
    CHECK(e.coarse == CMatrix::Identity(3, 3));
    CHECK_THROWS_AS(sample_unitary_bm(c, {1.0, 0.5}), ValidationError);
}

TEST_CASE("samples are unitary") {
    BmConfig c;
    c.N = 5;
    c.step = 1e-2;
    for (std::uint64_t i = 0; i < 20; ++i) {
        auto U = sample_unitary_bm(c, {0.5, 2.0}, i);
        for (const auto& M : U) CHECK(unitarity_defect(M) <= 1e-12);
    }
}

TEST_CASE("N = 1 is a circular Brownian motion") {
    BmConfig c;
    c.N = 1;
    c.step = 1e-2;
    c.samples = 100000;
    for (double t : {0.5, 1.0}) {
        auto r = estimate_observables(c, {t}, {singletons({{1}})});
        CHECK(within(r[0].cumulant, std::exp(-t / 2)));
        auto f = fluctuations(c, {t}, {1});
        CHECK(within(f.variance, 1 - std::exp(-t)));
    }
}

TEST_CASE("k-statistics") {
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> x(200);
    for (double& v : x) v = ex(rng);
    std::vector<cd> c(x.begin(), x.end());
    CHECK(joint_kstat({c, c, c}).real() == doctest::Approx(k3_power_sums(x)).epsilon(1e-10));
    CHECK(joint_kstat({c, c, c, c}).real() == doctest::Approx(k4_power_sums(x)).epsilon(1e-10));
    // Leaving rows out equals computing on the remaining rows.
    std::vector<double> rest(x.begin() + 50, x.end());
    CHECK(joint_kstat({c, c, c, c}, 0, 50).real() == doctest::Approx(k4_power_sums(rest)).epsilon(1e-10));
    // Unbiasedness on a large exponential sample: kappa_n = (n-1)!.
    std::vector<cd> big(400000);
    for (auto& v : big) v = ex(rng);
    CHECK(joint_kstat({big, big}).real() == doctest::Approx(1.0).epsilon(0.02));
    CHECK(joint_kstat({big, big, big}).real() == doctest::Approx(2.0).epsilon(0.05));
    CHECK(joint_kstat({big, big, big, big}).real() == doctest::Approx(6.0).epsilon(0.15));
    CHECK_THROWS_AS(joint_kstat({c, c, c, c, c}), ValidationError);
}

TEST_CASE("seed determinism and serial/parallel agreement") {
    BmConfig c;
    c.N = 2;
    c.step = 1e-2;
    c.samples = 500;
    std::vector<PartitionedWord> T{singletons({{1, 1}}), singletons({{1}, {-1}})};
    auto a = estimate_observables(c, {1.0}, T, Exec::Parallel);
    auto b = estimate_observables(c, {1.0}, T, Exec::Parallel);
    auto s = estimate_observables(c, {1.0}, T, Exec::Serial);
    for (std::size_t k = 0; k < T.size(); ++k) {
        CHECK(a[k].cumulant.value == b[k].cumulant.value);
        CHECK(a[k].cumulant.value == s[k].cumulant.value);
        CHECK(a[k].cumulant.stderr_re == s[k].cumulant.stderr_re);
    }
    c.seed = 43;
    auto d = estimate_observables(c, {1.0}, T);
    CHECK(d[0].cumulant.value != a[0].cumulant.value);
}

TEST_CASE("adjoint invariance") {
    BmConfig c;
    c.N = 2;
    c.step = 1e-2;
    std::mt19937_64 rng(11);
    CMatrix g = expm_skew(2.0 * gaussian_algebra(2, rng));
    const int n = 4000;
    std::vector<cd> plain(n), conj(n);
    for (int i = 0; i < n; ++i) {
        CMatrix U = sample_unitary_bm(c, {1.0}, i)[0];
        plain[i] = U(0, 0);
        conj[i] = (g * U * g.adjoint())(0, 0);
    }
    auto mean = [](const std::vector<cd>& v) {
        return jackknife(v.size(), [&](std::size_t lo, std::size_t hi) {
            cd s = 0;
            for (std::size_t i = 0; i < v.size(); ++i)
                if (i < lo || i >= hi) s += v[i];
            return s / static_cast<double>(v.size() - (hi - lo));
        });
    };
    auto a = mean(plain), b = mean(conj);
    CHECK(std::abs(a.value.real() - b.value.real()) <= 3 * std::hypot(a.stderr_re, b.stderr_re));
    CHECK(std::abs(a.value.real() - std::exp(-0.5)) <= 3 * a.stderr_re + 0.01);
}

TEST_CASE("increments are independent of the past") {
    BmConfig c;
    c.N = 2;
    c.step = 5e-3;
    const int n = 6000;
    std::vector<cd> v(n);
    for (int i = 0; i < n; ++i) {
        auto U = sample_unitary_bm(c, {0.7, 1.7}, i);
        CMatrix inc = U[0].adjoint() * U[1];
        v[i] = (inc * inc).trace() / 2.0;
    }
    auto e = jackknife(n, [&](std::size_t lo, std::size_t hi) {
        cd s = 0;
        for (int i = 0; i < n; ++i)
            if (static_cast<std::size_t>(i) < lo || static_cast<std::size_t>(i) >= hi) s += v[i];
        return s / static_cast<double>(n - (hi - lo));
    });
    double exact = evaluate_phi(singletons({{1, 1}}), {1.0}, 2.0);
    CHECK(within(e, exact));
}

TEST_CASE("engine agrees with sampling at N = 2") {
    BmConfig c;
    c.N = 2;
    c.step = 2e-3;
    c.samples = 20000;
    std::vector<PartitionedWord> T{singletons({{1, 1}}), singletons({{1}, {-1}}), singletons({{1, 2}, {-1, -2}})};
    auto r = estimate_observables(c, {1.0, 0.5}, T);
    for (std::size_t k = 0; k < T.size(); ++k) {
        double exact = evaluate_phi(T[k], {1.0, 0.5}, 2.0);
        INFO(format_partial(T[k]) << " mc " << r[k].cumulant.value << " +- " << r[k].cumulant.stderr_re << " exact "
                                  << exact);
        CHECK(within(r[k].cumulant, exact));
        CHECK(r[k].max_unitarity_defect <= 1e-12);
    }
}

TEST_CASE("determinant projection") {
    BmConfig c;
    c.N = 3;
    c.step = 5e-3;
    c.samples = 4000;
    auto simple = u1_det_check(c, {1.0}, {1});
    CHECK(simple.exact == doctest::Approx(std::exp(-0.5)));
    CHECK(simple.pass);
    auto eight = u1_det_check(c, {1.0, 1.0}, {1, -2});
    CHECK(eight.exact == doctest::Approx(std::exp(-1.0)));
    CHECK(eight.pass);
    auto zero = u1_det_check(c, {0.0}, {1});
    CHECK(zero.det.value == cd(1.0, 0.0));
    CHECK(zero.pass);
}

TEST_CASE("reweighted expectation matches the potential series") {
    BmConfig c;
    c.N = 3;
    c.step = 2e-3;
    c.samples = 20000;
    Potential W, V;
    W.add({1}, 1.0);
    V.add({1}, 0.05);
    V.add({-1}, 0.05);
    auto mc = reweighted_expectation(c, {1.0}, W, V);
    auto series = potential_expectation(W, V, {1.0}, 3, 3.0);
    INFO("mc " << mc.value << " +- " << mc.stderr_re << " series " << series.value);
    CHECK(within(mc, series.value.real()));
    CHECK(std::abs(series.value.real() - std::exp(-0.5)) > 0.01);  // the potential shifts the value
}

TEST_CASE("configuration validation") {
    BmConfig c;
    c.samples = 1;
    CHECK_THROWS_AS(validate(c), ValidationError);
    c.samples = 10;
    c.step = 0;
    CHECK_THROWS_AS(validate(c), ValidationError);
    c.step = 1e-2;
    CHECK_THROWS_AS(estimate_observables(c, {1.0}, {singletons({{2}})}), ValidationError);
    CHECK_THROWS_AS(estimate_observables(c, {1.0}, {singletons({{1}, {1}, {1}, {1}, {1}})}), ValidationError);
    CHECK(default_step({4.0}) == doctest::Approx(2.5e-4));
    CHECK(default_step({0.5}) == doctest::Approx(1e-3));
}
