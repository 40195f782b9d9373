// Acceptance run: one PASS/FAIL line per criterion.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "corpus.hpp"
#include "mf/engine.hpp"
#include "mf/free_energy.hpp"
#include "mf/freebm.hpp"
#include "mf/mc.hpp"
#include "mf/skein.hpp"
#include "mf/wilson.hpp"
#include "oracles.hpp"

using namespace mf;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream note;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            note << "[fail: " << what << "] ";
        }
    }
};

Skein sk(const std::vector<LatticeLoop>& l, IngestMode mode = IngestMode::strict) {
    return make_skein(ingest_lattice(l, mode));
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Closed-form moments against the moment recursion.
void moments(Outcome& o) {
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        auto tab = moment_recursion(12, t);
        for (int n = 1; n <= 12; ++n) worst = std::max(worst, std::abs(biane_moment(n, t) - tab.values[n - 1]));
    }
    double m2 = biane_moment(2, 1.0), m3 = biane_moment(3, 1.0);
    double sec = elapsed(t0);
    o.require(worst <= 1e-9, "max |closed - recursion| " + std::to_string(worst));
    o.require(std::abs(m2) <= 1e-12, "mu_{1,2} != 0");
    o.require(std::abs(m3 + 0.5 * std::exp(-1.5)) <= 1e-12, "mu_{1,3} != -e^{-3/2}/2");
    o.require(sec < 1.0, "runtime");
    o.note << "max diff " << worst << ", mu_{1,2} " << m2 << ", mu_{1,3} " << m3 << ", " << sec << " s";
}

// 2. Engine at N = 1 against the white-noise oracle.
void u1_exact(Outcome& o) {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ut(0.0, 2.0);
    double worst = 0.0;
    for (int it = 0; it < 200; ++it) {
        auto pw = oracle::random_partial(rng, 8, 2);
        TimeVector t{ut(rng), ut(rng)};
        double e = evaluate_phi(pw, t, 1.0);
        worst = std::max({worst, std::abs(e - oracle::u1_cumulant(pw, t)), std::abs(e - u1_cumulant(pw, t))});
    }
    double sec = elapsed(t0);
    o.require(worst <= 1e-8, "max diff");
    o.require(sec < 60.0, "runtime");
    o.note << "200 partial words, max diff " << worst << ", " << sec << " s";
}

// 3. Finite N against sampling.
void finite_n(Outcome& o) {
    auto t0 = std::chrono::steady_clock::now();
    BmConfig c;
    c.N = 3;
    c.step = 1e-3;
    c.samples = 100000;
    std::vector<PartitionedWord> T{singletons({{1}}), singletons({{1, 1}}), singletons({{1, 2}}), singletons({{1, -2}})};
    TimeVector t{1.0, 1.0};
    auto r = estimate_observables(c, t, T);
    for (std::size_t k = 0; k < T.size(); ++k) {
        double exact = evaluate_phi(T[k], t, 3.0);
        double se = r[k].cumulant.stderr_re, d = std::abs(r[k].cumulant.value.real() - exact);
        o.require(d <= 3 * se, format_partial(T[k]) + " outside 3 stderr");
        o.require(r[k].richardson_bias < se, format_partial(T[k]) + " Richardson bias above stderr");
        o.note << format_word(T[k].words[0]) << ": " << exact << " vs " << r[k].cumulant.value.real() << " +- " << se
               << " (bias " << r[k].richardson_bias << "); ";
    }
    double sec = elapsed(t0);
    o.require(sec < 300.0, "runtime");
    o.note << sec << " s";
}

// 4. Simple loop and separated loops.
void anchors(Outcome& o) {
    auto s = ingest_lattice(corpus::simple_loop());
    double worst = 0.0;
    for (double a : {0.5, 1.0, 2.0}) {
        std::vector<double> area = s.g.area;
        for (double& x : area) x *= a;
        worst = std::max(worst, std::abs(wilson_evaluate_areas(s.g, s.loops, area, INFINITY) - std::exp(-a / 2)));
    }
    o.require(worst <= 1e-10, "simple loop");
    auto frame = ingest_lattice({corpus::loop("EEEENWWWWS"), corpus::loop("ENWS"), corpus::loop("ENWS", 3, 0)},
                                IngestMode::permissive);
    double sep = std::abs(wilson_evaluate(frame.g, {frame.loops[1], frame.loops[2]}, INFINITY));
    auto big = ingest_lattice({corpus::loop("EEENNNWWWSSS"), corpus::loop("ENWS", 0, 1), corpus::loop("ENWS", 2, 1)},
                              IngestMode::permissive);
    double sep2 = std::abs(wilson_evaluate(big.g, {big.loops[1], big.loops[2]}, INFINITY));
    o.require(sep <= 1e-10 && sep2 <= 1e-10, "separated cumulant");
    o.note << "simple loop max diff " << worst << ", separated cumulants " << sep << ", " << sep2;
}

// 5. Winding numbers from the lasso word and the area inequality.
void winding(Outcome& o) {
    std::mt19937_64 rng(505);
    int mism = 0, bp = 0;
    for (int it = 0; it < 500; ++it) {
        auto L = corpus::random_loop(rng, 16);
        auto s = ingest_lattice({L}, IngestMode::permissive);
        auto b = dual_tree_and_basis(s.g, s.loops[0].base);
        auto n = winding_numbers(s.g, s.loops);
        auto counts = signed_counts(decompose_loop(s.g, b, s.loops[0]), static_cast<int>(s.g.bounded.size()));
        for (std::size_t i = 0; i < s.g.bounded.size(); ++i)
            if (counts[i] != n[s.g.bounded[i]]) ++mism;
        if (!winding_and_area(s.g, b, s.loops[0]).bp_exact_ok) ++bp;
    }
    o.require(mism == 0, "winding mismatch");
    o.require(bp == 0, "area inequality");
    o.note << "500 loops, " << mism << " winding mismatches, " << bp << " area violations";
}

// 6. Loop equations by finite differences.
void loop_equations(Outcome& o) {
    int checks = 0, ratios = 0, roundoff = 0;
    double worst = 0.0;
    for (auto [name, loops] : {std::pair{"figure-eight", corpus::figure_eight()}, {"two squares", corpus::two_squares()}}) {
        auto rep = verify_mm(sk(loops), -1, 1e-4, INFINITY);
        worst = std::max(worst, rep.max_residual);
        for (const auto& c : rep.checks) {
            ++checks;
            if (c.coarse_residual <= 1e-9) {
                // Exactly linear direction: both residuals are rounding noise.
                ++roundoff;
                continue;
            }
            ++ratios;
            o.require(c.scaling_ratio >= 3.0 && c.scaling_ratio <= 5.0,
                      std::string(name) + " " + c.kind + " ratio " + std::to_string(c.scaling_ratio));
        }
    }
    o.require(worst <= 1e-5, "residual");
    o.note << checks << " equations, max residual " << worst << ", " << ratios << " scaling ratios in [3,5], "
           << roundoff << " at rounding level";
}

// 7. Area recursion against direct evaluation.
void cross_path(Outcome& o) {
    auto t0 = std::chrono::steady_clock::now();
    int used = 0;
    double worst = 0.0;
    for (auto loops : {corpus::simple_loop(), corpus::figure_eight(), corpus::figure_eight_wide(), corpus::limacon(),
                       corpus::chain(), corpus::two_squares(), corpus::two_squares_opposite(), corpus::covered_loop()}) {
        auto s = sk(loops);
        if (complexity(s).complexity > 3) continue;
        ++used;
        double d = std::abs(mm_solve(s).value - wilson_evaluate(*s.g, s.loops, INFINITY));
        worst = std::max(worst, d);
    }
    double sec = elapsed(t0);
    o.require(worst <= 1e-4, "max diff");
    o.require(sec < 300.0, "runtime");
    o.note << used << " skeins, max diff " << worst << ", " << sec << " s";
}

// 8. Small-area slopes.
void small_area(Outcome& o) {
    struct Case {
        const char* name;
        std::vector<LatticeLoop> loops;
        IngestMode mode;
    };
    std::vector<Case> cases{{"simple", corpus::simple_loop(), IngestMode::strict},
                            {"figure-eight", corpus::figure_eight(), IngestMode::strict},
                            {"limacon", corpus::limacon(), IngestMode::strict},
                            {"two squares", corpus::two_squares(), IngestMode::strict},
                            {"twin cells", {corpus::loop("ENWS"), corpus::loop("ENWS")}, IngestMode::permissive}};
    for (const auto& c : cases) {
        auto r = small_area_coefficients(sk(c.loops, c.mode));
        o.require(r.rel_error <= 1e-2, c.name);
        o.note << c.name << " " << r.predicted << "/" << r.fitted << "; ";
    }
    auto apart = small_area_coefficients(sk({corpus::loop("ENWS"), corpus::loop("ENWS", 1, 1)}, IngestMode::permissive));
    o.require(apart.predicted == 0.0 && std::abs(apart.fitted) <= 1e-6, "corner-touching pair");
    o.note << "corner pair " << apart.fitted;
}

// 9. Cayley-tree, remainder and second-order bounds.
void bounds(Outcome& o) {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> ut(0.05, 2.0);
    const double Ns[] = {1.0, 2.0, 3.0, INFINITY};
    double tree = INFINITY, rem = INFINITY, psi = INFINITY;
    for (int it = 0; it < 100; ++it) {
        auto pw = oracle::random_partial(rng, 6, 2);
        std::vector<Word> words(pw.words.begin(), pw.words.begin() + std::min<std::size_t>(3, pw.words.size()));
        auto r = check_bounds(words, {ut(rng), ut(rng)}, Ns[it % 4]);
        tree = std::min(tree, r.tree_margin);
        rem = std::min(rem, r.remainder_margin);
        psi = std::min(psi, r.psi1_margin);
        if (!r.ok) o.require(false, r.witness);
    }
    o.note << "100 tuples, min margins: tree " << tree << ", remainder " << rem << ", psi_1 " << psi;
}

// 10. Free energy at N = 1 against quadrature.
double u1_log_laplace(double z, double t) {
    double s = std::sqrt(t);
    auto f = [&](double x) { return std::exp(2 * z * std::cos(x)) * std::exp(-x * x / (2 * t)) / std::sqrt(2 * M_PI * t); };
    return std::log(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -14 * s, 14 * s, 15, 1e-15));
}
void free_energy(Outcome& o) {
    Potential V;
    V.add({1}, 1.0);
    V.add({-1}, 1.0);
    auto s = free_energy_series(V, {1.0}, 4, 1.0);
    for (double z : {0.05, 0.1}) {
        double series = 0.0;
        for (int m = 1; m <= 4; ++m) series += s.c[m].real() * std::pow(z, m);
        double q = u1_log_laplace(z, 1.0);
        o.require(std::abs(series - q) <= 1e-6, "z=" + std::to_string(z));
        o.note << "z=" << z << " diff " << std::abs(series - q) << "; ";
    }
    Potential D;
    D.add({1}, 1.0);
    auto inf = free_energy_series(D, {1.0}, 6, INFINITY);
    for (double z : {0.05, 0.1}) {
        double series = 0.0;
        for (int m = 1; m <= 6; ++m) series += inf.c[m].real() * std::pow(z, m);
        o.note << "candidate closed form (reported) z=" << z << ": " << candidate_free_energy(z, 1.0) << " vs series " << series
               << "; ";
    }
}

// 11. Fluctuations at N = 8.
void fluct(Outcome& o) {
    BmConfig c;
    c.N = 8;
    c.step = 1e-2;
    c.samples = 20000;
    for (auto [name, loops] : {std::pair{"simple", corpus::simple_loop()}, {"figure-eight", corpus::figure_eight()}}) {
        auto s = ingest_lattice(loops);
        auto p = wilson_problem(s.g, s.loops);
        const Word& w = p.pw.words[0];
        auto f = fluctuations(c, p.t, w, Exec::Parallel);
        double limit = evaluate_phi(singletons({w, inverse(w)}), p.t, INFINITY);
        double at8 = evaluate_phi(singletons({w, inverse(w)}), p.t, 8.0);
        // Finite-N skewness of Re Tr H from the engine's third and second cumulants.
        Word wi = inverse(w);
        auto k = [&](std::vector<Word> ws) { return evaluate_phi(singletons(ws), p.t, 8.0); };
        double var_re = 0.5 * (at8 + k({w, w}));
        double k3_re = (k({w, w, w}) + 3 * k({w, w, wi}) + 3 * k({w, wi, wi}) + k({wi, wi, wi})) / 8.0 / 8.0;
        double skew8 = k3_re / std::pow(var_re, 1.5);
        o.require(std::abs(f.skewness.value.real()) <= 3 * f.skewness.stderr_re, std::string(name) + " skewness");
        o.require(std::abs(f.kurtosis.value.real() - 3.0) <= 3 * f.kurtosis.stderr_re, std::string(name) + " kurtosis");
        o.require(std::abs(f.variance.value.real() - limit) <= 3 * f.variance.stderr_re, std::string(name) + " variance");
        o.note << name << ": skew " << f.skewness.value.real() << " +- " << f.skewness.stderr_re << ", kurt "
               << f.kurtosis.value.real() << " +- " << f.kurtosis.stderr_re << ", var " << f.variance.value.real()
               << " +- " << f.variance.stderr_re << " vs limit " << limit << " (N=8 engine " << at8 << ", N=8 engine skew " << skew8 << "); ";
    }
}

// 12. Determinant projection.
void det(Outcome& o) {
    for (int N : {2, 3}) {
        for (auto [name, loops] : {std::pair{"simple", corpus::simple_loop()}, {"figure-eight", corpus::figure_eight()}}) {
            auto s = ingest_lattice(loops);
            auto p = wilson_problem(s.g, s.loops);
            BmConfig c;
            c.N = N;
            c.step = 2e-3;
            c.samples = 20000;
            auto r = u1_det_check(c, p.t, p.pw.words[0]);
            o.require(r.pass, std::string(name) + " N=" + std::to_string(N));
            o.note << name << " N=" << N << " z=" << r.z << "; ";
        }
    }
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
    std::vector<bool> run(13, argc == 1);
    for (int i = 1; i < argc; ++i) {
        int k = std::atoi(argv[i]);
        if (k >= 1 && k <= 12) run[k] = true;
    }
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
        {"moments", moments},           {"U(1) exactness", u1_exact},   {"finite N vs MC", finite_n},
        {"master field anchors", anchors}, {"winding", winding},         {"loop equations", loop_equations},
        {"cross-path", cross_path},     {"small area", small_area},     {"bounds", bounds},
        {"free energy", free_energy},   {"fluctuations", fluct},        {"determinant", det}};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!run[i + 1]) continue;
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.note << "exception: " << e.what();
        }
        std::printf("criterion %2zu %-22s %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                    o.note.str().c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
