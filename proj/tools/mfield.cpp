// mfield: command-line front end for the master-field toolkit.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mf/engine.hpp"
#include "mf/errors.hpp"
#include "mf/free_energy.hpp"
#include "mf/freebm.hpp"
#include "mf/io.hpp"
#include "mf/kernels.hpp"
#include "mf/mc.hpp"
#include "mf/planar.hpp"
#include "mf/skein.hpp"
#include "mf/wilson.hpp"

using namespace mf;

namespace {

struct Global {
    int threads = 0;
    std::string format = "json";
    std::string out;
    std::size_t closure_cap = 5000000;
};

json metadata(const std::string& sub, const json& config, const json& tie_break = json::object()) {
    json m;
    m["tool"] = "mfield";
    m["version"] = kVersion;
    m["subcommand"] = sub;
    m["config"] = config;
    m["threads"] = num_threads();
    m["closure_cap"] = closure_cap();
    const char* cache = std::getenv("MF_CACHE_DIR");
    m["cache_dir"] = cache ? json(cache) : json(nullptr);
    m["tie_break"] = tie_break;
    return m;
}

// A single time broadcasts to every letter the target uses.
TimeVector times_for(TimeVector t, int letters) {
    if (t.size() == 1 && letters > 1) t.assign(letters, t[0]);
    if (static_cast<int>(t.size()) < letters) throw ValidationError("fewer times than letters in the word");
    return t;
}

PartitionedWord target_from(const std::string& word, const std::string& partial) {
    if (word.empty() == partial.empty()) throw ValidationError("give exactly one of --word and --partial");
    if (!word.empty()) return singletons({parse_word(word)});
    return parse_partial(partial);
}

int letters_of(const PartitionedWord& pw) {
    int q = 0;
    for (const auto& w : pw.words) q = std::max(q, max_generator(w));
    return q;
}

json series_json(const EpsilonSeries& s) { return json(s.c); }

json bfs_tie_break(int root, bool reversed) {
    return {{"dual_bfs", reversed ? "largest face id first" : "smallest face id first"},
            {"root_vertex", root},
            {"lasso_children", "boundary order after the parent edge"}};
}

// ---------------------------------------------------------------- moments
struct MomentsArgs {
    double t = 1.0;
    int n = 3;
};
json run_moments(const MomentsArgs& a) {
    if (!(a.t >= 0) || !std::isfinite(a.t)) throw ValidationError("t must be finite and >= 0");
    if (a.n < 1 || a.n > 500) throw ValidationError("n must be in [1, 500]");
    json doc;
    doc["metadata"] = metadata("moments", {{"t", a.t}, {"n", a.n}});
    auto table = moment_recursion(a.n, a.t);
    json rows = json::array();
    for (int k = 1; k <= a.n; ++k) {
        double c = biane_moment(k, a.t), r = table.values[k - 1];
        rows.push_back({{"n", k}, {"moment", c}, {"recursion", r}, {"abs_diff", std::abs(c - r)}});
    }
    doc["rows"] = rows;
    return doc;
}

// ---------------------------------------------------------------- word-eval
struct WordArgs {
    std::string word, partial, t = "1", N = "inf";
    int gmax = -1;
};
json run_word_eval(const WordArgs& a) {
    PartitionedWord pw = target_from(a.word, a.partial);
    TimeVector t = times_for(parse_times(a.t), letters_of(pw));
    double N = parse_N(a.N);
    json doc;
    doc["metadata"] = metadata("word-eval", {{"word", a.word}, {"partial", a.partial}, {"t", t}, {"N", format_N(N)}, {"gmax", a.gmax}});
    doc["target"] = format_partial(pw);
    doc["N"] = format_N(N);
    doc["value"] = evaluate_phi(pw, t, N);
    if (a.gmax >= 0) {
        auto s = evaluate_phi_series(pw, t, a.gmax);
        doc["series"] = series_json(s);
        if (std::isfinite(N)) doc["series_value"] = s.value(N);
    }
    return doc;
}

// ---------------------------------------------------------------- free-energy
struct FreeArgs {
    std::string potential, expect, t = "1", N = "inf";
    int order = 4, gmax = -1;
};
json run_free_energy(const FreeArgs& a) {
    Potential V = read_potential(a.potential);
    int q = 0;
    for (const auto& [w, c] : V.terms) q = std::max(q, max_generator(w));
    Potential W;
    if (!a.expect.empty()) {
        W = read_potential(a.expect);
        for (const auto& [w, c] : W.terms) q = std::max(q, max_generator(w));
    }
    TimeVector t = times_for(parse_times(a.t), std::max(q, 1));
    double N = parse_N(a.N);
    if (a.order < 1) throw ValidationError("order must be >= 1");
    json doc;
    doc["metadata"] = metadata("free-energy", {{"potential", a.potential}, {"expect", a.expect}, {"t", t},
                                               {"order", a.order}, {"N", format_N(N)}, {"gmax", a.gmax}});
    auto st = potential_stats(V, t);
    auto radii = radius_bounds(V, t);
    doc["potential"] = {{"l1", st.l1}, {"linf", st.linf}, {"eta", st.eta}, {"symmetric", st.symmetric}};
    doc["radius"] = std::isinf(radii.r) ? json("inf") : json(radii.r);
    doc["radius_prime"] = std::isinf(radii.r_prime) ? json("inf") : json(radii.r_prime);
    auto fe = a.gmax >= 0 ? free_energy_series_eps(V, t, a.order, a.gmax) : free_energy_series(V, t, a.order, N);
    json rows = json::array();
    for (int m = 1; m <= a.order; ++m) {
        json r = {{"m", m}, {"re", fe.c[m].real()}, {"im", fe.c[m].imag()}, {"bound", fe.coeff_bound[m]}};
        if (a.gmax >= 0) {
            json e = json::array();
            for (auto z : fe.eps[m]) e.push_back(complex_json(z));
            r["eps"] = e;
        }
        rows.push_back(r);
    }
    doc["rows"] = rows;
    if (!a.expect.empty()) {
        auto ex = potential_expectation(W, V, t, a.order, N);
        json partial = json::array();
        for (auto z : ex.partial) partial.push_back(complex_json(z));
        doc["expectation"] = {{"value", complex_json(ex.value)},
                              {"partial_sums", partial},
                              {"tail_bound", std::isfinite(ex.tail_bound) ? json(ex.tail_bound) : json("inf")},
                              {"tail_divergent", ex.tail_divergent},
                              {"asymmetric_potential", ex.asymmetric_potential}};
    }
    return doc;
}

// ---------------------------------------------------------------- loop-eval
struct SkeinArgs {
    std::string skein;
    bool permissive = false;
};
SkeinInput load(const SkeinArgs& a) {
    return read_skein(a.skein, a.permissive ? IngestMode::permissive : IngestMode::strict);
}

json faces_json(const EmbeddedGraph& g) {
    json faces = json::array();
    for (int f = 0; f < g.num_faces(); ++f)
        faces.push_back({{"id", f}, {"area", g.area[f]}, {"letter", g.letter[f]}, {"unbounded", f == g.f_inf}});
    return faces;
}

struct LoopArgs {
    SkeinArgs s;
    std::string N = "inf";
    int gmax = -1, root = -1;
    bool reversed = false;
};
json run_loop_eval(const LoopArgs& a) {
    auto in = load(a.s);
    const auto& g = in.skein.g;
    double N = parse_N(a.N);
    WilsonOptions opt;
    opt.root = a.root;
    opt.reversed = a.reversed;
    int root = a.root >= 0 ? a.root : in.skein.loops[0].base;
    if (root >= g.num_vertices) throw ValidationError("root vertex out of range");
    json doc;
    doc["metadata"] = metadata("loop-eval",
                               {{"skein", a.s.skein}, {"N", format_N(N)}, {"gmax", a.gmax}, {"root", a.root},
                                {"reversed", a.reversed}, {"permissive", a.s.permissive}},
                               bfs_tie_break(root, a.reversed));
    auto prob = wilson_problem(g, in.skein.loops, in.partition, opt);
    doc["target"] = format_partial(prob.pw);
    doc["face_times"] = prob.t;
    doc["N"] = format_N(N);
    doc["value"] = evaluate_phi(prob.pw, prob.t, N);
    if (a.gmax >= 0) doc["series"] = series_json(evaluate_phi_series(prob.pw, prob.t, a.gmax));
    doc["faces"] = faces_json(g);
    auto basis = dual_tree_and_basis(g, root, a.reversed);
    json rows = json::array();
    for (std::size_t k = 0; k < in.skein.loops.size(); ++k) {
        const auto& l = in.skein.loops[k];
        auto w = winding_and_area(g, basis, l);
        rows.push_back({{"loop", k + 1},
                        {"word", format_word(prob.pw.words[k])},
                        {"amperean", w.amperean},
                        {"length", std::isfinite(w.length) ? json(w.length) : json(nullptr)},
                        {"max_multiplicity", w.max_multiplicity},
                        {"bp_margin", std::isfinite(w.bp_margin) ? json(w.bp_margin) : json(nullptr)},
                        {"bp_exact_ok", w.bp_exact_ok},
                        {"word_bound_margin", std::isfinite(w.word_bound_margin) ? json(w.word_bound_margin) : json(nullptr)},
                        {"winding", w.winding}});
    }
    doc["rows"] = rows;
    return doc;
}

// ---------------------------------------------------------------- mm-check
json crossings_json(const IntersectionReport& X) {
    json out = json::array();
    for (std::size_t i = 0; i < X.crossings.size(); ++i) {
        const auto& x = X.crossings[i];
        out.push_back({{"vertex", x.vertex},
                       {"self", x.self},
                       {"loops", {x.loop_a + 1, x.loop_b + 1}},
                       {"faces", {x.face[0], x.face[1], x.face[2], x.face[3]}},
                       {"class", X.cls[i]}});
    }
    return out;
}

json complexity_json(const ComplexityReport& c) {
    return {{"intersections", c.intersections}, {"d_inf", c.d_inf}, {"complexity", c.complexity},
            {"based_at_infinity", c.based_at_infinity}};
}

struct MMArgs {
    SkeinArgs s;
    int crossing = -1;
    double h = 1e-4;
    std::string N = "inf";
};
json run_mm_check(const MMArgs& a) {
    auto in = load(a.s);
    Skein sk = make_skein(std::move(in.skein));
    double N = parse_N(a.N);
    auto X = intersection_report(sk);
    json reps = json::array();
    for (int r : X.representative) reps.push_back(X.crossings[r].vertex);
    json doc;
    doc["metadata"] = metadata("mm-check", {{"skein", a.s.skein}, {"crossing", a.crossing}, {"h", a.h}, {"N", format_N(N)}},
                               {{"representatives", reps},
                                {"representative_rule", "least vertex id per class"},
                                {"loop_tree", "BFS from loop 1, classes in order"}});
    doc["crossings"] = crossings_json(X);
    doc["complexity"] = complexity_json(complexity(sk));
    if (X.loops_connected) {
        auto K = mu_and_kazakov(sk);
        doc["kazakov"] = {{"rank", K.rank},
                          {"expected_rank", K.expected_rank},
                          {"family_rank", K.family_rank},
                          {"kernel_residual", K.kernel_residual},
                          {"orthogonality_residual", K.orthogonality_residual},
                          {"alpha_residual", K.alpha_residual},
                          {"beta_residual", K.beta_residual},
                          {"inversion_residual", K.inversion_residual},
                          {"counts", {K.alpha_count, K.beta_count, K.gamma_count}},
                          {"ok", K.ok},
                          {"witness", K.witness}};
    }
    auto rep = verify_mm(sk, a.crossing, a.h, N);
    json rows = json::array();
    for (const auto& c : rep.checks)
        rows.push_back({{"kind", c.kind},
                        {"where", c.where},
                        {"lhs", c.lhs},
                        {"rhs", c.rhs},
                        {"residual", c.residual},
                        {"residual_richardson", c.residual_richardson},
                        {"scaling_ratio", c.scaling_ratio}});
    doc["rows"] = rows;
    doc["max_residual"] = rep.max_residual;
    return doc;
}

// ---------------------------------------------------------------- mm-solve
struct SolveArgs {
    SkeinArgs s;
    MMSolveOptions opt;
    bool compare = true;
};
json run_mm_solve(const SolveArgs& a) {
    auto in = load(a.s);
    Skein sk = make_skein(std::move(in.skein));
    json doc;
    doc["metadata"] = metadata("mm-solve", {{"skein", a.s.skein}, {"steps", a.opt.steps}, {"tol", a.opt.tol},
                                            {"max_steps", a.opt.max_steps}, {"max_nodes", a.opt.max_nodes}});
    doc["complexity"] = complexity_json(complexity(sk));
    auto r = mm_solve(sk, {}, a.opt);
    doc["value"] = r.value;
    doc["ode_nodes"] = r.ode_nodes;
    doc["leaves"] = r.leaves;
    doc["steps"] = r.steps;
    doc["step_change"] = r.step_change;
    if (a.compare) {
        double direct = wilson_evaluate(*sk.g, sk.loops, INFINITY);
        doc["direct"] = direct;
        doc["abs_diff"] = std::abs(direct - r.value);
    }
    return doc;
}

// ---------------------------------------------------------------- mc
struct MCArgs {
    std::string skein, word, partial, t = "1";
    bool permissive = false;
    int N = 3;
    long long samples = 100000;
    double step = 0.0;
    std::uint64_t seed = 42;
    bool det = false, compare = false, serial = false;
};
json estimate_json(const Estimate& e) {
    return {{"value", complex_json(e.value)}, {"stderr", {e.stderr_re, e.stderr_im}}};
}
json run_mc(const MCArgs& a) {
    PartitionedWord pw;
    TimeVector t;
    if (!a.skein.empty()) {
        if (!a.word.empty() || !a.partial.empty()) throw ValidationError("give either --skein or a word, not both");
        auto in = read_skein(a.skein, a.permissive ? IngestMode::permissive : IngestMode::strict);
        auto p = wilson_problem(in.skein.g, in.skein.loops, in.partition);
        pw = p.pw;
        t = p.t;
    } else {
        pw = target_from(a.word, a.partial);
        t = times_for(parse_times(a.t), letters_of(pw));
    }
    BmConfig cfg;
    cfg.N = a.N;
    cfg.samples = a.samples;
    cfg.seed = a.seed;
    cfg.step = a.step > 0 ? a.step : default_step(t);
    validate(cfg);
    Exec ex = a.serial ? Exec::Serial : Exec::Parallel;
    json doc;
    doc["metadata"] = metadata("mc", {{"skein", a.skein}, {"word", a.word}, {"partial", a.partial}, {"t", t},
                                      {"N", a.N}, {"samples", a.samples}, {"step", cfg.step}, {"seed", a.seed},
                                      {"det", a.det}, {"serial", a.serial}},
                               {{"rng", "mt19937_64 per sample, seeded from splitmix64(seed, index)"}});
    doc["target"] = format_partial(pw);
    auto r = estimate_observables(cfg, t, {pw}, ex)[0];
    doc["order"] = r.order;
    doc["moment"] = estimate_json(r.moment);
    doc["cumulant"] = estimate_json(r.cumulant);
    doc["coarse_cumulant"] = estimate_json(r.coarse_cumulant);
    doc["richardson_bias"] = r.richardson_bias;
    doc["max_unitarity_defect"] = r.max_unitarity_defect;
    if (a.compare) {
        double exact = evaluate_phi(pw, t, a.N);
        doc["engine"] = exact;
        doc["z_score"] = r.cumulant.stderr_re > 0 ? std::abs(r.cumulant.value.real() - exact) / r.cumulant.stderr_re : 0.0;
    }
    if (a.det) {
        json rows = json::array();
        for (std::size_t k = 0; k < pw.size(); ++k) {
            auto d = u1_det_check(cfg, t, pw.words[k], ex);
            rows.push_back({{"word", format_word(pw.words[k])},
                            {"det_re", d.det.value.real()},
                            {"det_im", d.det.value.imag()},
                            {"stderr", d.det.stderr_re},
                            {"exact", d.exact},
                            {"coarse_bias", d.coarse_bias},
                            {"pass", d.pass}});
        }
        doc["rows"] = rows;
    }
    return doc;
}

// ---------------------------------------------------------------- oracle-compare
struct OracleArgs {
    long long samples = 20000;
    std::uint64_t seed = 42;
};
json run_oracle_compare(const OracleArgs& a, bool& all_pass) {
    json rows = json::array();
    all_pass = true;
    auto add = [&](const std::string& check, double x, double y, double tol, bool asserted, bool pass) {
        rows.push_back({{"check", check}, {"a", x}, {"b", y}, {"abs_diff", std::abs(x - y)}, {"tol", tol},
                        {"asserted", asserted}, {"pass", pass}});
        if (asserted && !pass) all_pass = false;
    };
    // Closed-form moments against the moment recursion.
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        auto tab = moment_recursion(12, t);
        double worst = 0.0;
        for (int n = 1; n <= 12; ++n) worst = std::max(worst, std::abs(biane_moment(n, t) - tab.values[n - 1]));
        add("moments closed form vs recursion, n<=12, t=" + format_N(t), worst, 0.0, 1e-9, true, worst <= 1e-9);
    }
    // Engine at N = 1 against the U(1) white-noise oracle.
    for (const char* s : {"{ x1 x1 | {1} }", "{ x1 ; x1 | {1}{2} }", "{ x1 x2' ; x2 | {1}{2} }", "{ x1 x1 x2' | {1} }",
                          "{ x1 ; x1' ; x2 | {1}{2}{3} }", "{ x1 ; x2 | {1,2} }"}) {
        auto pw = parse_partial(s);
        TimeVector t{0.7, 1.3};
        double e = evaluate_phi(pw, t, 1.0), u = u1_cumulant(pw, t);
        add(std::string("engine vs U(1) ") + s, e, u, 1e-8, true, std::abs(e - u) <= 1e-8);
    }
    // Engine against sampling at N = 2.
    {
        BmConfig cfg;
        cfg.N = 2;
        cfg.samples = a.samples;
        cfg.seed = a.seed;
        cfg.step = 2e-3;
        std::vector<PartitionedWord> T{parse_partial("{ x1 x1 | {1} }"), parse_partial("{ x1 ; x1' | {1}{2} }")};
        auto r = estimate_observables(cfg, {1.0}, T);
        for (std::size_t k = 0; k < T.size(); ++k) {
            double e = evaluate_phi(T[k], {1.0}, 2.0);
            double tol = 3 * r[k].cumulant.stderr_re;
            add("engine vs MC N=2 " + format_partial(T[k]), e, r[k].cumulant.value.real(), tol, true,
                std::abs(e - r[k].cumulant.value.real()) <= tol);
        }
    }
    // Area recursion against direct evaluation.
    for (const auto& [name, loops] : std::vector<std::pair<std::string, std::vector<LatticeLoop>>>{
             {"figure-eight", {{{0, 0}, "ENWSSWNE"}}},
             {"two squares", {{{0, 0}, "EENNWWSS"}, {{1, 1}, "EENNWWSS"}}},
             {"limacon", {{{0, 0}, "EEENNNWWSSENWWSS"}}}}) {
        Skein sk = make_skein(ingest_lattice(loops));
        double s = mm_solve(sk).value, d = wilson_evaluate(*sk.g, sk.loops, INFINITY);
        add("mm_solve vs wilson_evaluate " + name, s, d, 1e-4, true, std::abs(s - d) <= 1e-4);
    }
    // Candidate closed forms, reported only.
    {
        double t = 1.0;
        double e = evaluate_phi(parse_partial("{ x1 ; x1 | {1}{2} }"), {t}, 1.0);
        add("candidate t^{m-1}e^{-t/2} vs engine, m=2, N=1", t * std::exp(-t / 2), e, 0.0, false, false);
        Potential V;
        V.add({1}, 1.0);
        for (double z : {0.05, 0.1}) {
            auto fe = free_energy_series(V, {t}, 6, INFINITY);
            double sum = 0.0;
            for (int m = 1; m <= 6; ++m) sum += fe.c[m].real() * std::pow(z, m);
            add("candidate free energy vs series (N=inf, order 6), z=" + format_N(z), candidate_free_energy(z, t), sum, 0.0,
                false, std::abs(candidate_free_energy(z, t) - sum) <= 1e-6);
        }
    }
    json doc;
    doc["metadata"] = metadata("oracle-compare", {{"samples", a.samples}, {"seed", a.seed}});
    doc["all_pass"] = all_pass;
    doc["rows"] = rows;
    return doc;
}

void print_error(const std::string& kind, const std::string& msg, long long partial = -1) {
    json e = {{"error", {{"kind", kind}, {"message", msg}}}};
    if (partial >= 0) e["error"]["partial_count"] = partial;
    std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mfield: Wilson loops, free unitary Brownian motion and the planar master field"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_help_flag("--help", "Print this help message and exit");
    app.option_defaults()->always_capture_default();
    Global G;
    app.add_option("--threads", G.threads, "Worker threads (0 = available parallelism)")->check(CLI::NonNegativeNumber);
    app.add_option("--format", G.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", G.out, "Write output to this file instead of stdout");
    app.add_option("--closure-cap", G.closure_cap, "Maximum closure size before a resource error")->check(CLI::PositiveNumber);

    MomentsArgs ma;
    auto* mom = app.add_subcommand("moments", "Moments of the free unitary Brownian motion");
    mom->add_option("--t", ma.t, "Time")->required();
    mom->add_option("--n", ma.n, "Highest moment")->required();

    WordArgs wa;
    auto* we = app.add_subcommand("word-eval", "Normalized cumulant of a word or partitioned word");
    we->add_option("--word", wa.word, "Word, e.g. \"x1 x2'\"");
    we->add_option("--partial", wa.partial, "Partitioned word, e.g. \"{ x1 ; x1' | {1}{2} }\"");
    we->add_option("--t", wa.t, "Comma-separated times per letter (one value broadcasts)");
    we->add_option("--N", wa.N, "Matrix size or inf");
    we->add_option("--gmax", wa.gmax, "Also return the 1/N^2 series to this order");

    FreeArgs fa;
    auto* fr = app.add_subcommand("free-energy", "Free-energy series of a word potential");
    fr->add_option("--potential", fa.potential, "Potential JSON file")->required();
    fr->add_option("--expect", fa.expect, "Observable potential W for the perturbed expectation");
    fr->add_option("--t", fa.t, "Comma-separated times per letter");
    fr->add_option("--order", fa.order, "Series order M");
    fr->add_option("--N", fa.N, "Matrix size or inf");
    fr->add_option("--gmax", fa.gmax, "Per-coefficient 1/N^2 series to this order");

    LoopArgs la;
    auto* le = app.add_subcommand("loop-eval", "Wilson loop cumulant of a skein");
    le->add_option("--skein", la.s.skein, "Skein JSON file")->required();
    le->add_flag("--permissive", la.s.permissive, "Accept non-regular lattice input");
    le->add_option("--N", la.N, "Matrix size or inf");
    le->add_option("--gmax", la.gmax, "Also return the 1/N^2 series to this order");
    le->add_option("--root", la.root, "Root vertex of the lasso basis (default: base of loop 1)");
    le->add_flag("--reversed", la.reversed, "Reverse the dual BFS tie-break");

    MMArgs mma;
    auto* mc_ = app.add_subcommand("mm-check", "Finite-difference check of the loop equations");
    mc_->add_option("--skein", mma.s.skein, "Skein JSON file")->required();
    mc_->add_option("--crossing", mma.crossing, "Vertex id of one crossing (default: all, plus boundary faces)");
    mc_->set_help_flag("--help", "Print this help message and exit");
    mc_->add_option("--h", mma.h, "Finite-difference step");
    mc_->add_option("--N", mma.N, "Matrix size or inf");

    SolveArgs sa;
    auto* ms = app.add_subcommand("mm-solve", "Master field through the area recursion");
    ms->add_option("--skein", sa.s.skein, "Skein JSON file")->required();
    ms->add_option("--steps", sa.opt.steps, "Initial RK4 steps");
    ms->add_option("--tol", sa.opt.tol, "Step-doubling tolerance");
    ms->add_option("--max-steps", sa.opt.max_steps, "Step cap");
    ms->add_option("--max-nodes", sa.opt.max_nodes, "Recursion node budget");
    ms->add_flag("!--no-compare", sa.compare, "Skip the direct evaluation");

    MCArgs ca;
    auto* mcs = app.add_subcommand("mc", "Monte Carlo estimate with jackknife errors");
    mcs->add_option("--skein", ca.skein, "Skein JSON file");
    mcs->add_flag("--permissive", ca.permissive, "Accept non-regular lattice input");
    mcs->add_option("--word", ca.word, "Word instead of a skein");
    mcs->add_option("--partial", ca.partial, "Partitioned word instead of a skein");
    mcs->add_option("--t", ca.t, "Times per letter for --word/--partial");
    mcs->add_option("--N", ca.N, "Matrix size")->check(CLI::PositiveNumber);
    mcs->add_option("--samples", ca.samples, "Number of samples");
    mcs->add_option("--step", ca.step, "Time step (default 1e-3 min(1, 1/t_max))");
    mcs->add_option("--seed", ca.seed, "Seed");
    mcs->add_flag("--det", ca.det, "Also run the determinant check per word");
    mcs->add_flag("--compare", ca.compare, "Also evaluate the engine at the same N");
    mcs->add_flag("--serial", ca.serial, "Use the serial reference sampler");

    OracleArgs oa;
    auto* oc = app.add_subcommand("oracle-compare", "Cross-module consistency table");
    oc->add_option("--samples", oa.samples, "MC samples for the sampling rows");
    oc->add_option("--seed", oa.seed, "Seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("validation", e.what());
        return 2;
    }

    try {
        set_num_threads(G.threads);
        set_closure_cap(G.closure_cap);
        json doc;
        int code = 0;
        if (*mom) doc = run_moments(ma);
        else if (*we) doc = run_word_eval(wa);
        else if (*fr) doc = run_free_energy(fa);
        else if (*le) doc = run_loop_eval(la);
        else if (*mc_) doc = run_mm_check(mma);
        else if (*ms) doc = run_mm_solve(sa);
        else if (*mcs) doc = run_mc(ca);
        else if (*oc) {
            bool ok = true;
            doc = run_oracle_compare(oa, ok);
            if (!ok) code = 4;
        }
        doc["metadata"]["config"]["format"] = G.format;
        std::ostringstream buf;
        emit(doc, G.format == "csv" ? Format::csv : Format::json, buf);
        if (G.out.empty()) {
            std::cout << buf.str();
        } else {
            std::ofstream f(G.out);
            if (!f) throw ValidationError("cannot write " + G.out);
            f << buf.str();
        }
        if (code == 4) print_error("numeric", "oracle comparison failed");
        return code;
    } catch (const ValidationError& e) {
        print_error("validation", e.what());
        return 2;
    } catch (const ResourceError& e) {
        print_error("resource", e.what(), e.partial_count);
        return 3;
    } catch (const NumericError& e) {
        print_error("numeric", e.what());
        return 4;
    } catch (const std::exception& e) {
        print_error("numeric", e.what());
        return 4;
    }
}
