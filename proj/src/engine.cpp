#include "mf/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "mf/errors.hpp"
#include "mf/freebm.hpp"

namespace mf {

double EpsilonSeries::value(double N) const {
    double eps = std::isinf(N) ? 0.0 : 1.0 / (N * N);
    double v = 0.0, p = 1.0;
    for (double x : c) {
        v += x * p;
        p *= eps;
    }
    return v;
}

bool reduce_empty(PartitionedWord& pw) {
    int nb = pw.num_blocks();
    std::vector<char> has_letters(nb, 0);
    for (std::size_t k = 0; k < pw.words.size(); ++k)
        if (!pw.words[k].empty()) has_letters[pw.block[k]] = 1;
    PartitionedWord out;
    std::vector<char> kept_empty(nb, 0);
    for (std::size_t k = 0; k < pw.words.size(); ++k) {
        int b = pw.block[k];
        if (pw.words[k].empty()) {
            if (has_letters[b] || kept_empty[b]) continue;
            kept_empty[b] = 1;
        }
        out.words.push_back(std::move(pw.words[k]));
        out.block.push_back(b);
    }
    normalize_blocks(out);
    pw = std::move(out);
    if (nb >= 2)
        for (int b = 0; b < nb; ++b)
            if (!has_letters[b]) return false;
    return true;
}

StateKey engine_canonical(const PartitionedWord& pw) {
    StateKey k;
    k.pw = pw;
    if (!reduce_empty(k.pw)) {
        k.zero = true;
        return k;
    }
    k.pw = canonicalize(k.pw);
    return k;
}

std::u16string state_key(const PartitionedWord& c) {
    std::u16string s;
    s.reserve(c.total_length() + 2 * c.size());
    for (std::size_t k = 0; k < c.words.size(); ++k) {
        if (k > 0 && c.block[k] != c.block[k - 1]) s.push_back(u'\0');
        for (Letter a : c.words[k]) s.push_back(static_cast<char16_t>(2 * generator(a) + (a < 0 ? 1 : 0)));
        s.push_back(u'\1');
    }
    return s;
}

int ClosureBasis::find(const PartitionedWord& canonical) const {
    auto it = index.find(state_key(canonical));
    return it == index.end() ? -1 : it->second;
}

namespace {

struct Move {
    int col;
    int16_t f;
    int8_t coef;
    int8_t order2;
};

// Transitions are kept alongside the basis so assembly does not redo the moves.
struct ClosureData {
    ClosureBasis basis;
    std::vector<int> row_ptr;
    std::vector<Move> moves;
};

ClosureData closure_with_moves(const PartitionedWord& seed, const ClosureOptions& opt) {
    ClosureData cd;
    ClosureBasis& B = cd.basis;
    B.include_order2 = opt.include_order2;
    StateKey sk = engine_canonical(seed);
    if (sk.zero) throw ValidationError("seed is identically zero (all-empty block among several)");
    int q = 0;
    for (const auto& w : sk.pw.words) q = std::max(q, max_generator(w));
    B.q = q;
    B.nbar.assign(q, 0);
    for (const auto& w : sk.pw.words)
        for (Letter a : w) B.nbar[generator(a) - 1]++;

    auto insert = [&](PartitionedWord&& c) -> int {
        auto key = state_key(c);
        auto it = B.index.find(key);
        if (it != B.index.end()) return it->second;
        if (B.states.size() >= opt.size_cap)
            throw ResourceError("closure size cap exceeded", static_cast<long long>(B.states.size()));
        int id = static_cast<int>(B.states.size());
        B.index.emplace(std::move(key), id);
        B.states.push_back(std::move(c));
        return id;
    };
    insert(std::move(sk.pw));
    cd.row_ptr.push_back(0);
    for (std::size_t r = 0; r < B.states.size(); ++r) {
        for (int f = 1; f <= q; ++f) {
            if (B.nbar[f - 1] < 2) continue;
            PairLists pl = classify_pairs(B.states[r], f);
            auto visit = [&](const std::vector<Pair>& pairs, int variant, bool order2) {
                for (const auto& [i, j] : pairs) {
                    StateKey t = engine_canonical(apply_cut_join(B.states[r], i, j, variant));
                    if (t.zero) continue;
                    int c = insert(std::move(t.pw));
                    cd.moves.push_back(Move{c, static_cast<int16_t>(f), static_cast<int8_t>(variant > 0 ? -1 : 1),
                                            static_cast<int8_t>(order2 ? 1 : 0)});
                }
            };
            visit(pl.plus0, +1, false);
            visit(pl.minus0, -1, false);
            if (opt.include_order2) {
                visit(pl.plus2, +1, true);
                visit(pl.minus2, -1, true);
            }
        }
        cd.row_ptr.push_back(static_cast<int>(cd.moves.size()));
    }
    return cd;
}

SparseGenerator assemble_from(const ClosureData& cd) {
    const ClosureBasis& B = cd.basis;
    int n = static_cast<int>(B.size());
    SparseGenerator G;
    G.q = B.q;
    G.nbar = B.nbar;
    std::vector<std::vector<Triplet>> lt(B.q), dt(B.q);
    for (int r = 0; r < n; ++r) {
        for (int k = cd.row_ptr[r]; k < cd.row_ptr[r + 1]; ++k) {
            const Move& mv = cd.moves[k];
            (mv.order2 ? dt : lt)[mv.f - 1].push_back(Triplet{r, mv.col, double(mv.coef)});
        }
    }
    for (int f = 0; f < B.q; ++f) {
        G.L.push_back(add_diagonal(from_triplets(n, std::move(lt[f])), -0.5 * B.nbar[f]));
        G.D.push_back(from_triplets(n, std::move(dt[f])));
    }
    return G;
}

// Binary persistence of closures for MF_CACHE_DIR.
std::string cache_file(const std::u16string& key, bool order2) {
    const char* dir = std::getenv("MF_CACHE_DIR");
    if (!dir || !*dir) return {};
    std::size_t h = std::hash<std::u16string>{}(key);
    std::ostringstream os;
    os << dir << "/closure_" << std::hex << h << (order2 ? "_full" : "_l0") << ".bin";
    return os.str();
}

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
bool get(std::istream& is, T& v) {
    return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

void save_closure(const std::string& path, const std::u16string& key, const ClosureData& cd) {
    std::error_code ec;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path(), ec);
    std::ofstream os(path + ".tmp", std::ios::binary);
    if (!os) return;
    put<uint32_t>(os, 0x4d46434cu);
    put<uint64_t>(os, key.size());
    os.write(reinterpret_cast<const char*>(key.data()), key.size() * sizeof(char16_t));
    const auto& B = cd.basis;
    put<int32_t>(os, B.q);
    put<uint64_t>(os, B.states.size());
    for (const auto& s : B.states) {
        put<uint32_t>(os, s.words.size());
        for (std::size_t k = 0; k < s.words.size(); ++k) {
            put<int32_t>(os, s.block[k]);
            put<uint32_t>(os, s.words[k].size());
            for (Letter a : s.words[k]) put<int32_t>(os, a);
        }
    }
    put<uint64_t>(os, cd.moves.size());
    for (int v : cd.row_ptr) put<int32_t>(os, v);
    for (const auto& m : cd.moves) put<Move>(os, m);
    os.close();
    std::filesystem::rename(path + ".tmp", path, ec);
}

bool load_closure(const std::string& path, const std::u16string& key, bool order2, ClosureData& cd) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return false;
    uint32_t magic;
    uint64_t klen;
    if (!get(is, magic) || magic != 0x4d46434cu || !get(is, klen) || klen != key.size()) return false;
    std::u16string k(klen, u'\0');
    if (!is.read(reinterpret_cast<char*>(k.data()), klen * sizeof(char16_t)) || k != key) return false;
    ClosureBasis& B = cd.basis;
    B.include_order2 = order2;
    int32_t q;
    uint64_t ns;
    if (!get(is, q) || !get(is, ns)) return false;
    B.q = q;
    B.states.resize(ns);
    for (uint64_t r = 0; r < ns; ++r) {
        uint32_t m;
        if (!get(is, m)) return false;
        auto& s = B.states[r];
        s.words.resize(m);
        s.block.resize(m);
        for (uint32_t j = 0; j < m; ++j) {
            int32_t b;
            uint32_t len;
            if (!get(is, b) || !get(is, len)) return false;
            s.block[j] = b;
            s.words[j].resize(len);
            for (uint32_t l = 0; l < len; ++l) {
                int32_t a;
                if (!get(is, a)) return false;
                s.words[j][l] = a;
            }
        }
        B.index.emplace(state_key(s), static_cast<int>(r));
    }
    uint64_t nm;
    if (!get(is, nm)) return false;
    cd.row_ptr.resize(ns + 1);
    for (auto& v : cd.row_ptr) {
        int32_t x;
        if (!get(is, x)) return false;
        v = x;
    }
    cd.moves.resize(nm);
    for (auto& m : cd.moves)
        if (!get(is, m)) return false;
    B.nbar.assign(q, 0);
    for (const auto& w : B.states.front().words)
        for (Letter a : w) B.nbar[generator(a) - 1]++;
    return true;
}

}  // namespace

ClosureBasis build_closure(const PartitionedWord& seed, const ClosureOptions& opt) {
    return closure_with_moves(seed, opt).basis;
}

SparseGenerator assemble_generators(const ClosureBasis& basis) {
    // Rebuild the transitions from the basis itself (the closure is already closed,
    // so every target is found).
    ClosureData cd;
    cd.basis = basis;
    cd.row_ptr.push_back(0);
    for (std::size_t r = 0; r < basis.size(); ++r) {
        for (int f = 1; f <= basis.q; ++f) {
            if (basis.nbar[f - 1] < 2) continue;
            PairLists pl = classify_pairs(basis.states[r], f);
            auto visit = [&](const std::vector<Pair>& pairs, int variant, bool order2) {
                for (const auto& [i, j] : pairs) {
                    StateKey t = engine_canonical(apply_cut_join(basis.states[r], i, j, variant));
                    if (t.zero) continue;
                    int c = basis.find(t.pw);
                    if (c < 0) throw std::logic_error("closure is not closed under cut/join");
                    cd.moves.push_back(Move{c, static_cast<int16_t>(f), static_cast<int8_t>(variant > 0 ? -1 : 1),
                                            static_cast<int8_t>(order2 ? 1 : 0)});
                }
            };
            visit(pl.plus0, +1, false);
            visit(pl.minus0, -1, false);
            if (basis.include_order2) {
                visit(pl.plus2, +1, true);
                visit(pl.minus2, -1, true);
            }
        }
        cd.row_ptr.push_back(static_cast<int>(cd.moves.size()));
    }
    return assemble_from(cd);
}

std::vector<double> initial_condition(const ClosureBasis& basis) {
    std::vector<double> v(basis.size(), 0.0);
    for (std::size_t r = 0; r < basis.size(); ++r)
        if (basis.states[r].num_blocks() == 1) v[r] = 1.0;
    return v;
}

namespace {

int step_count(const SparseGenerator& G, const TimeVector& t) {
    double s = 0.0;
    for (int f = 0; f < G.q; ++f) s += t[f] * double(G.nbar[f]) * double(G.nbar[f]);
    if (!std::isfinite(s)) throw NumericError("non-finite time vector");
    return std::max(1, static_cast<int>(std::ceil(s)));
}

void check_times(const SparseGenerator& G, const TimeVector& t) {
    if (static_cast<int>(t.size()) < G.q) throw ValidationError("time vector shorter than the number of generators");
    for (double x : t)
        if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("times must be finite and >= 0");
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

SparseMatrix combine(const std::vector<SparseMatrix>& mats, const TimeVector& t, double scale, int n) {
    SparseMatrix acc;
    acc.n = n;
    acc.row_ptr.assign(n + 1, 0);
    for (std::size_t f = 0; f < mats.size(); ++f)
        if (t[f] != 0.0 && mats[f].n == n) acc = axpby(1.0, acc, scale * t[f], mats[f]);
    return acc;
}

}  // namespace

std::vector<double> evolve_numeric(const SparseGenerator& G, const TimeVector& t, double N,
                                   const std::vector<double>& phi0, const EvolveOptions& opt) {
    check_times(G, t);
    if (!(N > 0)) throw ValidationError("N must be positive");
    int n = static_cast<int>(phi0.size());
    double eps = std::isinf(N) ? 0.0 : 1.0 / (N * N);
    SparseMatrix M = combine(G.L, t, 1.0, n);
    if (eps != 0.0) M = axpby(1.0, M, eps, combine(G.D, t, 1.0, n));
    int s = step_count(G, t);
    double h = 1.0 / s;
    std::vector<double> v = phi0, term(n), next(n);
    // Per-step Taylor terms stop once they drop below this; s steps keep the total
    // truncation error well under opt.tol.
    double stop = std::min(opt.tol, 1e-12) * 1e-4 / s;
    for (int step = 0; step < s; ++step) {
        term = v;
        for (int k = 1; k <= 200; ++k) {
            spmv(opt.exec, M, term.data(), next.data());
            double c = h / k;
            for (int r = 0; r < n; ++r) {
                term[r] = c * next[r];
                v[r] += term[r];
            }
            double tm = max_abs(term);
            if (!std::isfinite(tm)) throw NumericError("non-finite value during evolution");
            if (tm <= stop * std::max(1.0, max_abs(v))) break;
            if (k == 200) throw NumericError("Taylor series did not converge");
        }
    }
    return v;
}

std::vector<std::vector<double>> evolve_series(const SparseGenerator& G, const TimeVector& t, int g_max,
                                               const std::vector<double>& phi0, const EvolveOptions& opt) {
    check_times(G, t);
    if (g_max < 0) throw ValidationError("g_max must be >= 0");
    int n = static_cast<int>(phi0.size());
    SparseMatrix A = combine(G.L, t, 1.0, n);
    SparseMatrix B = combine(G.D, t, 1.0, n);
    if (g_max > 0 && G.D.empty()) throw std::logic_error("series with g_max > 0 needs order-2 moves");
    int s = step_count(G, t);
    double h = 1.0 / s;
    int deg = g_max + 1;
    std::vector<std::vector<double>> v(deg, std::vector<double>(n, 0.0)), term(deg), next(deg, std::vector<double>(n));
    v[0] = phi0;
    std::vector<double> tmp(n);
    double stop = std::min(opt.tol, 1e-12) * 1e-4 / s;
    for (int step = 0; step < s; ++step) {
        term = v;
        for (int k = 1; k <= 200; ++k) {
            for (int g = 0; g < deg; ++g) {
                spmv(opt.exec, A, term[g].data(), next[g].data());
                if (g > 0) {
                    spmv(opt.exec, B, term[g - 1].data(), tmp.data());
                    for (int r = 0; r < n; ++r) next[g][r] += tmp[r];
                }
            }
            double c = h / k, tm = 0.0, vm = 1.0;
            for (int g = 0; g < deg; ++g) {
                for (int r = 0; r < n; ++r) {
                    term[g][r] = c * next[g][r];
                    v[g][r] += term[g][r];
                }
                tm = std::max(tm, max_abs(term[g]));
                vm = std::max(vm, max_abs(v[g]));
            }
            if (!std::isfinite(tm)) throw NumericError("non-finite value during evolution");
            if (tm <= stop * vm) break;
            if (k == 200) throw NumericError("Taylor series did not converge");
        }
    }
    return v;
}

namespace {
std::atomic<std::size_t> g_closure_cap{5000000};
std::mutex g_cache_mtx;
std::map<std::pair<std::u16string, bool>, std::shared_ptr<const Engine>> g_cache;
}  // namespace

std::shared_ptr<const Engine> engine_for(const PartitionedWord& seed, bool include_order2, std::size_t size_cap) {
    StateKey sk = engine_canonical(seed);
    if (sk.zero) throw ValidationError("seed is identically zero");
    auto key = state_key(sk.pw);
    {
        std::lock_guard<std::mutex> lock(g_cache_mtx);
        auto it = g_cache.find({key, include_order2});
        if (it != g_cache.end()) return it->second;
    }
    ClosureData cd;
    std::string path = cache_file(key, include_order2);
    bool loaded = !path.empty() && load_closure(path, key, include_order2, cd);
    if (!loaded) {
        ClosureOptions opt;
        opt.include_order2 = include_order2;
        opt.size_cap = size_cap;
        cd = closure_with_moves(sk.pw, opt);
        if (!path.empty()) save_closure(path, key, cd);
    }
    auto e = std::make_shared<Engine>();
    e->gen = assemble_from(cd);
    e->basis = std::move(cd.basis);
    e->phi0 = initial_condition(e->basis);
    std::lock_guard<std::mutex> lock(g_cache_mtx);
    return g_cache.emplace(std::make_pair(key, include_order2), std::move(e)).first->second;
}

void set_closure_cap(std::size_t cap) { g_closure_cap = cap; }
std::size_t closure_cap() { return g_closure_cap; }

void clear_engine_cache() {
    std::lock_guard<std::mutex> lock(g_cache_mtx);
    g_cache.clear();
}

double evaluate_phi(const PartitionedWord& target, const TimeVector& t, double N) {
    if (!(N > 0)) throw ValidationError("N must be positive or inf");
    StateKey sk = engine_canonical(target);
    if (sk.zero) return 0.0;
    auto e = engine_for(sk.pw, !std::isinf(N), closure_cap());
    auto v = evolve_numeric(e->gen, t, N, e->phi0);
    return v[0];
}

EpsilonSeries evaluate_phi_series(const PartitionedWord& target, const TimeVector& t, int g_max) {
    EpsilonSeries out;
    out.c.assign(g_max + 1, 0.0);
    StateKey sk = engine_canonical(target);
    if (sk.zero) return out;
    auto e = engine_for(sk.pw, g_max > 0, closure_cap());
    auto v = evolve_series(e->gen, t, g_max, e->phi0);
    for (int g = 0; g <= g_max; ++g) out.c[g] = v[g][0];
    return out;
}

TreeSums tree_sums(const std::vector<Word>& words, const TimeVector& t) {
    int m = static_cast<int>(words.size());
    if (m < 1) throw ValidationError("tree sums need at least one word");
    if (m > 9) throw ResourceError("too many words for Cayley-tree enumeration");
    TreeSums ts;
    if (m == 1) {
        ts.unsigned_sum = ts.signed_sum = 1.0;
        return ts;
    }
    int q = static_cast<int>(t.size());
    std::vector<std::vector<double>> U(m, std::vector<double>(m)), S(m, std::vector<double>(m));
    for (int i = 0; i < m; ++i) {
        auto bi = unsigned_counts(words[i], q), si = signed_counts(words[i], q);
        for (int j = 0; j < m; ++j) {
            U[i][j] = inner(bi, unsigned_counts(words[j], q), t);
            S[i][j] = inner(si, signed_counts(words[j], q), t);
        }
    }
    if (m == 2) {
        ts.unsigned_sum = U[0][1];
        ts.signed_sum = S[0][1];
        return ts;
    }
    // Pruefer decoding of every sequence in {0..m-1}^{m-2}.
    std::vector<int> seq(m - 2, 0);
    while (true) {
        std::vector<int> degree(m, 1);
        for (int x : seq) degree[x]++;
        double pu = 1.0, ps = 1.0;
        std::vector<int> deg = degree;
        for (int x : seq) {
            int leaf = 0;
            while (deg[leaf] != 1) ++leaf;
            pu *= U[leaf][x];
            ps *= S[leaf][x];
            deg[leaf] = 0;
            deg[x]--;
        }
        int a = -1, b = -1;
        for (int v = 0; v < m; ++v)
            if (deg[v] == 1) (a < 0 ? a : b) = v;
        pu *= U[a][b];
        ps *= S[a][b];
        ts.unsigned_sum += pu;
        ts.signed_sum += ps;
        int k = m - 3;
        while (k >= 0 && seq[k] == m - 1) seq[k--] = 0;
        if (k < 0) break;
        seq[k]++;
    }
    return ts;
}

BoundsReport check_bounds(const std::vector<Word>& words, const TimeVector& t, double N) {
    BoundsReport r;
    int m = static_cast<int>(words.size());
    r.m = m;
    PartitionedWord target = singletons(words);
    r.phi = evaluate_phi(target, t, N);
    TreeSums ts = tree_sums(words, t);
    r.tree_bound = ts.unsigned_sum;
    r.tree_margin = r.tree_bound - std::abs(r.phi);

    double sumA = 0.0;
    for (const auto& w : words) sumA += word_stats(w, t).amperean;
    double lead = (m % 2 == 1 ? 1.0 : -1.0) * ts.signed_sum;
    r.remainder = r.phi - lead;
    r.remainder_bound = std::pow(double(m), m) * std::pow(sumA, m) * std::exp(m * sumA);
    r.remainder_margin = r.remainder_bound - std::abs(r.remainder);

    EpsilonSeries s = evaluate_phi_series(target, t, 1);
    r.psi1 = s.c[1];
    double lam = 1.0, maxnorm = 0.0;
    for (const auto& w : words) {
        lam *= lambda_weight(w, t);
        maxnorm = std::max(maxnorm, word_stats(w, t).amperean);
    }
    r.psi1_bound = std::pow(2.0, m - 1) * m * m * lam * maxnorm * ts.unsigned_sum;
    r.psi1_margin = r.psi1_bound - std::abs(r.psi1);

    // Relative slack for rounding in the engine value.
    const double slack = 1e-10;
    std::ostringstream wit;
    if (r.tree_margin < -slack) wit << "tree bound violated; ";
    if (r.remainder_margin < -slack) wit << "remainder bound violated; ";
    if (r.psi1_margin < -slack) wit << "psi_1 bound violated; ";
    r.witness = wit.str();
    r.ok = r.witness.empty();
    if (!r.ok) {
        std::string ws;
        for (const auto& w : words) ws += "[" + format_word(w) + "]";
        r.witness += "words " + ws;
    }
    return r;
}

}  // namespace mf
