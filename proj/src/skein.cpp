#include "mf/skein.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "mf/engine.hpp"
#include "mf/errors.hpp"
#include "mf/wilson.hpp"

namespace mf {

namespace {

using Loops = std::vector<LoopInGraph>;

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
    void unite(int a, int b) {
        a = find(a), b = find(b);
        if (a != b) p[std::max(a, b)] = std::min(a, b);
    }
};

struct Passage {
    int loop, idx;  // darts[idx] leaves the vertex, darts[idx - 1] arrives
};

int out_dart(const Loops& L, Passage p) { return L[p.loop].darts[p.idx]; }
int in_dart(const Loops& L, Passage p) {
    const auto& d = L[p.loop].darts;
    return d[(p.idx + d.size() - 1) % d.size()];
}

std::map<int, std::vector<Passage>> passages(const EmbeddedGraph& g, const Loops& L) {
    std::map<int, std::vector<Passage>> P;
    for (std::size_t k = 0; k < L.size(); ++k)
        for (std::size_t i = 0; i < L[k].darts.size(); ++i)
            P[g.tail[L[k].darts[i]]].push_back({static_cast<int>(k), static_cast<int>(i)});
    return P;
}

std::optional<Crossing> make_frame(const EmbeddedGraph& g, const Loops& L, int v, Passage pa, Passage pb) {
    const auto& rot = g.rotation[v];
    if (rot.size() != 4) return std::nullopt;
    auto pos = [&](int d) {
        auto it = std::find(rot.begin(), rot.end(), d);
        return it == rot.end() ? -1 : static_cast<int>(it - rot.begin());
    };
    int ao = pos(out_dart(L, pa)), rai = pos(EmbeddedGraph::rev(in_dart(L, pa)));
    int bo = pos(out_dart(L, pb)), rbi = pos(EmbeddedGraph::rev(in_dart(L, pb)));
    if (ao < 0 || rai < 0 || bo < 0 || rbi < 0) return std::nullopt;
    if ((rai - ao + 4) % 4 != 2 || (rbi - bo + 4) % 4 != 2) return std::nullopt;
    if ((bo - ao + 4) % 4 == 3) std::swap(pa, pb);
    Crossing x;
    x.vertex = v;
    x.loop_a = pa.loop;
    x.loop_b = pb.loop;
    x.idx_a = pa.idx;
    x.idx_b = pb.idx;
    x.a_out = out_dart(L, pa);
    x.b_out = out_dart(L, pb);
    x.a_in = in_dart(L, pa);
    x.b_in = in_dart(L, pb);
    x.face[0] = g.face_of[x.a_out];
    x.face[1] = g.face_of[x.b_out];
    x.face[2] = g.face_of[EmbeddedGraph::rev(x.a_in)];
    x.face[3] = g.face_of[EmbeddedGraph::rev(x.b_in)];
    x.e1 = x.b_out;
    x.e2 = x.a_out;
    x.self = pa.loop == pb.loop;
    return x;
}

// Faces of the finest graph carrying a loop family, as unions of faces of g.
struct Derived {
    std::vector<int> region;  // per face of g
    int nreg = 0, r_inf = -1;
    std::vector<int> dist;
    std::vector<Crossing> crossings;
    bool connected = true;
    std::vector<std::vector<int>> inf_neighbours;  // per loop: regions across its edges from r_inf
};

Derived derive(const EmbeddedGraph& g, const Loops& L) {
    Derived D;
    std::vector<char> used(g.num_edges(), 0);
    for (const auto& l : L)
        for (int d : l.darts) used[d >> 1] = 1;
    std::vector<int> dvert(g.num_darts(), -1);
    std::vector<std::vector<int>> drot;
    UnionFind loops_uf(static_cast<int>(L.size()));
    for (const auto& [v, ps] : passages(g, L)) {
        if (ps.size() > 2) throw ValidationError("vertex " + std::to_string(v) + " has multiplicity > 2");
        std::optional<Crossing> x;
        if (ps.size() == 2) x = make_frame(g, L, v, ps[0], ps[1]);
        if (x) {
            D.crossings.push_back(*x);
            if (!x->self) loops_uf.unite(x->loop_a, x->loop_b);
            std::vector<int> r(g.rotation[v].begin(), g.rotation[v].end());
            for (int d : r) dvert[d] = static_cast<int>(drot.size());
            drot.push_back(r);
        } else {
            for (auto p : ps) {
                std::vector<int> r{out_dart(L, p), EmbeddedGraph::rev(in_dart(L, p))};
                for (int d : r) dvert[d] = static_cast<int>(drot.size());
                drot.push_back(r);
            }
        }
    }
    UnionFind uf(g.num_faces());
    for (int e = 0; e < g.num_edges(); ++e)
        if (!used[e]) uf.unite(g.face_of[2 * e], g.face_of[2 * e + 1]);
    std::vector<char> seen(g.num_darts(), 0);
    auto next = [&](int x) {
        int r = EmbeddedGraph::rev(x);
        const auto& rot = drot[dvert[r]];
        auto it = std::find(rot.begin(), rot.end(), r);
        return it == rot.begin() ? rot.back() : *(it - 1);
    };
    for (int x0 = 0; x0 < g.num_darts(); ++x0) {
        if (!used[x0 >> 1] || seen[x0]) continue;
        for (int x = x0; !seen[x]; x = next(x)) {
            seen[x] = 1;
            uf.unite(g.face_of[x], g.face_of[x0]);
        }
    }
    std::map<int, int> ids;
    D.region.assign(g.num_faces(), -1);
    for (int f = 0; f < g.num_faces(); ++f) {
        int r = uf.find(f);
        auto it = ids.find(r);
        if (it == ids.end()) it = ids.emplace(r, D.nreg++).first;
        D.region[f] = it->second;
    }
    D.r_inf = D.region[g.f_inf];
    std::vector<std::vector<int>> adj(D.nreg);
    for (int e = 0; e < g.num_edges(); ++e) {
        if (!used[e]) continue;
        int a = D.region[g.face_of[2 * e]], b = D.region[g.face_of[2 * e + 1]];
        if (a != b) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    D.dist.assign(D.nreg, -1);
    D.dist[D.r_inf] = 0;
    std::deque<int> q{D.r_inf};
    while (!q.empty()) {
        int r = q.front();
        q.pop_front();
        for (int h : adj[r])
            if (D.dist[h] < 0) {
                D.dist[h] = D.dist[r] + 1;
                q.push_back(h);
            }
    }
    for (std::size_t k = 0; k < L.size(); ++k)
        if (loops_uf.find(static_cast<int>(k)) != loops_uf.find(0)) D.connected = false;
    D.inf_neighbours.assign(L.size(), {});
    for (std::size_t k = 0; k < L.size(); ++k) {
        std::set<int> s;
        for (int d : L[k].darts) {
            int a = D.region[g.face_of[d]], b = D.region[g.face_of[EmbeddedGraph::rev(d)]];
            if (a == D.r_inf && b != D.r_inf) s.insert(b);
            if (b == D.r_inf && a != D.r_inf) s.insert(a);
        }
        D.inf_neighbours[k].assign(s.begin(), s.end());
    }
    return D;
}

// Distinct regions next to the unbounded one, one per loop, each bounded by its loop.
bool has_matching(const std::vector<std::vector<int>>& cand) {
    std::map<int, int> owner;
    std::function<bool(int, std::set<int>&)> aug = [&](int k, std::set<int>& vis) {
        for (int r : cand[k]) {
            if (vis.count(r)) continue;
            vis.insert(r);
            auto it = owner.find(r);
            if (it == owner.end() || aug(it->second, vis)) {
                owner[r] = k;
                return true;
            }
        }
        return false;
    };
    for (std::size_t k = 0; k < cand.size(); ++k) {
        std::set<int> vis;
        if (!aug(static_cast<int>(k), vis)) return false;
    }
    return true;
}

std::vector<int> canonical_loop(const std::vector<int>& d) {
    std::vector<int> best = d;
    std::vector<int> r = d;
    for (std::size_t i = 1; i < d.size(); ++i) {
        std::rotate(r.begin(), r.begin() + 1, r.end());
        if (r < best) best = r;
    }
    return best;
}

std::string key_of(const Loops& L) {
    std::vector<std::vector<int>> c;
    for (const auto& l : L) c.push_back(canonical_loop(l.darts));
    std::sort(c.begin(), c.end());
    std::ostringstream s;
    for (const auto& l : c) {
        for (int d : l) s << d << ',';
        s << ';';
    }
    return s.str();
}

LoopInGraph make_loop(const EmbeddedGraph& g, std::vector<int> darts) {
    LoopInGraph l;
    l.base = g.tail[darts.at(0)];
    l.darts = std::move(darts);
    return l;
}

// Darts of loop k from position i until (and including) the first dart whose head is stop.
std::vector<int> follow(const EmbeddedGraph& g, const LoopInGraph& l, int i, int stop) {
    std::vector<int> out;
    int n = static_cast<int>(l.darts.size());
    for (int s = 0; s < n; ++s) {
        int d = l.darts[(i + s) % n];
        out.push_back(d);
        if (g.head[d] == stop) return out;
    }
    throw NumericError("loop does not reach the requested vertex");
}

int position_at(const EmbeddedGraph& g, const LoopInGraph& l, int v) {
    for (std::size_t i = 0; i < l.darts.size(); ++i)
        if (g.tail[l.darts[i]] == v) return static_cast<int>(i);
    throw NumericError("loop does not pass through the vertex");
}

std::vector<double> areas_or_default(const EmbeddedGraph& g, const std::vector<double>& a) {
    if (a.empty()) return g.area;
    if (static_cast<int>(a.size()) != g.num_faces()) throw ValidationError("one area per face expected");
    return a;
}

double phi_subset(const EmbeddedGraph& g, const Loops& all, const std::vector<int>& idx, const std::vector<double>& a,
                  double N) {
    Loops sub;
    for (int i : idx) sub.push_back(all[i]);
    return wilson_evaluate_areas(g, sub, a, N);
}

// Right-hand side of the equation at crossing x evaluated through the rewired skein.
double mm_rhs(const Skein& s, const Crossing& x, const std::vector<double>& a, double N) {
    Skein sx = mm_transform(s, x.vertex);
    const auto& g = *s.g;
    if (!x.self) {
        std::vector<int> all(sx.loops.size());
        std::iota(all.begin(), all.end(), 0);
        return phi_subset(g, sx.loops, all, a, N);
    }
    int k = x.loop_a;  // the split loops sit at k and k + 1
    std::vector<int> others;
    for (int i = 0; i < static_cast<int>(sx.loops.size()); ++i)
        if (i != k && i != k + 1) others.push_back(i);
    double total = 0.0;
    int n = static_cast<int>(others.size());
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> A{k}, B{k + 1};
        for (int j = 0; j < n; ++j) (mask >> j & 1 ? A : B).push_back(others[j]);
        total += phi_subset(g, sx.loops, A, a, N) * phi_subset(g, sx.loops, B, a, N);
    }
    if (std::isfinite(N)) {
        std::vector<int> all(sx.loops.size());
        std::iota(all.begin(), all.end(), 0);
        total += phi_subset(g, sx.loops, all, a, N) / (N * N);
    }
    return total;
}

int eigen_rank(const Eigen::MatrixXd& M) {
    if (M.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    qr.setThreshold(1e-10);
    return static_cast<int>(qr.rank());
}

}  // namespace

Skein make_skein(LatticeSkein s) {
    Skein k;
    k.g = std::make_shared<const EmbeddedGraph>(std::move(s.g));
    k.loops = std::move(s.loops);
    return k;
}

std::string skein_key(const Skein& s) { return key_of(s.loops); }

IntersectionReport intersection_report(const Skein& s) {
    const auto& g = *s.g;
    for (const auto& l : s.loops) validate_loop(g, l);
    std::vector<int> uses(g.num_edges(), 0);
    for (const auto& l : s.loops)
        for (int d : l.darts)
            if (++uses[d >> 1] > 1) throw ValidationError("skein is not regular: edge " + std::to_string(d >> 1) + " used twice");
    IntersectionReport r;
    for (const auto& [v, ps] : passages(g, s.loops)) {
        if (ps.size() > 2) throw ValidationError("vertex " + std::to_string(v) + " has multiplicity > 2");
        if (ps.size() < 2) continue;
        auto x = make_frame(g, s.loops, v, ps[0], ps[1]);
        if (!x) throw ValidationError("non-transverse vertex " + std::to_string(v));
        r.crossings.push_back(*x);
    }
    std::map<std::pair<int, int>, int> cls;
    r.cls.assign(r.crossings.size(), -1);
    for (std::size_t i = 0; i < r.crossings.size(); ++i) {
        const auto& x = r.crossings[i];
        if (x.self) {
            r.self_ids.push_back(static_cast<int>(i));
            continue;
        }
        r.pair_ids.push_back(static_cast<int>(i));
        std::pair<int, int> key = std::minmax(x.loop_a, x.loop_b);
        auto it = cls.find(key);
        if (it == cls.end()) {
            it = cls.emplace(key, static_cast<int>(r.representative.size())).first;
            r.representative.push_back(static_cast<int>(i));
            r.class_loops.push_back(key);
        }
        r.cls[i] = it->second;
    }
    UnionFind uf(static_cast<int>(s.loops.size()));
    for (auto [a, b] : r.class_loops) uf.unite(a, b);
    for (std::size_t k = 0; k < s.loops.size(); ++k)
        if (uf.find(static_cast<int>(k)) != uf.find(0)) r.loops_connected = false;
    return r;
}

Skein mm_transform(const Skein& s, int vertex) {
    const auto& g = *s.g;
    auto P = passages(g, s.loops);
    auto it = P.find(vertex);
    if (it == P.end() || it->second.size() != 2) throw ValidationError("vertex " + std::to_string(vertex) + " is not a crossing");
    Passage pa = it->second[0], pb = it->second[1];
    if (auto x = make_frame(g, s.loops, vertex, pa, pb)) {
        pa = {x->loop_a, x->idx_a};
        pb = {x->loop_b, x->idx_b};
    }
    Skein out{s.g, {}};
    if (pa.loop == pb.loop) {
        const auto& d = s.loops[pa.loop].darts;
        int n = static_cast<int>(d.size());
        std::vector<int> l1, l2;
        for (int i = pa.idx; i != pb.idx; i = (i + 1) % n) l1.push_back(d[i]);
        for (int i = pb.idx; i != pa.idx; i = (i + 1) % n) l2.push_back(d[i]);
        for (int k = 0; k < static_cast<int>(s.loops.size()); ++k) {
            if (k == pa.loop) {
                out.loops.push_back(make_loop(g, l1));
                out.loops.push_back(make_loop(g, l2));
            } else {
                out.loops.push_back(s.loops[k]);
            }
        }
    } else {
        auto rot = [&](Passage p) {
            std::vector<int> d = s.loops[p.loop].darts;
            std::rotate(d.begin(), d.begin() + p.idx, d.end());
            return d;
        };
        std::vector<int> merged = rot(pa), tail = rot(pb);
        merged.insert(merged.end(), tail.begin(), tail.end());
        int keep = std::min(pa.loop, pb.loop), drop = std::max(pa.loop, pb.loop);
        for (int k = 0; k < static_cast<int>(s.loops.size()); ++k) {
            if (k == keep) out.loops.push_back(make_loop(g, merged));
            else if (k != drop) out.loops.push_back(s.loops[k]);
        }
    }
    return out;
}

ComplexityReport complexity(const Skein& s) {
    const auto& g = *s.g;
    Derived D = derive(g, s.loops);
    ComplexityReport r;
    r.intersections = static_cast<int>(D.crossings.size());
    r.connected = D.connected;
    int total = 0;
    for (const auto& l : s.loops) {
        Derived Dl = derive(g, {l});
        int best = -1;
        for (int f = 0; f < g.num_faces(); ++f) {
            int R = D.region[f];
            if (R == D.r_inf || Dl.region[f] == Dl.r_inf) continue;
            if (best < 0 || D.dist[R] < best) best = D.dist[R];
        }
        int d = best < 0 ? 0 : best - 1;
        r.d_inf.push_back(d);
        total += d;
    }
    r.complexity = r.intersections + 2 * total;
    r.based_at_infinity = has_matching(D.inf_neighbours);
    return r;
}

KazakovReport mu_and_kazakov(const Skein& s) {
    const auto& g = *s.g;
    auto X = intersection_report(s);
    if (!X.loops_connected) throw ValidationError("intersection graph of the skein is not connected");
    KazakovReport r;
    int nf = g.num_faces();
    int m = static_cast<int>(s.loops.size());
    std::vector<int> row_of(g.num_darts(), -1), loop_of(g.num_darts(), -1);
    std::vector<std::pair<int, int>> rows;  // (dart, previous dart)
    for (int k = 0; k < m; ++k) {
        const auto& d = s.loops[k].darts;
        for (std::size_t i = 0; i < d.size(); ++i) {
            row_of[d[i]] = static_cast<int>(rows.size());
            loop_of[d[i]] = k;
            rows.emplace_back(d[i], d[(i + d.size() - 1) % d.size()]);
        }
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows.size(), nf);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto [e, p] = rows[i];
        M(i, g.face_of[e]) += 1;
        M(i, g.face_of[EmbeddedGraph::rev(e)]) -= 1;
        M(i, g.face_of[p]) -= 1;
        M(i, g.face_of[EmbeddedGraph::rev(p)]) += 1;
    }
    r.rows = static_cast<int>(rows.size());
    r.cols = nf;
    r.rank = eigen_rank(M);
    r.expected_rank = nf - m - 1;
    auto wind = [&](const LoopInGraph& l) {
        auto n = winding_numbers(g, {l});
        return Eigen::VectorXd(Eigen::Map<Eigen::VectorXi>(n.data(), nf).cast<double>());
    };
    r.kernel_residual = (M * Eigen::VectorXd::Ones(nf)).cwiseAbs().maxCoeff();
    for (const auto& l : s.loops) r.kernel_residual = std::max(r.kernel_residual, (M * wind(l)).cwiseAbs().maxCoeff());
    for (int v = 0; v < g.num_vertices; ++v) {
        Eigen::RowVectorXd star = Eigen::RowVectorXd::Zero(nf);
        for (int d : g.rotation[v])
            if (row_of[d] >= 0) star += M.row(row_of[d]);
        r.orthogonality_residual = std::max(r.orthogonality_residual, star.cwiseAbs().maxCoeff());
    }
    for (const auto& l : s.loops) {
        Eigen::RowVectorXd dl = Eigen::RowVectorXd::Zero(nf);
        for (int d : l.darts) dl += M.row(row_of[d]);
        r.orthogonality_residual = std::max(r.orthogonality_residual, dl.cwiseAbs().maxCoeff());
    }

    auto alpha = [&](const Crossing& x) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(rows.size());
        a(row_of[x.e1]) += 1;
        a(row_of[x.e2]) -= 1;
        return a;
    };
    std::vector<Eigen::VectorXd> family;
    for (int i : X.self_ids) {
        const auto& x = X.crossings[i];
        const auto& l = s.loops[loop_of[x.e1]];
        // l_v starts with e1(v) and stops at its first return to v.
        int i1 = static_cast<int>(std::find(l.darts.begin(), l.darts.end(), x.e1) - l.darts.begin());
        LoopInGraph lv = make_loop(g, follow(g, l, i1, x.vertex));
        Eigen::VectorXd a = alpha(x);
        r.alpha_residual = std::max(r.alpha_residual, (M * wind(lv) - a).cwiseAbs().maxCoeff());
        family.push_back(a);
        ++r.alpha_count;
    }
    for (int i : X.pair_ids) {
        const auto& x = X.crossings[i];
        const auto& y = X.crossings[X.representative[X.cls[i]]];
        if (x.vertex == y.vertex) continue;
        double eps = loop_of[x.e1] != loop_of[y.e1] ? 1.0 : -1.0;
        Eigen::VectorXd b = alpha(x) + eps * alpha(y);
        int la = loop_of[x.e1];
        int lb = la == x.loop_a ? x.loop_b : x.loop_a;
        const auto& A = s.loops[la];
        const auto& B = s.loops[lb];
        int i1 = static_cast<int>(std::find(A.darts.begin(), A.darts.end(), x.e1) - A.darts.begin());
        auto path = follow(g, A, i1, y.vertex);
        auto back = follow(g, B, position_at(g, B, y.vertex), x.vertex);
        path.insert(path.end(), back.begin(), back.end());
        r.beta_residual = std::max(r.beta_residual, (M * wind(make_loop(g, path)) - b).cwiseAbs().maxCoeff());
        family.push_back(b);
        ++r.beta_count;
    }
    // Completion for cycles of the intersection graph.
    {
        std::vector<std::vector<std::pair<int, int>>> adj(m);  // (loop, class)
        for (std::size_t c = 0; c < X.class_loops.size(); ++c) {
            auto [a, b] = X.class_loops[c];
            adj[a].emplace_back(b, static_cast<int>(c));
            adj[b].emplace_back(a, static_cast<int>(c));
        }
        std::vector<int> parent(m, -1), depth(m, -1);
        std::vector<char> tree_class(X.class_loops.size(), 0);
        depth[0] = 0;
        std::deque<int> q{0};
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            for (auto [w, c] : adj[u])
                if (depth[w] < 0) {
                    depth[w] = depth[u] + 1;
                    parent[w] = u;
                    tree_class[c] = 1;
                    q.push_back(w);
                }
        }
        auto rep_vertex = [&](int a, int b) {
            for (std::size_t c = 0; c < X.class_loops.size(); ++c)
                if (X.class_loops[c] == std::pair<int, int>(std::minmax(a, b))) return X.crossings[X.representative[c]].vertex;
            throw NumericError("no crossing between consecutive loops");
        };
        for (std::size_t c = 0; c < X.class_loops.size(); ++c) {
            if (tree_class[c]) continue;
            auto [l, lp] = X.class_loops[c];
            std::vector<int> up{l}, down{lp};
            int a = l, b = lp;
            while (a != b) {
                if (depth[a] >= depth[b]) up.push_back(a = parent[a]);
                else down.push_back(b = parent[b]);
            }
            down.pop_back();
            std::vector<int> cyc = up;
            cyc.insert(cyc.end(), down.rbegin(), down.rend());
            int k = static_cast<int>(cyc.size());
            std::vector<int> darts;
            for (int i = 0; i < k; ++i) {
                int li = cyc[i], l1 = cyc[(i + 1) % k], l2 = cyc[(i + 2) % k];
                int from = rep_vertex(li, l1), to = rep_vertex(l1, l2);
                auto piece = follow(g, s.loops[l1], position_at(g, s.loops[l1], from), to);
                darts.insert(darts.end(), piece.begin(), piece.end());
            }
            family.push_back(M * wind(make_loop(g, darts)));
            ++r.gamma_count;
        }
    }
    if (!family.empty()) {
        Eigen::MatrixXd Fm(rows.size(), family.size());
        for (std::size_t j = 0; j < family.size(); ++j) Fm.col(j) = family[j];
        r.family_rank = eigen_rank(Fm);
        std::mt19937_64 rng(1);
        std::normal_distribution<double> nd;
        Eigen::VectorXd u(nf);
        for (int f = 0; f < nf; ++f) u(f) = nd(rng);
        Eigen::VectorXd phi = M * u;
        Eigen::VectorXd c = Fm.completeOrthogonalDecomposition().solve(phi);
        r.inversion_residual = (Fm * c - phi).cwiseAbs().maxCoeff();
    }
    r.mu.assign(rows.size(), std::vector<double>(nf));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int f = 0; f < nf; ++f) r.mu[i][f] = M(i, f);
    const double tol = 1e-9;
    std::ostringstream w;
    if (r.rank != r.expected_rank) w << "rank " << r.rank << " != " << r.expected_rank << "; ";
    if (r.kernel_residual > tol) w << "kernel residual " << r.kernel_residual << "; ";
    if (r.orthogonality_residual > tol) w << "orthogonality residual " << r.orthogonality_residual << "; ";
    if (r.alpha_residual > tol) w << "alpha preimage residual " << r.alpha_residual << "; ";
    if (r.beta_residual > tol) w << "beta preimage residual " << r.beta_residual << "; ";
    if (r.family_rank != r.expected_rank) w << "family rank " << r.family_rank << "; ";
    if (r.inversion_residual > tol) w << "inversion residual " << r.inversion_residual << "; ";
    r.witness = w.str();
    r.ok = r.witness.empty();
    return r;
}

VerifyReport verify_mm(const Skein& s, int vertex, double h, double N, const std::vector<double>& face_area) {
    const auto& g = *s.g;
    auto X = intersection_report(s);
    auto a = areas_or_default(g, face_area);
    if (!(h > 0)) throw ValidationError("step must be positive");
    auto phi_at = [&](const std::vector<double>& dir, double step) {
        std::vector<double> b = a;
        for (int f = 0; f < g.num_faces(); ++f) b[f] += step * dir[f];
        b[g.f_inf] = 0.0;
        for (double x : b)
            if (x < 0) throw ValidationError("finite-difference step leaves the positive area cone");
        return wilson_evaluate_areas(g, s.loops, b, N);
    };
    auto fd = [&](const std::vector<double>& dir, double step) {
        return (phi_at(dir, step) - phi_at(dir, -step)) / (2 * step);
    };
    auto finish = [&](MMCheck& c, const std::vector<double>& dir) {
        double lh = fd(dir, h), lh2 = fd(dir, h / 2);
        c.lhs = lh;
        c.residual = std::abs(lh - c.rhs);
        c.residual_richardson = std::abs((4 * lh2 - lh) / 3 - c.rhs);
        double r1 = std::abs(fd(dir, 2e-2) - c.rhs), r2 = std::abs(fd(dir, 1e-2) - c.rhs);
        c.scaling_ratio = r1 / r2;
        c.coarse_residual = r2;
    };
    VerifyReport rep;
    bool found = vertex < 0;
    for (const auto& x : X.crossings) {
        if (vertex >= 0 && x.vertex != vertex) continue;
        found = true;
        std::vector<double> dir(g.num_faces(), 0.0);
        const double sg[4] = {1, -1, 1, -1};
        for (int i = 0; i < 4; ++i)
            if (x.face[i] != g.f_inf) dir[x.face[i]] += sg[i];
        MMCheck c;
        c.kind = x.self ? "**" : "*";
        c.where = x.vertex;
        c.rhs = mm_rhs(s, x, a, N);
        finish(c, dir);
        rep.checks.push_back(c);
    }
    if (!found) throw ValidationError("vertex " + std::to_string(vertex) + " is not a crossing");
    if (vertex < 0) {
        double phi = wilson_evaluate_areas(g, s.loops, a, N);
        for (int f : g.bounded) {
            bool touches = false;
            for (int d : g.boundary[f]) touches |= g.face_of[EmbeddedGraph::rev(d)] == g.f_inf;
            if (!touches) continue;
            std::vector<double> dir(g.num_faces(), 0.0);
            dir[f] = 1.0;
            MMCheck c;
            c.kind = "***";
            c.where = f;
            c.rhs = -0.5 * phi;
            finish(c, dir);
            rep.checks.push_back(c);
        }
    }
    for (const auto& c : rep.checks) rep.max_residual = std::max(rep.max_residual, c.residual);
    return rep;
}

SmallAreaReport small_area_coefficients(const Skein& s, const std::vector<double>& face_area) {
    const auto& g = *s.g;
    auto a = areas_or_default(g, face_area);
    int m = static_cast<int>(s.loops.size());
    std::vector<std::vector<int>> n;
    for (const auto& l : s.loops) n.push_back(winding_numbers(g, {l}));
    auto overlap = [&](int i, int j) {
        double v = 0.0;
        for (int f = 0; f < g.num_faces(); ++f) v += a[f] * n[i][f] * n[j][f];
        return v;
    };
    SmallAreaReport r;
    r.m = m;
    if (m == 1) {
        r.predicted = -0.5 * overlap(0, 0);
    } else {
        // Matrix-tree theorem: sum over spanning trees of the product of overlaps.
        Eigen::MatrixXd Lap = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                if (i != j) {
                    double w = overlap(i, j);
                    Lap(i, j) -= w;
                    Lap(i, i) += w;
                }
        double trees = Lap.bottomRightCorner(m - 1, m - 1).determinant();
        r.predicted = (m % 2 == 0 ? -1.0 : 1.0) * trees;
    }
    auto slope = [&](double alpha) {
        std::vector<double> b = a;
        for (double& x : b) x *= alpha;
        double phi = wilson_evaluate_areas(g, s.loops, b, INFINITY);
        return m == 1 ? (phi - 1.0) / alpha : phi / std::pow(alpha, m - 1);
    };
    const double a1 = 1e-2, a2 = 1e-3;
    double s1 = slope(a1), s2 = slope(a2);
    r.fitted = (a1 * s2 - a2 * s1) / (a1 - a2);
    r.rel_error = std::abs(r.predicted) > 1e-12 ? std::abs(r.fitted - r.predicted) / std::abs(r.predicted)
                                                : std::abs(r.fitted);
    return r;
}

MMSolveReport mm_solve(const Skein& s, const std::vector<double>& face_area, const MMSolveOptions& opt) {
    const auto& g = *s.g;
    auto target = areas_or_default(g, face_area);
    target[g.f_inf] = 0.0;
    intersection_report(s);
    {
        auto c = complexity(s);
        if (!c.based_at_infinity) throw ValidationError("skein is not based at infinity");
    }

    struct Term {
        int a, b;  // node ids; b = -1 for a single factor
    };
    struct Node {
        Loops loops;
        bool ode = false;
        int m = 0;
        Eigen::MatrixXd P;               // regions x rows pseudo-inverse
        std::vector<double> region_area; // target area per unknown
        std::vector<std::vector<Term>> terms;  // per crossing row
        int inf_rows = 0;
        WilsonProblem wp;
    };
    std::vector<Node> nodes;
    std::map<std::string, int> memo;
    std::set<std::string> active;

    std::function<int(const Loops&)> get = [&](const Loops& L) -> int {
        std::string key = key_of(L);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        if (active.count(key)) throw NumericError("recursion does not decrease complexity");
        if (static_cast<int>(nodes.size()) >= opt.max_nodes)
            throw ResourceError("recursion budget exceeded", static_cast<long long>(nodes.size()));
        active.insert(key);
        Node node;
        node.loops = L;
        node.m = static_cast<int>(L.size());
        Derived D = derive(g, L);
        bool based = D.connected && has_matching(D.inf_neighbours);
        if (based) {
            node.ode = true;
            std::vector<int> unknown(D.nreg, -1);
            int nu = 0;
            for (int r = 0; r < D.nreg; ++r)
                if (r != D.r_inf) unknown[r] = nu++;
            node.region_area.assign(nu, 0.0);
            for (int f = 0; f < g.num_faces(); ++f)
                if (unknown[D.region[f]] >= 0) node.region_area[unknown[D.region[f]]] += target[f];
            std::vector<int> inf_adj;
            {
                std::set<int> sset;
                for (const auto& v : D.inf_neighbours) sset.insert(v.begin(), v.end());
                inf_adj.assign(sset.begin(), sset.end());
            }
            int nrows = static_cast<int>(D.crossings.size() + inf_adj.size());
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nrows, nu);
            const double sg[4] = {1, -1, 1, -1};
            Skein here{s.g, L};
            for (std::size_t i = 0; i < D.crossings.size(); ++i) {
                const auto& x = D.crossings[i];
                for (int j = 0; j < 4; ++j) {
                    int u = unknown[D.region[x.face[j]]];
                    if (u >= 0) A(i, u) += sg[j];
                }
                Skein sx = mm_transform(here, x.vertex);
                std::vector<Term> terms;
                if (!x.self) {
                    terms.push_back({get(sx.loops), -1});
                } else {
                    int k = x.loop_a;
                    std::vector<int> others;
                    for (int j = 0; j < static_cast<int>(sx.loops.size()); ++j)
                        if (j != k && j != k + 1) others.push_back(j);
                    int n = static_cast<int>(others.size());
                    for (unsigned mask = 0; mask < (1u << n); ++mask) {
                        Loops A1{sx.loops[k]}, B1{sx.loops[k + 1]};
                        for (int j = 0; j < n; ++j) (mask >> j & 1 ? A1 : B1).push_back(sx.loops[others[j]]);
                        int ia = get(A1);
                        int ib = get(B1);
                        terms.push_back({ia, ib});
                    }
                }
                node.terms.push_back(std::move(terms));
            }
            for (std::size_t i = 0; i < inf_adj.size(); ++i) A(D.crossings.size() + i, unknown[inf_adj[i]]) = 1.0;
            node.inf_rows = static_cast<int>(inf_adj.size());
            if (eigen_rank(A) != nu) throw NumericError("area-derivative system is singular for a skein based at infinity");
            node.P = A.completeOrthogonalDecomposition().pseudoInverse();
        } else {
            node.wp = wilson_problem(g, L);
        }
        int id = static_cast<int>(nodes.size());
        nodes.push_back(std::move(node));
        memo[key] = id;
        active.erase(key);
        return id;
    };
    int root = get(s.loops);

    std::vector<int> ode_index(nodes.size(), -1);
    int n_ode = 0, n_leaf = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].ode) ode_index[i] = n_ode++;
        else ++n_leaf;
    }
    std::vector<double> leaf_val(nodes.size(), 0.0);
    auto eval_leaves = [&](double sc) {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].ode) continue;
            TimeVector t(g.bounded.size());
            for (std::size_t k = 0; k < g.bounded.size(); ++k) t[k] = sc * target[g.bounded[k]];
            leaf_val[i] = evaluate_phi(nodes[i].wp.pw, t, INFINITY);
        }
    };
    auto deriv = [&](const std::vector<double>& y, std::vector<double>& dy) {
        auto val = [&](int id) { return nodes[id].ode ? y[ode_index[id]] : leaf_val[id]; };
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!nodes[i].ode) continue;
            const auto& nd = nodes[i];
            Eigen::VectorXd rhs(nd.terms.size() + nd.inf_rows);
            for (std::size_t r = 0; r < nd.terms.size(); ++r) {
                double acc = 0.0;
                for (const auto& t : nd.terms[r]) acc += t.b < 0 ? val(t.a) : val(t.a) * val(t.b);
                rhs(r) = acc;
            }
            double self = y[ode_index[i]];
            for (int r = 0; r < nd.inf_rows; ++r) rhs(nd.terms.size() + r) = -0.5 * self;
            Eigen::VectorXd grad = nd.P * rhs;
            double d = 0.0;
            for (int u = 0; u < grad.size(); ++u) d += nd.region_area[u] * grad(u);
            dy[ode_index[i]] = d;
        }
    };
    auto integrate = [&](int steps) {
        std::vector<double> y(n_ode);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].ode) y[ode_index[i]] = nodes[i].m == 1 ? 1.0 : 0.0;
        std::vector<double> k1(n_ode), k2(n_ode), k3(n_ode), k4(n_ode), tmp(n_ode);
        double hstep = 1.0 / steps;
        for (int st = 0; st < steps; ++st) {
            double s0 = st * hstep;
            eval_leaves(s0);
            deriv(y, k1);
            eval_leaves(s0 + hstep / 2);
            for (int i = 0; i < n_ode; ++i) tmp[i] = y[i] + hstep / 2 * k1[i];
            deriv(tmp, k2);
            for (int i = 0; i < n_ode; ++i) tmp[i] = y[i] + hstep / 2 * k2[i];
            deriv(tmp, k3);
            eval_leaves(s0 + hstep);
            for (int i = 0; i < n_ode; ++i) tmp[i] = y[i] + hstep * k3[i];
            deriv(tmp, k4);
            for (int i = 0; i < n_ode; ++i) y[i] += hstep / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
        return y[ode_index[root]];
    };
    MMSolveReport rep;
    rep.ode_nodes = n_ode;
    rep.leaves = n_leaf;
    int steps = std::max(1, opt.steps);
    double v = integrate(steps);
    while (true) {
        if (steps * 2 > opt.max_steps) break;
        double v2 = integrate(steps * 2);
        rep.step_change = std::abs(v2 - v);
        v = v2;
        steps *= 2;
        if (rep.step_change <= opt.tol) break;
    }
    if (!std::isfinite(v)) throw NumericError("area ODE diverged");
    rep.value = v;
    rep.steps = steps;
    return rep;
}

}  // namespace mf
