#include "mf/planar.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "mf/errors.hpp"

namespace mf {

namespace {

constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

int dir_of(char c) {
    switch (c) {
        case 'E': return 0;
        case 'N': return 1;
        case 'W': return 2;
        case 'S': return 3;
        default: return -1;
    }
}

int opposite(int d) { return (d + 2) & 3; }

Point step(const Point& p, int d) { return {p[0] + kDx[d], p[1] + kDy[d]}; }

std::string fmt(const Point& p) {
    std::ostringstream s;
    s << "(" << p[0] << "," << p[1] << ")";
    return s.str();
}

// Undirected unit edge key: lower-left endpoint plus axis.
std::tuple<long long, long long, int> unit_key(const Point& p, int d) {
    Point q = step(p, d);
    Point lo = std::min(p, q);
    return {lo[0], lo[1], d & 1};
}

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
    bool unite(int a, int b) {
        a = find(a), b = find(b);
        if (a == b) return false;
        p[std::max(a, b)] = std::min(a, b);
        return true;
    }
};

void check_connected(const EmbeddedGraph& g) {
    UnionFind uf(g.num_vertices);
    for (int d = 0; d < g.num_darts(); d += 2) uf.unite(g.tail[d], g.head[d]);
    for (int v = 0; v < g.num_vertices; ++v)
        if (uf.find(v) != uf.find(0)) throw ValidationError("graph is not connected");
}

void assign_letters(EmbeddedGraph& g) {
    g.bounded.clear();
    g.letter.assign(g.num_faces(), 0);
    for (int f = 0; f < g.num_faces(); ++f)
        if (f != g.f_inf) {
            g.bounded.push_back(f);
            g.letter[f] = static_cast<int>(g.bounded.size());
        }
}

}  // namespace

void compute_faces(EmbeddedGraph& g) {
    int nd = g.num_darts();
    if (nd == 0) throw ValidationError("map has no edges, hence no faces");
    g.rot_next.assign(nd, -1);
    g.rot_prev.assign(nd, -1);
    for (const auto& r : g.rotation)
        for (std::size_t i = 0; i < r.size(); ++i) {
            g.rot_next[r[i]] = r[(i + 1) % r.size()];
            g.rot_prev[r[(i + 1) % r.size()]] = r[i];
        }
    for (int d = 0; d < nd; ++d)
        if (g.rot_next[d] < 0) throw ValidationError("dart " + std::to_string(d) + " missing from rotation");
    check_connected(g);

    g.face_of.assign(nd, -1);
    g.boundary.clear();
    for (int d0 = 0; d0 < nd; ++d0) {
        if (g.face_of[d0] >= 0) continue;
        int f = static_cast<int>(g.boundary.size());
        g.boundary.emplace_back();
        for (int d = d0; g.face_of[d] < 0; d = g.face_next(d)) {
            g.face_of[d] = f;
            g.boundary[f].push_back(d);
        }
    }
    if (g.num_vertices - g.num_edges() + g.num_faces() != 2)
        throw ValidationError("corrupt map: Euler relation fails (V=" + std::to_string(g.num_vertices) +
                              ", E=" + std::to_string(g.num_edges()) + ", F=" + std::to_string(g.num_faces()) + ")");

    if (!g.is_lattice()) return;
    g.area.assign(g.num_faces(), 0.0);
    g.f_inf = -1;
    for (int f = 0; f < g.num_faces(); ++f) {
        long long a2 = 0;
        for (int d : g.boundary[f]) {
            const auto& p = g.path[d];
            for (std::size_t i = 0; i + 1 < p.size(); ++i) a2 += p[i][0] * p[i + 1][1] - p[i + 1][0] * p[i][1];
        }
        if (a2 <= 0) {
            if (g.f_inf >= 0) throw NumericError("corrupt map: more than one face with nonpositive area");
            g.f_inf = f;
        } else {
            g.area[f] = static_cast<double>(a2 / 2);
        }
    }
    if (g.f_inf < 0) throw NumericError("corrupt map: no unbounded face");
    assign_letters(g);
}

LatticeSkein ingest_lattice(const std::vector<LatticeLoop>& loops, IngestMode mode) {
    if (loops.empty()) throw ValidationError("no loops");
    bool strict = mode == IngestMode::strict;

    struct Step {
        Point p;
        int d;
    };
    std::vector<std::vector<Step>> steps(loops.size());
    std::map<std::tuple<long long, long long, int>, int> uses;
    std::map<Point, int> mask;
    std::set<Point> kept;
    std::map<Point, std::vector<std::pair<int, int>>> passages;

    for (std::size_t k = 0; k < loops.size(); ++k) {
        const auto& L = loops[k];
        if (L.moves.empty()) throw ValidationError("loop " + std::to_string(k) + " is constant");
        Point p = L.base;
        for (std::size_t i = 0; i < L.moves.size(); ++i) {
            int d = dir_of(L.moves[i]);
            if (d < 0)
                throw ValidationError("loop " + std::to_string(k) + ": bad move '" + std::string(1, L.moves[i]) +
                                      "' at position " + std::to_string(i));
            steps[k].push_back({p, d});
            ++uses[unit_key(p, d)];
            mask[p] |= 1 << d;
            p = step(p, d);
            mask[p] |= 1 << opposite(d);
        }
        if (p != L.base) throw ValidationError("loop " + std::to_string(k) + " is not closed");
        kept.insert(L.base);
        const auto& s = steps[k];
        for (std::size_t i = 0; i < s.size(); ++i) {
            int in = s[(i + s.size() - 1) % s.size()].d, out = s[i].d;
            passages[s[i].p].emplace_back(in, out);
            if (out == opposite(in)) kept.insert(s[i].p);
        }
    }
    if (strict) {
        for (const auto& [key, n] : uses)
            if (n > 1)
                throw ValidationError("shared edge between strands at " +
                                      fmt({std::get<0>(key), std::get<1>(key)}));
        for (const auto& [p, ps] : passages) {
            if (ps.size() > 2) throw ValidationError("vertex " + fmt(p) + " has multiplicity > 2");
            if (ps.size() == 2)
                for (auto [in, out] : ps)
                    if (in != out) throw ValidationError("tangential contact at " + fmt(p));
        }
    }
    for (const auto& [p, m] : mask)
        if (__builtin_popcount(m) != 2) kept.insert(p);

    EmbeddedGraph g;
    std::map<Point, int> vid;
    for (const auto& p : kept) {
        vid[p] = g.num_vertices++;
        g.pos.push_back(p);
    }
    g.rotation.assign(g.num_vertices, {});
    std::map<std::pair<Point, int>, int> first_step;  // (point, dir) at a kept vertex -> dart
    std::set<std::tuple<long long, long long, int>> assigned;
    std::vector<int> first_dir;
    for (int v = 0; v < g.num_vertices; ++v) {
        Point start = g.pos[v];
        for (int d = 0; d < 4; ++d) {
            if (!(mask[start] >> d & 1) || assigned.count(unit_key(start, d))) continue;
            std::vector<Point> pts{start};
            Point cur = start;
            int dir = d;
            int last_dir = d;
            while (true) {
                assigned.insert(unit_key(cur, dir));
                cur = step(cur, dir);
                pts.push_back(cur);
                last_dir = dir;
                if (kept.count(cur)) break;
                int m = mask[cur] & ~(1 << opposite(dir));
                dir = __builtin_ctz(m);
            }
            int e = g.num_edges();
            g.tail.push_back(v);
            g.head.push_back(vid[cur]);
            g.tail.push_back(vid[cur]);
            g.head.push_back(v);
            g.path.push_back(pts);
            g.path.emplace_back(pts.rbegin(), pts.rend());
            double len = static_cast<double>(pts.size() - 1);
            g.length.push_back(len);
            g.length.push_back(len);
            first_dir.push_back(d);
            first_dir.push_back(opposite(last_dir));
            first_step[{start, d}] = 2 * e;
            first_step[{cur, opposite(last_dir)}] = 2 * e + 1;
        }
    }
    for (int d = 0; d < g.num_darts(); ++d) g.rotation[g.tail[d]].push_back(d);
    for (auto& r : g.rotation)
        std::sort(r.begin(), r.end(), [&](int a, int b) { return first_dir[a] < first_dir[b]; });
    compute_faces(g);

    LatticeSkein out;
    for (std::size_t k = 0; k < loops.size(); ++k) {
        LoopInGraph l;
        l.base = vid.at(loops[k].base);
        const auto& s = steps[k];
        std::size_t i = 0;
        while (i < s.size()) {
            auto it = first_step.find({s[i].p, s[i].d});
            if (it == first_step.end()) throw NumericError("loop leaves the corridor structure");
            int dart = it->second;
            std::size_t len = g.path[dart].size() - 1;
            for (std::size_t j = 0; j < len; ++j)
                if (i + j >= s.size() || s[i + j].p != g.path[dart][j])
                    throw NumericError("loop does not follow its corridor");
            l.darts.push_back(dart);
            i += len;
        }
        out.loops.push_back(std::move(l));
    }
    out.g = std::move(g);
    return out;
}

EmbeddedGraph build_map(const CombinatorialMap& m) {
    EmbeddedGraph g;
    int nd = static_cast<int>(m.darts.size());
    if (nd == 0) throw ValidationError("map has no edges, hence no faces");
    if (nd % 2) throw ValidationError("darts must come in reversal pairs");
    g.num_vertices = static_cast<int>(m.rotation.size());
    for (int d = 0; d < nd; ++d) {
        auto [u, v] = m.darts[d];
        if (u < 0 || v < 0 || u >= g.num_vertices || v >= g.num_vertices)
            throw ValidationError("dart " + std::to_string(d) + " has an endpoint outside the vertex range");
        g.tail.push_back(u);
        g.head.push_back(v);
    }
    for (int d = 0; d < nd; d += 2)
        if (g.tail[d] != g.head[d + 1] || g.head[d] != g.tail[d + 1])
            throw ValidationError("darts " + std::to_string(d) + " and " + std::to_string(d + 1) +
                                  " are not reverse of each other");
    std::vector<int> seen(nd, 0);
    for (int v = 0; v < g.num_vertices; ++v)
        for (int d : m.rotation[v]) {
            if (d < 0 || d >= nd) throw ValidationError("rotation names an unknown dart");
            if (g.tail[d] != v) throw ValidationError("rotation of vertex " + std::to_string(v) + " lists dart " +
                                                      std::to_string(d) + " which does not leave it");
            if (seen[d]++) throw ValidationError("dart " + std::to_string(d) + " repeated in rotation");
        }
    g.rotation = m.rotation;
    if (!m.lengths.empty()) {
        if (static_cast<int>(m.lengths.size()) != nd / 2) throw ValidationError("lengths must be given per edge");
        for (double x : m.lengths) {
            g.length.push_back(x);
            g.length.push_back(x);
        }
    } else {
        g.length.assign(nd, std::numeric_limits<double>::quiet_NaN());
    }
    compute_faces(g);
    if (m.unbounded < 0 || m.unbounded >= nd) throw ValidationError("unbounded face must be flagged by a dart");
    g.f_inf = g.face_of[m.unbounded];
    g.area.assign(g.num_faces(), 0.0);
    std::vector<int> given(g.num_faces(), 0);
    for (auto [d, a] : m.areas) {
        if (d < 0 || d >= nd) throw ValidationError("area given for an unknown dart");
        int f = g.face_of[d];
        if (f == g.f_inf) throw ValidationError("area given for the unbounded face");
        if (given[f]++) throw ValidationError("area given twice for one face");
        if (!(a > 0)) throw ValidationError("bounded face areas must be positive");
        g.area[f] = a;
    }
    for (int f = 0; f < g.num_faces(); ++f)
        if (f != g.f_inf && !given[f])
            throw ValidationError("missing area for the face left of dart " + std::to_string(g.boundary[f][0]));
    assign_letters(g);
    return g;
}

void validate_loop(const EmbeddedGraph& g, const LoopInGraph& l) {
    if (l.darts.empty()) throw ValidationError("empty loop");
    for (int d : l.darts)
        if (d < 0 || d >= g.num_darts()) throw ValidationError("loop uses a dart outside the graph");
    for (std::size_t i = 0; i < l.darts.size(); ++i) {
        int a = l.darts[i], b = l.darts[(i + 1) % l.darts.size()];
        if (g.head[a] != g.tail[b]) throw ValidationError("loop darts do not chain head to tail");
    }
}

LassoBasis dual_tree_and_basis(const EmbeddedGraph& g, int root, bool reversed) {
    if (root < 0 || root >= g.num_vertices) throw ValidationError("root is not a vertex");
    LassoBasis b;
    b.root = root;
    b.reversed = reversed;
    int nf = g.num_faces();
    b.dist.assign(nf, -1);
    b.dist[g.f_inf] = 0;
    std::deque<int> queue{g.f_inf};
    while (!queue.empty()) {
        int f = queue.front();
        queue.pop_front();
        for (int d : g.boundary[f]) {
            int h = g.face_of[EmbeddedGraph::rev(d)];
            if (b.dist[h] < 0) {
                b.dist[h] = b.dist[f] + 1;
                queue.push_back(h);
            }
        }
    }
    b.parent.assign(nf, -1);
    b.parent_dart.assign(nf, -1);
    for (int f = 0; f < nf; ++f) {
        if (f == g.f_inf) continue;
        int best_face = -1, best_dart = -1;
        for (int d : g.boundary[f]) {
            int h = g.face_of[EmbeddedGraph::rev(d)];
            if (b.dist[h] != b.dist[f] - 1) continue;
            bool better = best_face < 0 ||
                          (reversed ? std::pair(h, d >> 1) > std::pair(best_face, best_dart >> 1)
                                    : std::pair(h, d >> 1) < std::pair(best_face, best_dart >> 1));
            if (better) best_face = h, best_dart = d;
        }
        b.parent[f] = best_face;
        b.parent_dart[f] = best_dart;
    }
    b.in_tree.assign(g.num_edges(), 1);
    for (int f = 0; f < nf; ++f)
        if (f != g.f_inf) b.in_tree[b.parent_dart[f] >> 1] = 0;
    UnionFind uf(g.num_vertices);
    int tree_edges = 0;
    for (int e = 0; e < g.num_edges(); ++e)
        if (b.in_tree[e]) {
            ++tree_edges;
            if (!uf.unite(g.tail[2 * e], g.head[2 * e]))
                throw NumericError("internal: complement of the dual tree has a cycle");
        }
    if (tree_edges != g.num_vertices - 1) throw NumericError("internal: complement of the dual tree is not spanning");

    b.tree_parent_dart.assign(g.num_vertices, -1);
    std::vector<char> seen(g.num_vertices, 0);
    seen[root] = 1;
    std::deque<int> vq{root};
    while (!vq.empty()) {
        int v = vq.front();
        vq.pop_front();
        for (int d : g.rotation[v]) {
            if (!b.in_tree[d >> 1] || seen[g.head[d]]) continue;
            seen[g.head[d]] = 1;
            b.tree_parent_dart[g.head[d]] = d;
            vq.push_back(g.head[d]);
        }
    }

    b.children.assign(nf, {});
    for (int f = 0; f < nf; ++f) {
        if (f == g.f_inf) continue;
        int e = b.parent_dart[f];
        for (int d = g.face_next(e); d != e; d = g.face_next(d)) {
            if (b.in_tree[d >> 1]) continue;
            int c = g.face_of[EmbeddedGraph::rev(d)];
            if (b.parent_dart[c] != EmbeddedGraph::rev(d))
                throw NumericError("internal: non-tree edge on a face boundary is not a child edge");
            b.children[f].push_back(c);
        }
    }
    std::vector<int> order(nf);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return b.dist[x] > b.dist[y]; });
    b.beta.assign(nf, {});
    for (int f : order) {
        if (f == g.f_inf) continue;
        Word w{g.letter[f]};
        for (auto it = b.children[f].rbegin(); it != b.children[f].rend(); ++it)
            w.insert(w.end(), b.beta[*it].begin(), b.beta[*it].end());
        b.beta[f] = std::move(w);
    }
    b.lasso.assign(nf, {});
    for (int f = 0; f < nf; ++f) {
        if (f == g.f_inf) continue;
        int e = b.parent_dart[f];
        auto tail_path = tree_path(g, b, g.tail[e]);
        std::vector<int> l = tail_path;
        int d = e;
        do {
            l.push_back(d);
            d = g.face_next(d);
        } while (d != e);
        for (auto it = tail_path.rbegin(); it != tail_path.rend(); ++it) l.push_back(EmbeddedGraph::rev(*it));
        b.lasso[f] = std::move(l);
    }
    return b;
}

std::vector<int> tree_depths(const LassoBasis& b) {
    std::vector<int> depth(b.parent.size(), 0);
    for (std::size_t f = 0; f < b.parent.size(); ++f) {
        int n = 0;
        for (int h = static_cast<int>(f); b.parent[h] >= 0; h = b.parent[h]) ++n;
        depth[f] = n;
    }
    return depth;
}

std::vector<int> tree_path(const EmbeddedGraph& g, const LassoBasis& b, int v) {
    std::vector<int> p;
    while (v != b.root) {
        int d = b.tree_parent_dart[v];
        p.push_back(d);
        v = g.tail[d];
    }
    std::reverse(p.begin(), p.end());
    return p;
}

Word decompose_loop(const EmbeddedGraph& g, const LassoBasis& b, const LoopInGraph& l) {
    validate_loop(g, l);
    std::vector<int> edge_face(g.num_edges(), -1);
    for (int f = 0; f < g.num_faces(); ++f)
        if (f != g.f_inf) edge_face[b.parent_dart[f] >> 1] = f;
    Word w;
    for (int d : l.darts) {
        int f = edge_face[d >> 1];
        if (f < 0) continue;
        if (b.parent_dart[f] == d) {
            w.insert(w.end(), b.beta[f].begin(), b.beta[f].end());
        } else {
            Word inv = inverse(b.beta[f]);
            w.insert(w.end(), inv.begin(), inv.end());
        }
    }
    return w;
}

std::vector<int> dart_uses(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops) {
    std::vector<int> u(g.num_darts(), 0);
    for (const auto& l : loops)
        for (int d : l.darts) ++u[d];
    return u;
}

std::vector<int> winding_numbers(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops) {
    for (const auto& l : loops) validate_loop(g, l);
    auto u = dart_uses(g, loops);
    int nf = g.num_faces();
    std::vector<int> n(nf, 0);
    std::vector<char> seen(nf, 0);
    seen[g.f_inf] = 1;
    std::deque<int> q{g.f_inf};
    while (!q.empty()) {
        int f = q.front();
        q.pop_front();
        for (int d : g.boundary[f]) {
            // f is on the left of d; the face across is on its right.
            int h = g.face_of[EmbeddedGraph::rev(d)];
            int val = n[f] - (u[d] - u[EmbeddedGraph::rev(d)]);
            if (!seen[h]) {
                seen[h] = 1;
                n[h] = val;
                q.push_back(h);
            } else if (n[h] != val) {
                throw NumericError("winding numbers are inconsistent (loops not closed?)");
            }
        }
    }
    return n;
}

std::vector<int> dual_path_crossings(const EmbeddedGraph& g, const LassoBasis& b, const LoopInGraph& l) {
    auto u = dart_uses(g, {l});
    std::vector<int> out(g.num_faces(), 0);
    for (int f = 0; f < g.num_faces(); ++f)
        for (int h = f; b.parent[h] >= 0; h = b.parent[h]) {
            int d = b.parent_dart[h];
            out[f] += u[d] + u[EmbeddedGraph::rev(d)];
        }
    return out;
}

WindingReport winding_and_area(const EmbeddedGraph& g, const LassoBasis& b, const LoopInGraph& l) {
    WindingReport r;
    r.winding = winding_numbers(g, {l});
    auto u = dart_uses(g, {l});
    r.edge_uses.assign(g.num_edges(), 0);
    for (int e = 0; e < g.num_edges(); ++e) {
        r.edge_uses[e] = u[2 * e] + u[2 * e + 1];
        r.max_multiplicity = std::max(r.max_multiplicity, r.edge_uses[e]);
    }
    for (int f = 0; f < g.num_faces(); ++f) r.amperean += g.area[f] * r.winding[f] * r.winding[f];
    for (int d : l.darts) r.length += g.length[d];
    const double pi = std::numbers::pi;
    r.bp_margin = pi * r.length * r.length - r.amperean;
    if (g.is_lattice()) {
        // pi > 314159265 / 10^8, so the rational test implies the real inequality.
        __int128 A = std::llround(r.amperean), L = std::llround(r.length);
        r.bp_exact_ok = A * 100000000 <= static_cast<__int128>(314159265) * L * L;
    } else {
        r.bp_exact_ok = !(r.bp_margin < 0);
    }
    TimeVector t;
    for (int f : g.bounded) t.push_back(g.area[f]);
    Word w = decompose_loop(g, b, l);
    r.word_amperean = word_stats(w, t).amperean;
    double p = r.max_multiplicity;
    r.word_bound_margin = pi * p * p * r.length * r.length - r.word_amperean;
    return r;
}

WindingReport winding_and_area(const LatticeLoop& l) {
    if (l.moves.empty()) return {};
    auto s = ingest_lattice({l}, IngestMode::permissive);
    auto b = dual_tree_and_basis(s.g, s.loops[0].base);
    return winding_and_area(s.g, b, s.loops[0]);
}

}  // namespace mf
