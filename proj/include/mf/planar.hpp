#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "mf/word.hpp"

namespace mf {

using Point = std::array<long long, 2>;

// Planar combinatorial map.  Dart 2k and 2k+1 are the two orientations of edge k.
struct EmbeddedGraph {
    int num_vertices = 0;
    std::vector<Point> pos;                  // empty for combinatorial input
    std::vector<int> tail, head;             // per dart
    std::vector<std::vector<int>> rotation;  // per vertex: outgoing darts, counterclockwise
    std::vector<int> rot_next, rot_prev;     // ccw neighbours around the tail
    std::vector<double> length;              // per dart; NaN when unknown
    std::vector<std::vector<Point>> path;    // lattice points along each dart (lattice input)

    std::vector<int> face_of;                // left face of each dart
    std::vector<std::vector<int>> boundary;  // per face, darts with the face on their left
    std::vector<double> area;                // per face; 0 for the unbounded face
    int f_inf = -1;
    std::vector<int> bounded;                // bounded face ids in increasing order
    std::vector<int> letter;                 // face id -> generator (1-based), 0 for f_inf

    int num_darts() const { return static_cast<int>(tail.size()); }
    int num_edges() const { return num_darts() / 2; }
    int num_faces() const { return static_cast<int>(boundary.size()); }
    static int rev(int d) { return d ^ 1; }
    // Next dart along the boundary of the face on the left of d.
    int face_next(int d) const { return rot_prev[rev(d)]; }
    bool is_lattice() const { return !pos.empty(); }
};

struct LoopInGraph {
    std::vector<int> darts;
    int base = -1;  // tail of darts[0]
};

struct LatticeLoop {
    Point base{0, 0};
    std::string moves;
};

enum class IngestMode { strict, permissive };

struct LatticeSkein {
    EmbeddedGraph g;
    std::vector<LoopInGraph> loops;
};

// Strict mode: every unit edge used once, vertices with two passages must be
// transverse crossings.  Permissive mode accepts any closed lattice loops.
LatticeSkein ingest_lattice(const std::vector<LatticeLoop>& loops, IngestMode mode = IngestMode::strict);

struct CombinatorialMap {
    std::vector<std::pair<int, int>> darts;  // (tail, head), paired as 2k, 2k+1
    std::vector<std::vector<int>> rotation;  // per vertex, ccw
    std::vector<std::pair<int, double>> areas;  // (representative dart, area) per bounded face
    int unbounded = -1;                          // a dart with the unbounded face on its left
    std::vector<double> lengths;                 // optional, per edge
};

EmbeddedGraph build_map(const CombinatorialMap& m);

// Rebuilds faces, areas and letters; rotation, tail and head must be set.
// Areas on lattice input come from the shoelace formula.
void compute_faces(EmbeddedGraph& g);

void validate_loop(const EmbeddedGraph& g, const LoopInGraph& l);

// Dual BFS tree from the unbounded face, its complementary primal tree and the lasso basis.
struct LassoBasis {
    int root = 0;
    bool reversed = false;            // tie-break on the largest instead of smallest face id
    std::vector<int> dist;            // dual distance to f_inf
    std::vector<int> parent;          // dual parent face, -1 at f_inf
    std::vector<int> parent_dart;     // e(F): dart with F on the left and the parent on the right
    std::vector<char> in_tree;        // per edge: edge belongs to the primal tree T
    std::vector<std::vector<int>> children;  // in boundary order starting after e(F)
    std::vector<Word> beta;           // per face: beta_{e(F)} expanded in lasso letters
    std::vector<std::vector<int>> lasso;     // per face: lambda_F as darts based at root
    std::vector<int> tree_parent_dart;       // primal tree: dart entering each vertex from the root side
};

LassoBasis dual_tree_and_basis(const EmbeddedGraph& g, int root = 0, bool reversed = false);

// Depth of each face in the dual tree (equals dist when the BFS property holds).
std::vector<int> tree_depths(const LassoBasis& b);
// Primal tree path from the root to v.
std::vector<int> tree_path(const EmbeddedGraph& g, const LassoBasis& b, int v);

// Word of the loop in lasso letters (generator = g.letter[face]); no reduction.
Word decompose_loop(const EmbeddedGraph& g, const LassoBasis& b, const LoopInGraph& l);

// Number of traversals of each dart.
std::vector<int> dart_uses(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops);

// Winding numbers per face from dual accumulation of signed crossings; f_inf gets 0.
std::vector<int> winding_numbers(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops);

struct WindingReport {
    std::vector<int> winding;          // per face
    std::vector<int> edge_uses;        // per edge, both directions
    int max_multiplicity = 0;          // p
    double amperean = 0.0;             // sum |F| n(F)^2
    double length = 0.0;               // NaN when lengths are unknown
    double bp_margin = 0.0;            // pi * length^2 - amperean
    bool bp_exact_ok = true;           // exact rational check on lattice input
    double word_amperean = 0.0;        // sum t_f nbar_f^2 of the lasso word
    double word_bound_margin = 0.0;    // pi p^2 length^2 - word_amperean
};

WindingReport winding_and_area(const EmbeddedGraph& g, const LassoBasis& b, const LoopInGraph& l);
// Constant lattice loops have no graph; this covers them and delegates otherwise.
WindingReport winding_and_area(const LatticeLoop& l);

// Number of times the dual tree path from F to f_inf is crossed by the loop.
std::vector<int> dual_path_crossings(const EmbeddedGraph& g, const LassoBasis& b, const LoopInGraph& l);

}  // namespace mf
