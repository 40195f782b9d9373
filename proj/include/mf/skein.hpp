#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mf/planar.hpp"

namespace mf {

struct Skein {
    std::shared_ptr<const EmbeddedGraph> g;
    std::vector<LoopInGraph> loops;
};

Skein make_skein(LatticeSkein s);

// Local frame at a transverse crossing.  Counterclockwise the outgoing darts read
// a_out, b_out, rev(a_in), rev(b_in); F1..F4 are the faces between consecutive ones.
struct Crossing {
    int vertex = -1;
    int loop_a = -1, loop_b = -1;  // loops carrying the a and b strands
    int idx_a = -1, idx_b = -1;    // positions of a_out, b_out in their loops
    int a_out = -1, b_out = -1, a_in = -1, b_in = -1;
    int face[4] = {-1, -1, -1, -1};
    int e1 = -1, e2 = -1;          // outgoing darts in clockwise order through F1
    bool self = false;
};

struct IntersectionReport {
    std::vector<Crossing> crossings;  // by increasing vertex id
    std::vector<int> self_ids;        // V_s (indices into crossings)
    std::vector<int> pair_ids;        // V_f
    std::vector<int> cls;             // per crossing: class of ~ (-1 for self crossings)
    std::vector<int> representative;  // per class: crossing index with the least vertex id
    std::vector<std::pair<int, int>> class_loops;  // per class: the two loops
    bool loops_connected = true;
};

// Requires a regular skein: every edge used at most once, every vertex with two
// passages a transverse crossing of a degree-4 vertex.
IntersectionReport intersection_report(const Skein& s);

// Turns at the vertex instead of going straight: a_in -> b_out, b_in -> a_out.
// Works at any vertex with exactly two passages, so applying it twice restores the skein.
Skein mm_transform(const Skein& s, int vertex);

struct ComplexityReport {
    int intersections = 0;
    std::vector<int> d_inf;     // per loop
    int complexity = 0;
    bool connected = true;
    bool based_at_infinity = false;
};
ComplexityReport complexity(const Skein& s);

struct KazakovReport {
    int rows = 0, cols = 0;           // used darts x faces
    int rank = 0, expected_rank = 0;
    double kernel_residual = 0.0;     // max |mu n_l|, |mu 1|
    double orthogonality_residual = 0.0;  // max |*_v^T mu|, |delta_l^T mu|
    double alpha_residual = 0.0;      // max |mu(n_{l_v}) - alpha_v|
    double beta_residual = 0.0;       // max |mu(n_{l_{x,y}}) - beta_{x,y}|
    int alpha_count = 0, beta_count = 0, gamma_count = 0;
    int family_rank = 0;              // rank of {alpha} u {beta} u {gamma}
    double inversion_residual = 0.0;  // decomposition of a random image vector
    std::vector<std::vector<double>> mu;  // row per used dart, column per face
    bool ok = false;
    std::string witness;
};
KazakovReport mu_and_kazakov(const Skein& s);

struct MMCheck {
    std::string kind;  // "*", "**" or "***"
    int where = -1;    // vertex for crossings, face for boundary equations
    double lhs = 0.0, rhs = 0.0, residual = 0.0, residual_richardson = 0.0;
    double scaling_ratio = 0.0;  // residual(2h') / residual(h') at h' = 1e-2
    double coarse_residual = 0.0;  // residual(h'); the ratio is noise once this is at roundoff
};
struct VerifyReport {
    std::vector<MMCheck> checks;
    double max_residual = 0.0;
};
// vertex < 0: every crossing and every face adjacent to the unbounded face.
VerifyReport verify_mm(const Skein& s, int vertex, double h, double N, const std::vector<double>& face_area = {});

struct SmallAreaReport {
    int m = 0;
    double predicted = 0.0;  // leading coefficient from winding integrals
    double fitted = 0.0;     // Richardson-extrapolated slope
    double rel_error = 0.0;
};
SmallAreaReport small_area_coefficients(const Skein& s, const std::vector<double>& face_area = {});

struct MMSolveOptions {
    int steps = 64;
    double tol = 1e-9;       // step doubling stops when successive values agree to tol
    int max_steps = 4096;
    int max_nodes = 5000;
};
struct MMSolveReport {
    double value = 0.0;
    int ode_nodes = 0, leaves = 0, steps = 0;
    double step_change = 0.0;
};
MMSolveReport mm_solve(const Skein& s, const std::vector<double>& face_area = {}, const MMSolveOptions& opt = {});

// Canonical text key of a loop family (sorted minimal rotations of dart sequences).
std::string skein_key(const Skein& s);

}  // namespace mf
