#pragma once

#include <vector>

#include "mf/engine.hpp"
#include "mf/planar.hpp"

namespace mf {

struct WilsonOptions {
    int root = -1;          // -1: base vertex of the first loop
    bool reversed = false;  // BFS tie-break
};

// Loops as lasso words with the block structure and face times t_f = |F|.
struct WilsonProblem {
    PartitionedWord pw;
    TimeVector t;
};

// partition: blocks of 0-based loop indices; empty means one block per loop.
WilsonProblem wilson_problem(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops,
                             const std::vector<std::vector<int>>& partition = {}, const WilsonOptions& opt = {});

// Face times in letter order.
TimeVector face_times(const EmbeddedGraph& g);

// Phi_N of the skein: the normalized cumulant N^{m-2} C_m for the default partition.
double wilson_evaluate(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops, double N,
                       const std::vector<std::vector<int>>& partition = {}, const WilsonOptions& opt = {});
// Same with explicit bounded-face areas (indexed by face id; the f_inf entry is ignored).
double wilson_evaluate_areas(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops,
                             const std::vector<double>& face_area, double N,
                             const std::vector<std::vector<int>>& partition = {});
EpsilonSeries wilson_series(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops, int g_max,
                            const std::vector<std::vector<int>>& partition = {}, const WilsonOptions& opt = {});

}  // namespace mf
