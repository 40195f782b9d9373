#include "mf/wilson.hpp"

#include "mf/errors.hpp"

namespace mf {

TimeVector face_times(const EmbeddedGraph& g) {
    TimeVector t;
    for (int f : g.bounded) t.push_back(g.area[f]);
    return t;
}

WilsonProblem wilson_problem(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops,
                             const std::vector<std::vector<int>>& partition, const WilsonOptions& opt) {
    if (loops.empty()) throw ValidationError("no loops");
    int root = opt.root >= 0 ? opt.root : g.tail[loops[0].darts.at(0)];
    auto basis = dual_tree_and_basis(g, root, opt.reversed);
    WilsonProblem p;
    for (const auto& l : loops) p.pw.words.push_back(decompose_loop(g, basis, l));
    int m = static_cast<int>(loops.size());
    if (partition.empty()) {
        for (int i = 0; i < m; ++i) p.pw.block.push_back(i);
    } else {
        p.pw.block.assign(m, -1);
        for (std::size_t b = 0; b < partition.size(); ++b)
            for (int i : partition[b]) {
                if (i < 0 || i >= m) throw ValidationError("partition names an unknown loop");
                if (p.pw.block[i] >= 0) throw ValidationError("partition repeats a loop");
                p.pw.block[i] = static_cast<int>(b);
            }
        for (int x : p.pw.block)
            if (x < 0) throw ValidationError("partition does not cover every loop");
    }
    normalize_blocks(p.pw);
    p.t = face_times(g);
    return p;
}

double wilson_evaluate(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops, double N,
                       const std::vector<std::vector<int>>& partition, const WilsonOptions& opt) {
    auto p = wilson_problem(g, loops, partition, opt);
    return evaluate_phi(p.pw, p.t, N);
}

double wilson_evaluate_areas(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops,
                             const std::vector<double>& face_area, double N,
                             const std::vector<std::vector<int>>& partition) {
    auto p = wilson_problem(g, loops, partition);
    if (static_cast<int>(face_area.size()) != g.num_faces()) throw ValidationError("one area per face expected");
    for (std::size_t i = 0; i < g.bounded.size(); ++i) {
        double a = face_area[g.bounded[i]];
        if (a < 0) throw ValidationError("negative face area");
        p.t[i] = a;
    }
    return evaluate_phi(p.pw, p.t, N);
}

EpsilonSeries wilson_series(const EmbeddedGraph& g, const std::vector<LoopInGraph>& loops, int g_max,
                            const std::vector<std::vector<int>>& partition, const WilsonOptions& opt) {
    auto p = wilson_problem(g, loops, partition, opt);
    return evaluate_phi_series(p.pw, p.t, g_max);
}

}  // namespace mf
