#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mf/kernels.hpp"
#include "mf/word.hpp"

namespace mf {

// Truncated polynomial in eps = 1/N^2; c[0] is the master-field value.
struct EpsilonSeries {
    std::vector<double> c;

    double value(double N) const;
    int degree() const { return static_cast<int>(c.size()) - 1; }
};

// Engine state reduction: drops empty words from blocks that hold a non-empty word
// and collapses all-empty blocks to one empty word. Returns false when the state is
// identically zero (an all-empty block next to other blocks). Leaves labels normalized.
bool reduce_empty(PartitionedWord& pw);

// Reduced canonical form used as the engine's state key.
struct StateKey {
    bool zero = false;
    PartitionedWord pw;
};
StateKey engine_canonical(const PartitionedWord& pw);

struct ClosureOptions {
    bool include_order2 = true;      // false: close under N^0 moves only (master field)
    std::size_t size_cap = 5000000;
};

struct ClosureBasis {
    std::vector<PartitionedWord> states;
    std::unordered_map<std::u16string, int> index;
    bool include_order2 = true;
    int q = 0;
    std::vector<int> nbar;  // per generator, shared by every state

    int find(const PartitionedWord& canonical) const;
    std::size_t size() const { return states.size(); }
};

std::u16string state_key(const PartitionedWord& canonical);

ClosureBasis build_closure(const PartitionedWord& seed, const ClosureOptions& opt = {});

struct SparseGenerator {
    int q = 0;
    std::vector<int> nbar;
    std::vector<SparseMatrix> L;  // full L_f, drift included
    std::vector<SparseMatrix> D;  // D_f (empty when the closure skipped order-2 moves)
};

SparseGenerator assemble_generators(const ClosureBasis& basis);

// phi_0: 1 on single-block states, 0 elsewhere.
std::vector<double> initial_condition(const ClosureBasis& basis);

struct EvolveOptions {
    double tol = 1e-12;
    Exec exec = Exec::Serial;
};

// Finite-N evolution, eps = 1/N^2 (N may be +inf: eps = 0).
std::vector<double> evolve_numeric(const SparseGenerator& G, const TimeVector& t, double N,
                                   const std::vector<double>& phi0, const EvolveOptions& opt = {});
// Series evolution; result[g][state].
std::vector<std::vector<double>> evolve_series(const SparseGenerator& G, const TimeVector& t, int g_max,
                                               const std::vector<double>& phi0, const EvolveOptions& opt = {});

// Closure + generator bundle, memoized in-process (and on disk when MF_CACHE_DIR is set).
struct Engine {
    ClosureBasis basis;
    SparseGenerator gen;
    std::vector<double> phi0;
};
std::shared_ptr<const Engine> engine_for(const PartitionedWord& seed, bool include_order2,
                                         std::size_t size_cap = 5000000);
void clear_engine_cache();
// Closure size cap used by evaluate_phi and everything built on it.
void set_closure_cap(std::size_t cap);
std::size_t closure_cap();

// phi_{t,N}([S, nu]) for finite N (N > 0) or N = +inf.
double evaluate_phi(const PartitionedWord& target, const TimeVector& t, double N);
// Coefficients of phi_{t,N} in eps = 1/N^2 up to g_max.
EpsilonSeries evaluate_phi_series(const PartitionedWord& target, const TimeVector& t, int g_max);

struct TreeSums {
    double unsigned_sum = 0.0;  // sum over Cayley trees of prod <nbar_i, nbar_j>_t
    double signed_sum = 0.0;    // same with signed counts n
};
TreeSums tree_sums(const std::vector<Word>& words, const TimeVector& t);

struct BoundsReport {
    int m = 0;
    double phi = 0.0;
    double tree_bound = 0.0, tree_margin = 0.0;
    double remainder = 0.0, remainder_bound = 0.0, remainder_margin = 0.0;
    double psi1 = 0.0, psi1_bound = 0.0, psi1_margin = 0.0;
    bool ok = true;
    std::string witness;
};
BoundsReport check_bounds(const std::vector<Word>& words, const TimeVector& t, double N);

}  // namespace mf
