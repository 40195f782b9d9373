#pragma once

#include <utility>
#include <vector>

#include "mf/word.hpp"

namespace mf {

// n-th moment of the free unitary Brownian motion at time t (closed form).
double biane_moment(int n, double t);

struct MomentTable {
    double t = 0.0;
    std::vector<double> values;  // values[n-1] = mu_{t,n}
};

// Integrates the quadratic moment ODE from t = 0 with an adaptive Dormand-Prince stepper.
MomentTable moment_recursion(int n_max, double t, double rel_tol = 1e-13);

// U(1) white-noise oracle: joint moment of traces and the normalized cumulant of a
// partitioned word at N = 1.
double u1_moment(const std::vector<Word>& words, const TimeVector& t);
double u1_cumulant(const PartitionedWord& target, const TimeVector& t);

// Edges of the support of the free unitary BM law, including the e^{-t/2} factor.
std::pair<double, double> spectral_edges(double t);
// lambda_t(w) = prod_f (lambda^+_{t_f})^{nbar_w(f)}.
double lambda_weight(const Word& w, const TimeVector& t);

// Set partitions of {0..k-1} as block-label vectors (restricted growth strings).
const std::vector<std::vector<int>>& set_partitions(int k);
// Moebius function mu(pi, 1) on the partition lattice, per block (-1)^{b-1}(b-1)!.
double moebius_weight(const std::vector<int>& labels);

}  // namespace mf
