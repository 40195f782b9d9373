#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mf/free_energy.hpp"
#include "mf/kernels.hpp"
#include "mf/word.hpp"

namespace mf {

using CMatrix = Eigen::MatrixXcd;

struct BmConfig {
    int N = 3;
    double step = 1e-3;
    std::uint64_t seed = 42;
    long long samples = 100000;
};
void validate(const BmConfig& cfg);

// Default step 1e-3 * min(1, 1/t_max).
double default_step(const TimeVector& t);

enum class ExpMethod { taylor, eigen };

// exp(A) for skew-Hermitian A.  taylor: scaled truncated series with remainder
// below 1e-17; eigen: Hermitian eigensolve of iA (reference).
CMatrix expm_skew(const CMatrix& A, ExpMethod method = ExpMethod::taylor);
// Gaussian element of the skew-Hermitian algebra: diagonal i g / sqrt N,
// off-diagonal (a + i b) / sqrt(2N).
CMatrix gaussian_algebra(int N, std::mt19937_64& rng);
double unitarity_defect(const CMatrix& U);

// Independent stream for sample `index`; the same in serial and parallel runs.
std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index);

// Marginals of one path at ascending times, using stream `index`.
std::vector<CMatrix> sample_unitary_bm(const BmConfig& cfg, const std::vector<double>& times, std::uint64_t index = 0,
                                       ExpMethod method = ExpMethod::taylor);

// Endpoint at time t on the step-delta grid and the coupled 2*delta path driven
// by the merged increments (xi_a + xi_b) / sqrt 2.
struct CoupledEndpoint {
    CMatrix fine, coarse;
};
CoupledEndpoint sample_coupled(int N, double t, double step, std::mt19937_64& rng, ExpMethod method = ExpMethod::taylor);

// Holonomy of a word in the given letter matrices (x_f -> U_f, x_f' -> U_f^*).
CMatrix holonomy(const Word& w, const std::vector<CMatrix>& U);

struct Estimate {
    std::complex<double> value;
    double stderr_re = 0.0, stderr_im = 0.0;
};

// Joint k-statistic of the columns over rows [0, n) minus [skip_lo, skip_hi); order <= 4.
std::complex<double> joint_kstat(const std::vector<std::vector<std::complex<double>>>& cols, std::size_t skip_lo = 0,
                                 std::size_t skip_hi = 0);
// Block jackknife over at most `blocks` contiguous blocks; stat(lo, hi) evaluates
// the statistic with rows [lo, hi) left out (lo == hi: all rows).
using SubsetStat = std::function<std::complex<double>(std::size_t, std::size_t)>;
Estimate jackknife(std::size_t n, const SubsetStat& stat, int blocks = 100);

struct ObservableReport {
    int order = 0;            // number of blocks
    Estimate moment;          // E[prod of block variables], block variable = prod of Tr
    Estimate cumulant;        // k-statistic scaled like evaluate_phi
    Estimate coarse_cumulant; // same on the 2*delta path
    double richardson_bias = 0.0;  // |cumulant - coarse_cumulant|, weak order 1
    double max_unitarity_defect = 0.0;
};

// Letters are independent Brownian motions at times t; each target is evaluated
// on the same samples.
std::vector<ObservableReport> estimate_observables(const BmConfig& cfg, const TimeVector& t,
                                                   const std::vector<PartitionedWord>& targets,
                                                   Exec exec = Exec::Parallel, ExpMethod method = ExpMethod::taylor);

struct FluctuationReport {
    Estimate mean;        // E Tr H
    Estimate variance;    // E|X - EX|^2
    Estimate skewness;    // of Re(X - EX)
    Estimate kurtosis;    // m4 / m2^2 of Re(X - EX)
};
FluctuationReport fluctuations(const BmConfig& cfg, const TimeVector& t, const Word& w, Exec exec = Exec::Parallel);

struct DetReport {
    Estimate det;               // E det H
    double exact = 0.0;         // exp(-1/2 sum t_f n_f^2)
    double coarse_bias = 0.0;   // |E det (delta) - E det (2 delta)|
    double z = 0.0;             // |Re E det - exact| / stderr
    bool pass = false;          // within 3 stderr (or exact when the stderr vanishes)
};
DetReport u1_det_check(const BmConfig& cfg, const TimeVector& t, const Word& w, Exec exec = Exec::Parallel);

// E_V[tr W] by reweighting with exp(N Tr V), ratio estimator with jackknife errors.
Estimate reweighted_expectation(const BmConfig& cfg, const TimeVector& t, const Potential& W, const Potential& V,
                                Exec exec = Exec::Parallel);

}  // namespace mf
