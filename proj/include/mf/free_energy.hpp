#pragma once

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "mf/engine.hpp"
#include "mf/word.hpp"

namespace mf {

using Complex = std::complex<double>;

// Finitely supported function on words.  Words are stored in minimal cyclic
// rotation (they only enter through traces); duplicates are merged.
struct Potential {
    std::vector<std::pair<Word, Complex>> terms;

    void add(const Word& w, Complex c);
    double l1() const;
    double linf() const;
    Complex at(const Word& w) const;
    bool empty() const { return terms.empty(); }
};

Potential adjoint(const Potential& V);
bool is_symmetric(const Potential& V, double tol = 0.0);

struct PotentialStats {
    double l1 = 0.0, linf = 0.0, eta = 0.0;
    bool symmetric = false;
};
PotentialStats potential_stats(const Potential& V, const TimeVector& t);

struct Radii {
    double r = 0.0, r_prime = 0.0;  // +inf for V = 0
};
Radii radius_bounds(const Potential& V, const TimeVector& t);

struct FreeEnergySeries {
    std::vector<Complex> c;                  // c[m], m = 0..M (c[0] = 0)
    std::vector<std::vector<Complex>> eps;   // eps[m][g] in series mode
    std::vector<double> coeff_bound;         // a priori bound on |c[m]|
};

// N > 0 finite or +inf.
FreeEnergySeries free_energy_series(const Potential& V, const TimeVector& t, int order, double N);
// eps-expansion of every coefficient up to g_max.
FreeEnergySeries free_energy_series_eps(const Potential& V, const TimeVector& t, int order, int g_max);

struct ExpectationResult {
    Complex value;
    std::vector<Complex> partial;  // partial sums through order 0..M
    double tail_bound = 0.0;
    bool tail_divergent = false;
    bool asymmetric_potential = false;
};
ExpectationResult potential_expectation(const Potential& W, const Potential& V, const TimeVector& t, int order,
                                        double N);

// Closed-form value printed for V = delta_{x1}; reported, never asserted.
double candidate_free_energy(double z, double t);

// Enumerates multisets of size m drawn from n items as multiplicity vectors.
void for_each_multiset(int n, int m, const std::function<void(const std::vector<int>&)>& fn);

}  // namespace mf
