#include "mf/free_energy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "mf/errors.hpp"
#include "mf/freebm.hpp"

namespace mf {

void Potential::add(const Word& w, Complex c) {
    Word r = min_rotation(w);
    for (auto& [u, v] : terms)
        if (u == r) {
            v += c;
            return;
        }
    terms.emplace_back(std::move(r), c);
}

double Potential::l1() const {
    double s = 0.0;
    for (const auto& [w, c] : terms) s += std::abs(c);
    return s;
}

double Potential::linf() const {
    double s = 0.0;
    for (const auto& [w, c] : terms) s = std::max(s, std::abs(c));
    return s;
}

Complex Potential::at(const Word& w) const {
    Word r = min_rotation(w);
    for (const auto& [u, v] : terms)
        if (u == r) return v;
    return {0.0, 0.0};
}

Potential adjoint(const Potential& V) {
    Potential A;
    for (const auto& [w, c] : V.terms) A.add(inverse(w), std::conj(c));
    return A;
}

bool is_symmetric(const Potential& V, double tol) {
    Potential A = adjoint(V);
    for (const auto& [w, c] : V.terms)
        if (std::abs(A.at(w) - c) > tol) return false;
    for (const auto& [w, c] : A.terms)
        if (std::abs(V.at(w) - c) > tol) return false;
    return true;
}

namespace {

int max_gen(const Potential& V) {
    int q = 0;
    for (const auto& [w, c] : V.terms) q = std::max(q, max_generator(w));
    return q;
}

void check_dims(const Potential& V, const TimeVector& t) {
    if (max_gen(V) > static_cast<int>(t.size())) throw ValidationError("potential uses a generator beyond the time vector");
}

double max_inner_unsigned(const std::vector<Word>& ws, const TimeVector& t) {
    int q = static_cast<int>(t.size());
    double m = 0.0;
    for (const auto& a : ws)
        for (const auto& b : ws) m = std::max(m, inner(unsigned_counts(a, q), unsigned_counts(b, q), t));
    return m;
}

std::vector<Word> support(const Potential& V) {
    std::vector<Word> s;
    for (const auto& [w, c] : V.terms)
        if (c != Complex(0.0, 0.0)) s.push_back(w);
    return s;
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

void for_each_multiset(int n, int m, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> mult(n, 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == n - 1) {
            mult[i] = left;
            fn(mult);
            mult[i] = 0;
            return;
        }
        for (int k = left; k >= 0; --k) {
            mult[i] = k;
            rec(i + 1, left - k);
        }
        mult[i] = 0;
    };
    if (n == 0) {
        if (m == 0) fn(mult);
        return;
    }
    rec(0, m);
}

PotentialStats potential_stats(const Potential& V, const TimeVector& t) {
    check_dims(V, t);
    PotentialStats s;
    s.l1 = V.l1();
    s.linf = V.linf();
    s.symmetric = is_symmetric(V);
    int q = static_cast<int>(t.size());
    double sup = 0.0, lam = 0.0;
    for (const auto& [w, c] : V.terms) {
        if (c == Complex(0.0, 0.0)) continue;
        auto nb = unsigned_counts(w, q);
        sup = std::max(sup, inner(nb, nb, t));
        lam += lambda_weight(w, t) * std::abs(c);
    }
    s.eta = sup * lam;
    return s;
}

Radii radius_bounds(const Potential& V, const TimeVector& t) {
    check_dims(V, t);
    Radii r;
    double inf = std::numeric_limits<double>::infinity();
    double a = max_inner_unsigned(support(V), t) * std::exp(1.0) * V.l1();
    r.r = a > 0 ? 1.0 / a : inf;
    double b = 2.0 * std::exp(1.0) * potential_stats(V, t).eta;
    r.r_prime = b > 0 ? 1.0 / b : inf;
    return r;
}

namespace {

// Sums prod V(w_i)/prod mult_i! * phi([(prefix, w_1..w_m), 0]) over multisets.
template <class Eval>
void accumulate_order(const Potential& V, int m, const std::vector<Word>& prefix, Eval&& eval) {
    std::vector<Word> sup;
    std::vector<Complex> coef;
    for (const auto& [w, c] : V.terms)
        if (c != Complex(0.0, 0.0)) {
            sup.push_back(w);
            coef.push_back(c);
        }
    int n = static_cast<int>(sup.size());
    for_each_multiset(n, m, [&](const std::vector<int>& mult) {
        std::vector<Word> words = prefix;
        Complex weight(1.0, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < mult[i]; ++k) words.push_back(sup[i]);
            weight *= std::pow(coef[i], mult[i]) / factorial(mult[i]);
        }
        eval(singletons(std::move(words)), weight);
    });
}

std::vector<double> coefficient_bounds(const Potential& V, const TimeVector& t, int order) {
    double c = max_inner_unsigned(support(V), t), l1 = V.l1();
    std::vector<double> b(order + 1, 0.0);
    for (int m = 1; m <= order; ++m)
        b[m] = std::pow(c, m - 1) * std::pow(double(m), m - 2) / factorial(m) * std::pow(l1, m);
    return b;
}

}  // namespace

FreeEnergySeries free_energy_series(const Potential& V, const TimeVector& t, int order, double N) {
    check_dims(V, t);
    if (order < 1) throw ValidationError("order must be >= 1");
    FreeEnergySeries out;
    out.c.assign(order + 1, Complex(0.0, 0.0));
    for (int m = 1; m <= order; ++m)
        accumulate_order(V, m, {}, [&](const PartitionedWord& pw, Complex w) { out.c[m] += w * evaluate_phi(pw, t, N); });
    out.coeff_bound = coefficient_bounds(V, t, order);
    return out;
}

FreeEnergySeries free_energy_series_eps(const Potential& V, const TimeVector& t, int order, int g_max) {
    check_dims(V, t);
    if (order < 1) throw ValidationError("order must be >= 1");
    FreeEnergySeries out;
    out.c.assign(order + 1, Complex(0.0, 0.0));
    out.eps.assign(order + 1, std::vector<Complex>(g_max + 1, Complex(0.0, 0.0)));
    for (int m = 1; m <= order; ++m)
        accumulate_order(V, m, {}, [&](const PartitionedWord& pw, Complex w) {
            auto s = evaluate_phi_series(pw, t, g_max);
            for (int g = 0; g <= g_max; ++g) out.eps[m][g] += w * s.c[g];
        });
    for (int m = 1; m <= order; ++m) out.c[m] = out.eps[m][0];
    out.coeff_bound = coefficient_bounds(V, t, order);
    return out;
}

ExpectationResult potential_expectation(const Potential& W, const Potential& V, const TimeVector& t, int order,
                                        double N) {
    check_dims(W, t);
    check_dims(V, t);
    if (order < 0) throw ValidationError("order must be >= 0");
    ExpectationResult r;
    r.asymmetric_potential = !is_symmetric(V, 1e-14);
    Complex acc(0.0, 0.0);
    for (int m = 0; m <= order; ++m) {
        for (const auto& [a, wa] : W.terms) {
            if (wa == Complex(0.0, 0.0)) continue;
            accumulate_order(V, m, {a}, [&](const PartitionedWord& pw, Complex w) {
                acc += wa * w * evaluate_phi(pw, t, N);
            });
        }
        r.partial.push_back(acc);
    }
    r.value = acc;

    // Tail: sum_{m>M} |W|_1 |V|_1^m c^m (m+1)^{m-1} / m!, with c the largest <nbar, nbar>.
    std::vector<Word> all = support(V);
    for (const auto& w : support(W)) all.push_back(w);
    double c = max_inner_unsigned(all, t), l1w = W.l1(), l1v = V.l1();
    double x = c * l1v;
    if (x == 0.0) {
        r.tail_bound = 0.0;
    } else if (x * std::exp(1.0) >= 1.0) {
        r.tail_divergent = true;
        r.tail_bound = std::numeric_limits<double>::infinity();
    } else {
        double tail = 0.0;
        for (int m = order + 1; m < order + 2000; ++m) {
            double lt = std::log(l1w) + m * std::log(x) + (m - 1) * std::log(m + 1.0) - std::lgamma(m + 1.0);
            double term = std::exp(lt);
            tail += term;
            if (term < 1e-18 * std::max(tail, 1e-300)) break;
        }
        r.tail_bound = tail;
    }
    return r;
}

double candidate_free_energy(double z, double t) {
    if (t == 0.0) return z;
    return std::expm1(z * t) * std::exp(-0.5 * t) / t;
}

}  // namespace mf
