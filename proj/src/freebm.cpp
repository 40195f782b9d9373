#include "mf/freebm.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <boost/numeric/odeint.hpp>

#include "mf/errors.hpp"

namespace mf {

double biane_moment(int n, double t) {
    if (n < 1) throw ValidationError("moment order must be >= 1");
    if (t < 0) throw ValidationError("time must be >= 0");
    if (n * t > 1400.0) return 0.0;
    // e^{-nt/2} sum_{k<n} (-t)^k/k! n^{k-1} C(n, k+1), accumulated in long double with
    // Kahan compensation; the terms alternate in sign.
    long double sum = 0.0L, comp = 0.0L;
    long double tk = 1.0L;                      // (-t)^k / k!
    long double nk = 1.0L / n;                  // n^{k-1}
    long double binom = n;                      // C(n, k+1)
    for (int k = 0; k < n; ++k) {
        long double term = tk * nk * binom;
        long double y = term - comp;
        long double s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        tk *= -static_cast<long double>(t) / (k + 1);
        nk *= n;
        binom = binom * (n - k - 1) / (k + 2);
    }
    return static_cast<double>(std::exp(-0.5L * n * t) * sum);
}

MomentTable moment_recursion(int n_max, double t, double rel_tol) {
    if (n_max < 1) throw ValidationError("n_max must be >= 1");
    if (t < 0) throw ValidationError("time must be >= 0");
    using State = std::vector<double>;
    State mu(n_max, 1.0);
    auto rhs = [n_max](const State& m, State& dm, double) {
        for (int n = 1; n <= n_max; ++n) {
            double conv = 0.0;
            for (int k = 1; k < n; ++k) conv += m[k - 1] * m[n - k - 1];
            dm[n - 1] = -0.5 * n * m[n - 1] - 0.5 * n * conv;
        }
    };
    namespace ode = boost::numeric::odeint;
    if (t > 0) {
        auto stepper = ode::make_controlled(rel_tol, rel_tol, ode::runge_kutta_dopri5<State>());
        ode::integrate_adaptive(stepper, rhs, mu, 0.0, t, std::min(1e-3, t));
    }
    for (double v : mu)
        if (!std::isfinite(v)) throw NumericError("moment recursion produced a non-finite value");
    return MomentTable{t, mu};
}

const std::vector<std::vector<int>>& set_partitions(int k) {
    static std::mutex mtx;
    static std::map<int, std::vector<std::vector<int>>> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    std::vector<std::vector<int>> out;
    if (k == 0) {
        out.push_back({});
    } else {
        std::vector<int> a(k, 0), mx(k, 0);
        while (true) {
            out.push_back(a);
            int i = k - 1;
            while (i > 0 && a[i] == mx[i - 1] + 1) --i;
            if (i == 0) break;
            ++a[i];
            mx[i] = std::max(mx[i - 1], a[i]);
            for (int j = i + 1; j < k; ++j) {
                a[j] = 0;
                mx[j] = mx[i];
            }
        }
    }
    return cache.emplace(k, std::move(out)).first->second;
}

double moebius_weight(const std::vector<int>& labels) {
    int b = 0;
    for (int l : labels) b = std::max(b, l + 1);
    double f = 1.0;
    for (int i = 2; i < b; ++i) f *= i;
    return (b % 2 == 1) ? f : -f;
}

double u1_moment(const std::vector<Word>& words, const TimeVector& t) {
    int q = static_cast<int>(t.size());
    std::vector<int> n(q, 0);
    for (const auto& w : words) {
        auto c = signed_counts(w, q);
        for (int f = 0; f < q; ++f) n[f] += c[f];
    }
    return std::exp(-0.5 * inner(n, n, t));
}

double u1_cumulant(const PartitionedWord& target, const TimeVector& t) {
    int q = static_cast<int>(t.size());
    int k = target.num_blocks();
    if (k > 10) throw ResourceError("too many blocks for partition-lattice inversion");
    std::vector<std::vector<int>> nb(k, std::vector<int>(q, 0));
    for (std::size_t i = 0; i < target.words.size(); ++i) {
        auto c = signed_counts(target.words[i], q);
        for (int f = 0; f < q; ++f) nb[target.block[i]][f] += c[f];
    }
    double total = 0.0;
    for (const auto& pi : set_partitions(k)) {
        int nblocks = 0;
        for (int l : pi) nblocks = std::max(nblocks, l + 1);
        double prod = 1.0;
        for (int c = 0; c < nblocks; ++c) {
            std::vector<int> n(q, 0);
            for (int b = 0; b < k; ++b)
                if (pi[b] == c)
                    for (int f = 0; f < q; ++f) n[f] += nb[b][f];
            prod *= std::exp(-0.5 * inner(n, n, t));
        }
        total += moebius_weight(pi) * prod;
    }
    return total;
}

std::pair<double, double> spectral_edges(double t) {
    if (t < 0) throw ValidationError("time must be >= 0");
    double r = std::sqrt(t * (t + 1.0));
    double lo = (2 * t + 1 - 2 * r) * std::exp(-r - 0.5 * t);
    double hi = (2 * t + 1 + 2 * r) * std::exp(r - 0.5 * t);
    return {lo, hi};
}

double lambda_weight(const Word& w, const TimeVector& t) {
    auto nbar = unsigned_counts(w, static_cast<int>(t.size()));
    double v = 1.0;
    for (std::size_t f = 0; f < nbar.size(); ++f)
        if (nbar[f]) v *= std::pow(spectral_edges(t[f]).second, nbar[f]);
    return v;
}

}  // namespace mf
