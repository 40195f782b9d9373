#pragma once

// Independent reference implementations used only by tests.

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "mf/word.hpp"

namespace oracle {

// Joint cumulant of block variables X_b = exp(i W(n_b)) under white noise, computed
// with the recursion M(A) = sum_{S subset A, min A in S} C(S) M(A \ S), which does not
// touch the partition lattice.
inline double u1_cumulant(const mf::PartitionedWord& pw, const mf::TimeVector& t) {
    int k = pw.num_blocks();
    int q = static_cast<int>(t.size());
    std::vector<std::vector<long>> nb(k, std::vector<long>(q, 0));
    for (std::size_t i = 0; i < pw.words.size(); ++i)
        for (mf::Letter a : pw.words[i]) nb[pw.block[i]][mf::generator(a) - 1] += mf::sign(a);
    auto moment = [&](unsigned mask) {
        double e = 0.0;
        for (int f = 0; f < q; ++f) {
            long s = 0;
            for (int b = 0; b < k; ++b)
                if (mask >> b & 1u) s += nb[b][f];
            e += double(s) * double(s) * t[f];
        }
        return std::exp(-0.5 * e);
    };
    std::map<unsigned, double> C;
    unsigned full = (1u << k) - 1;
    for (unsigned A = 1; A <= full; ++A) {
        unsigned low = A & (~A + 1);
        double c = moment(A);
        unsigned rest = A ^ low;
        // Proper subsets S of A containing low: S = low | T, T strict subset of rest.
        for (unsigned T = rest;; T = (T - 1) & rest) {
            unsigned S = low | T;
            if (S != A) c -= C[S] * moment(A ^ S);
            if (T == 0) break;
        }
        C[A] = c;
    }
    return C[full];
}

inline mf::PartitionedWord random_partial(std::mt19937_64& rng, int max_total, int q) {
    std::uniform_int_distribution<int> total(1, max_total), gen(1, q), coin(0, 1);
    int L = total(rng);
    int m = std::uniform_int_distribution<int>(1, std::min(L, 4))(rng);
    mf::PartitionedWord pw;
    pw.words.assign(m, {});
    for (int i = 0; i < L; ++i) {
        int k = i < m ? i : std::uniform_int_distribution<int>(0, m - 1)(rng);
        pw.words[k].push_back(gen(rng) * (coin(rng) ? 1 : -1));
    }
    for (int k = 0; k < m; ++k) pw.block.push_back(std::uniform_int_distribution<int>(0, k)(rng));
    mf::normalize_blocks(pw);
    return pw;
}

// Closed form of E[tr U_t^2] for the U(N) Brownian motion, solved by hand from the
// two-state system {(x1 x1)}, {(x1, x1) one block}.
inline double tr_u2(double t, double N) {
    return std::exp(-t) * (std::cosh(t / N) - N * std::sinh(t / N));
}

}  // namespace oracle
