#include "mf/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/random/normal_distribution.hpp>

#include "mf/errors.hpp"

namespace mf {

namespace {

using cd = std::complex<double>;
using Column = std::vector<cd>;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

template <class F>
void for_samples(long long n, Exec exec, F&& f) {
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) f(i);
    } else {
        for (long long i = 0; i < n; ++i) f(i);
    }
}


template <class M>
M gaussian_t(int N, std::mt19937_64& rng) {
    boost::random::normal_distribution<double> g;
    M X(N, N);
    const double sd = 1.0 / std::sqrt(static_cast<double>(N));
    const double so = 1.0 / std::sqrt(2.0 * N);
    for (int i = 0; i < N; ++i) {
        X(i, i) = cd(0.0, g(rng) * sd);
        for (int j = i + 1; j < N; ++j) {
            double a = g(rng), b = g(rng);
            cd z(a * so, b * so);
            X(i, j) = z;
            X(j, i) = -std::conj(z);
        }
    }
    return X;
}

template <class M>
M expm_t(const M& A, ExpMethod method) {
    const auto n = A.rows();
    if (method == ExpMethod::eigen) {
        M H = cd(0, 1) * A;
        H = (H + H.adjoint()).eval() * 0.5;
        Eigen::SelfAdjointEigenSolver<M> es(H);
        Eigen::Matrix<cd, Eigen::Dynamic, 1, 0, M::MaxRowsAtCompileTime, 1> d(n);
        for (Eigen::Index k = 0; k < n; ++k) d(k) = std::exp(cd(0, -es.eigenvalues()(k)));
        return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
    }
    double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    int K = 1;
    double term = norm;
    while (term * norm / (K + 1) > 1e-17 && K < 30) {
        ++K;
        term *= norm / K;
    }
    M B = A * std::ldexp(1.0, -squarings);
    M R = M::Identity(n, n);
    for (int k = K; k >= 1; --k) {
        R = (B * R).eval() / static_cast<double>(k);
        R.diagonal().array() += 1.0;
    }
    for (int s = 0; s < squarings; ++s) R = (R * R).eval();
    return R;
}

template <class M>
void endpoint_t(int N, double t, double step, std::mt19937_64& rng, ExpMethod method, M& fine, M* coarse) {
    fine = M::Identity(N, N);
    if (coarse) *coarse = M::Identity(N, N);
    if (t <= 0) return;
    long long pairs = static_cast<long long>(std::ceil(t / (2 * step) - 1e-12));
    pairs = std::max<long long>(pairs, 1);
    double sh = std::sqrt(t / (2.0 * pairs));
    for (long long k = 0; k < pairs; ++k) {
        M xa = gaussian_t<M>(N, rng);
        M xb = gaussian_t<M>(N, rng);
        fine = (fine * expm_t<M>(sh * xa, method)).eval();
        fine = (fine * expm_t<M>(sh * xb, method)).eval();
        if (coarse) *coarse = (*coarse * expm_t<M>(sh * (xa + xb), method)).eval();
    }
}

// Fine endpoint, optionally with the coupled coarse one.
void endpoint(int N, double t, double step, std::mt19937_64& rng, ExpMethod method, CMatrix& fine, CMatrix* coarse) {
    // Fixed-size kernels for small N; the step loop is the hot path.
    auto run = [&]<class M>() {
        M f, c;
        endpoint_t<M>(N, t, step, rng, method, f, coarse ? &c : nullptr);
        fine = f;
        if (coarse) *coarse = c;
    };
    switch (N) {
        case 1: run.template operator()<Eigen::Matrix<cd, 1, 1>>(); break;
        case 2: run.template operator()<Eigen::Matrix2cd>(); break;
        case 3: run.template operator()<Eigen::Matrix3cd>(); break;
        case 4: run.template operator()<Eigen::Matrix4cd>(); break;
        case 8: run.template operator()<Eigen::Matrix<cd, 8, 8>>(); break;
        default: endpoint_t<CMatrix>(N, t, step, rng, method, fine, coarse);
    }
}

int max_letter(const std::vector<PartitionedWord>& targets) {
    int q = 0;
    for (const auto& pw : targets)
        for (const auto& w : pw.words) q = std::max(q, max_generator(w));
    return q;
}

double weight_of(const PartitionedWord& pw, int N) {
    return std::pow(static_cast<double>(N), 2.0 * (pw.num_blocks() - 1) - static_cast<double>(pw.size()));
}

Estimate scaled(Estimate e, double s) {
    e.value *= s;
    e.stderr_re *= std::abs(s);
    e.stderr_im *= std::abs(s);
    return e;
}

// Mean of a column with rows [lo, hi) left out.
cd mean_skip(const Column& x, std::size_t lo, std::size_t hi) {
    cd s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i >= lo && i < hi) continue;
        s += x[i];
        ++n;
    }
    return s / static_cast<double>(n);
}

}  // namespace

void validate(const BmConfig& cfg) {
    if (cfg.N < 1) throw ValidationError("N must be >= 1");
    if (!(cfg.step > 0) || !std::isfinite(cfg.step)) throw ValidationError("step must be positive");
    if (cfg.samples < 2) throw ValidationError("need at least 2 samples");
}

double default_step(const TimeVector& t) {
    double tmax = 0.0;
    for (double x : t) tmax = std::max(tmax, x);
    return 1e-3 * std::min(1.0, tmax > 0 ? 1.0 / tmax : 1.0);
}

CMatrix expm_skew(const CMatrix& A, ExpMethod method) { return expm_t<CMatrix>(A, method); }

CMatrix gaussian_algebra(int N, std::mt19937_64& rng) { return gaussian_t<CMatrix>(N, rng); }

double unitarity_defect(const CMatrix& U) {
    return (U.adjoint() * U - CMatrix::Identity(U.rows(), U.cols())).cwiseAbs().maxCoeff();
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ull)));
}

std::vector<CMatrix> sample_unitary_bm(const BmConfig& cfg, const std::vector<double>& times, std::uint64_t index,
                                       ExpMethod method) {
    validate(cfg);
    auto rng = sample_rng(cfg.seed, index);
    std::vector<CMatrix> out;
    CMatrix U = CMatrix::Identity(cfg.N, cfg.N);
    double cur = 0.0;
    for (double tau : times) {
        if (!(tau >= cur)) throw ValidationError("times must be ascending and nonnegative");
        double dt = tau - cur;
        if (dt > 0) {
            long long n = std::max<long long>(1, static_cast<long long>(std::ceil(dt / cfg.step - 1e-12)));
            double sh = std::sqrt(dt / n);
            for (long long k = 0; k < n; ++k) U = (U * expm_skew(sh * gaussian_algebra(cfg.N, rng), method)).eval();
        }
        out.push_back(U);
        cur = tau;
    }
    return out;
}

CoupledEndpoint sample_coupled(int N, double t, double step, std::mt19937_64& rng, ExpMethod method) {
    CoupledEndpoint e;
    endpoint(N, t, step, rng, method, e.fine, &e.coarse);
    return e;
}

CMatrix holonomy(const Word& w, const std::vector<CMatrix>& U) {
    const auto n = U.at(0).rows();
    CMatrix H = CMatrix::Identity(n, n);
    for (Letter a : w) {
        const CMatrix& M = U.at(generator(a) - 1);
        if (a > 0) H = H * M;
        else H = H * M.adjoint();
    }
    return H;
}

cd joint_kstat(const std::vector<Column>& cols, std::size_t lo, std::size_t hi) {
    const std::size_t m = cols.size();
    if (m == 0 || m > 4) throw ValidationError("cumulant order must be between 1 and 4");
    std::vector<cd> mu(m);
    for (std::size_t a = 0; a < m; ++a) mu[a] = mean_skip(cols[a], lo, hi);
    if (m == 1) return mu[0];
    const std::size_t total = cols[0].size();
    const double n = static_cast<double>(total - (hi - lo));
    cd s_all = 0.0;
    cd s2[4][4] = {};
    std::vector<cd> d(m);
    for (std::size_t i = 0; i < total; ++i) {
        if (i >= lo && i < hi) continue;
        cd p = 1.0;
        for (std::size_t a = 0; a < m; ++a) {
            d[a] = cols[a][i] - mu[a];
            p *= d[a];
        }
        s_all += p;
        if (m == 4)
            for (std::size_t a = 0; a < 4; ++a)
                for (std::size_t b = a + 1; b < 4; ++b) s2[a][b] += d[a] * d[b];
    }
    if (m == 2) return s_all / (n - 1);
    if (m == 3) return n * s_all / ((n - 1) * (n - 2));
    cd pairs = s2[0][1] * s2[2][3] + s2[0][2] * s2[1][3] + s2[0][3] * s2[1][2];
    return n * ((n + 1) * s_all - (n - 1) / n * pairs) / ((n - 1) * (n - 2) * (n - 3));
}

Estimate jackknife(std::size_t n, const SubsetStat& stat, int blocks) {
    Estimate e;
    e.value = stat(0, 0);
    std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(std::max(blocks, 2)), n);
    std::vector<cd> theta(B);
    cd mean = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        theta[b] = stat(b * n / B, (b + 1) * n / B);
        mean += theta[b];
    }
    mean /= static_cast<double>(B);
    double vr = 0.0, vi = 0.0;
    for (const cd& x : theta) {
        vr += std::pow(x.real() - mean.real(), 2);
        vi += std::pow(x.imag() - mean.imag(), 2);
    }
    double f = (static_cast<double>(B) - 1.0) / static_cast<double>(B);
    e.stderr_re = std::sqrt(f * vr);
    e.stderr_im = std::sqrt(f * vi);
    return e;
}

std::vector<ObservableReport> estimate_observables(const BmConfig& cfg, const TimeVector& t,
                                                   const std::vector<PartitionedWord>& targets, Exec exec,
                                                   ExpMethod method) {
    validate(cfg);
    if (max_letter(targets) > static_cast<int>(t.size())) throw ValidationError("word uses a letter without a time");
    for (const auto& pw : targets)
        if (pw.num_blocks() > 4) throw ValidationError("cumulant order must be at most 4");
    const std::size_t n = static_cast<std::size_t>(cfg.samples);
    // fine[k][b][i], coarse[k][b][i]
    std::vector<std::vector<Column>> fine(targets.size()), coarse(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
        fine[k].assign(targets[k].num_blocks(), Column(n));
        coarse[k].assign(targets[k].num_blocks(), Column(n));
    }
    std::vector<double> defect(n, 0.0);
    for_samples(cfg.samples, exec, [&](long long i) {
        auto rng = sample_rng(cfg.seed, static_cast<std::uint64_t>(i));
        std::vector<CMatrix> Uf(t.size()), Uc(t.size());
        double worst = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) {
            endpoint(cfg.N, t[j], cfg.step, rng, method, Uf[j], &Uc[j]);
            worst = std::max({worst, unitarity_defect(Uf[j]), unitarity_defect(Uc[j])});
        }
        defect[i] = worst;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const auto& pw = targets[k];
            for (int b = 0; b < pw.num_blocks(); ++b) {
                fine[k][b][i] = 1.0;
                coarse[k][b][i] = 1.0;
            }
            for (std::size_t w = 0; w < pw.size(); ++w) {
                fine[k][pw.block[w]][i] *= holonomy(pw.words[w], Uf).trace();
                coarse[k][pw.block[w]][i] *= holonomy(pw.words[w], Uc).trace();
            }
        }
    });
    double max_defect = *std::max_element(defect.begin(), defect.end());
    if (max_defect > 1e-12) throw NumericError("sampled matrix is not unitary to 1e-12");
    std::vector<ObservableReport> out;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        ObservableReport r;
        r.order = targets[k].num_blocks();
        r.max_unitarity_defect = max_defect;
        const auto& F = fine[k];
        r.moment = jackknife(n, [&](std::size_t lo, std::size_t hi) {
            cd s = 0.0;
            std::size_t c = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i >= lo && i < hi) continue;
                cd p = 1.0;
                for (const auto& col : F) p *= col[i];
                s += p;
                ++c;
            }
            return s / static_cast<double>(c);
        });
        double w = weight_of(targets[k], cfg.N);
        r.cumulant = scaled(jackknife(n, [&](std::size_t lo, std::size_t hi) { return joint_kstat(F, lo, hi); }), w);
        r.coarse_cumulant =
            scaled(jackknife(n, [&](std::size_t lo, std::size_t hi) { return joint_kstat(coarse[k], lo, hi); }), w);
        r.richardson_bias = std::abs(r.cumulant.value - r.coarse_cumulant.value);
        out.push_back(r);
    }
    return out;
}

FluctuationReport fluctuations(const BmConfig& cfg, const TimeVector& t, const Word& w, Exec exec) {
    validate(cfg);
    if (max_generator(w) > static_cast<int>(t.size())) throw ValidationError("word uses a letter without a time");
    const std::size_t n = static_cast<std::size_t>(cfg.samples);
    Column X(n);
    for_samples(cfg.samples, exec, [&](long long i) {
        auto rng = sample_rng(cfg.seed, static_cast<std::uint64_t>(i));
        std::vector<CMatrix> U(t.size());
        for (std::size_t j = 0; j < t.size(); ++j) endpoint(cfg.N, t[j], cfg.step, rng, ExpMethod::taylor, U[j], nullptr);
        X[i] = holonomy(w, U).trace();
    });
    auto central = [&](std::size_t lo, std::size_t hi, int p) {
        cd mu = mean_skip(X, lo, hi);
        double s = 0.0;
        std::size_t c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= lo && i < hi) continue;
            s += std::pow((X[i] - mu).real(), p);
            ++c;
        }
        return s / static_cast<double>(c);
    };
    FluctuationReport r;
    r.mean = jackknife(n, [&](std::size_t lo, std::size_t hi) { return mean_skip(X, lo, hi); });
    r.variance = jackknife(n, [&](std::size_t lo, std::size_t hi) {
        cd mu = mean_skip(X, lo, hi);
        double s = 0.0;
        std::size_t c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= lo && i < hi) continue;
            s += std::norm(X[i] - mu);
            ++c;
        }
        return cd(s / static_cast<double>(c - 1), 0.0);
    });
    r.skewness = jackknife(n, [&](std::size_t lo, std::size_t hi) {
        return cd(central(lo, hi, 3) / std::pow(central(lo, hi, 2), 1.5), 0.0);
    });
    r.kurtosis = jackknife(n, [&](std::size_t lo, std::size_t hi) {
        double m2 = central(lo, hi, 2);
        return cd(central(lo, hi, 4) / (m2 * m2), 0.0);
    });
    return r;
}

DetReport u1_det_check(const BmConfig& cfg, const TimeVector& t, const Word& w, Exec exec) {
    validate(cfg);
    const int q = static_cast<int>(t.size());
    if (max_generator(w) > q) throw ValidationError("word uses a letter without a time");
    const std::size_t n = static_cast<std::size_t>(cfg.samples);
    auto counts = signed_counts(w, q);
    Column fine(n), coarse(n);
    for_samples(cfg.samples, exec, [&](long long i) {
        auto rng = sample_rng(cfg.seed, static_cast<std::uint64_t>(i));
        cd df = 1.0, dc = 1.0;
        for (int j = 0; j < q; ++j) {
            CMatrix Uf, Uc;
            endpoint(cfg.N, t[j], cfg.step, rng, ExpMethod::taylor, Uf, &Uc);
            df *= std::pow(Uf.determinant(), counts[j]);
            dc *= std::pow(Uc.determinant(), counts[j]);
        }
        fine[i] = df;
        coarse[i] = dc;
    });
    DetReport r;
    r.det = jackknife(n, [&](std::size_t lo, std::size_t hi) { return mean_skip(fine, lo, hi); });
    double quad = 0.0;
    for (int j = 0; j < q; ++j) quad += t[j] * counts[j] * counts[j];
    r.exact = std::exp(-0.5 * quad);
    r.coarse_bias = std::abs(r.det.value - mean_skip(coarse, 0, 0));
    double dev = std::abs(r.det.value.real() - r.exact);
    if (r.det.stderr_re > 0) {
        r.z = dev / r.det.stderr_re;
        r.pass = r.z <= 3.0;
    } else {
        r.pass = dev <= 1e-12;
    }
    return r;
}

Estimate reweighted_expectation(const BmConfig& cfg, const TimeVector& t, const Potential& W, const Potential& V,
                                Exec exec) {
    validate(cfg);
    const int q = static_cast<int>(t.size());
    for (const auto* P : {&W, &V})
        for (const auto& [w, c] : P->terms)
            if (max_generator(w) > q) throw ValidationError("potential uses a letter without a time");
    const std::size_t n = static_cast<std::size_t>(cfg.samples);
    Column num(n), den(n);
    const double N = cfg.N;
    for_samples(cfg.samples, exec, [&](long long i) {
        auto rng = sample_rng(cfg.seed, static_cast<std::uint64_t>(i));
        std::vector<CMatrix> U(q);
        for (int j = 0; j < q; ++j) endpoint(cfg.N, t[j], cfg.step, rng, ExpMethod::taylor, U[j], nullptr);
        cd trW = 0.0, trV = 0.0;
        for (const auto& [w, c] : W.terms) trW += c * holonomy(w, U).trace() / N;
        for (const auto& [w, c] : V.terms) trV += c * holonomy(w, U).trace();
        cd weight = std::exp(N * trV);
        num[i] = trW * weight;
        den[i] = weight;
    });
    auto e = jackknife(n, [&](std::size_t lo, std::size_t hi) { return mean_skip(num, lo, hi) / mean_skip(den, lo, hi); });
    if (!std::isfinite(e.value.real()) || !std::isfinite(e.value.imag())) throw NumericError("reweighting overflowed");
    return e;
}

}  // namespace mf
