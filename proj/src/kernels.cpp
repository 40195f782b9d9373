#include "mf/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mf {

double SparseMatrix::norm_inf() const {
    double m = 0.0;
    for (int r = 0; r < n; ++r) {
        double s = 0.0;
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += std::abs(val[k]);
        m = std::max(m, s);
    }
    return m;
}

SparseMatrix from_triplets(int n, std::vector<Triplet> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    SparseMatrix A;
    A.n = n;
    A.row_ptr.assign(n + 1, 0);
    std::size_t k = 0;
    for (int r = 0; r < n; ++r) {
        while (k < entries.size() && entries[k].row == r) {
            int c = entries[k].col;
            double v = 0.0;
            while (k < entries.size() && entries[k].row == r && entries[k].col == c) v += entries[k++].val;
            if (v != 0.0) {
                A.col.push_back(c);
                A.val.push_back(v);
            }
        }
        A.row_ptr[r + 1] = static_cast<int>(A.val.size());
    }
    return A;
}

SparseMatrix axpby(double a, const SparseMatrix& A, double b, const SparseMatrix& B) {
    SparseMatrix C;
    C.n = A.n;
    C.row_ptr.assign(A.n + 1, 0);
    for (int r = 0; r < A.n; ++r) {
        int i = A.row_ptr[r], ie = A.row_ptr[r + 1];
        int j = B.row_ptr[r], je = B.row_ptr[r + 1];
        while (i < ie || j < je) {
            int c;
            double v;
            if (j >= je || (i < ie && A.col[i] < B.col[j])) {
                c = A.col[i];
                v = a * A.val[i++];
            } else if (i >= ie || B.col[j] < A.col[i]) {
                c = B.col[j];
                v = b * B.val[j++];
            } else {
                c = A.col[i];
                v = a * A.val[i++] + b * B.val[j++];
            }
            if (v != 0.0) {
                C.col.push_back(c);
                C.val.push_back(v);
            }
        }
        C.row_ptr[r + 1] = static_cast<int>(C.val.size());
    }
    return C;
}

SparseMatrix add_diagonal(const SparseMatrix& A, double d) {
    SparseMatrix I;
    I.n = A.n;
    I.row_ptr.resize(A.n + 1);
    for (int r = 0; r <= A.n; ++r) I.row_ptr[r] = r;
    I.col.resize(A.n);
    for (int r = 0; r < A.n; ++r) I.col[r] = r;
    I.val.assign(A.n, 1.0);
    return axpby(1.0, A, d, I);
}

void spmv_serial(const SparseMatrix& A, const double* x, double* y) {
    for (int r = 0; r < A.n; ++r) {
        double s = 0.0;
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) s += A.val[k] * x[A.col[k]];
        y[r] = s;
    }
}

namespace {
int g_threads = 0;
}

void set_num_threads(int n) { g_threads = n; }

int num_threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void spmv_parallel(const SparseMatrix& A, const double* x, double* y) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(num_threads())
#endif
    for (int r = 0; r < A.n; ++r) {
        double s = 0.0;
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) s += A.val[k] * x[A.col[k]];
        y[r] = s;
    }
}

void spmv(Exec ex, const SparseMatrix& A, const double* x, double* y) {
    // Small systems are not worth a parallel region.
    if (ex == Exec::Parallel && A.n >= 4096) spmv_parallel(A, x, y);
    else spmv_serial(A, x, y);
}

}  // namespace mf
