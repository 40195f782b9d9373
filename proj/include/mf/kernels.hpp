#pragma once

#include <vector>

namespace mf {

// Compressed sparse rows.
struct SparseMatrix {
    int n = 0;
    std::vector<int> row_ptr{0};
    std::vector<int> col;
    std::vector<double> val;

    std::size_t nnz() const { return val.size(); }
    // Max absolute row sum.
    double norm_inf() const;
};

struct Triplet {
    int row, col;
    double val;
};

// Sums duplicate (row, col) entries; drops exact zeros.
SparseMatrix from_triplets(int n, std::vector<Triplet> entries);
// a*A + b*B with identical dimension.
SparseMatrix axpby(double a, const SparseMatrix& A, double b, const SparseMatrix& B);
SparseMatrix add_diagonal(const SparseMatrix& A, double d);

// y = A x.  The serial version is the reference; the parallel one splits rows
// across OpenMP threads and gives bit-identical results (each row is summed in order).
void spmv_serial(const SparseMatrix& A, const double* x, double* y);
void spmv_parallel(const SparseMatrix& A, const double* x, double* y);

enum class Exec { Serial, Parallel };
void spmv(Exec ex, const SparseMatrix& A, const double* x, double* y);

// Thread count used by parallel kernels (0 = OpenMP default).
void set_num_threads(int n);
int num_threads();

}  // namespace mf
