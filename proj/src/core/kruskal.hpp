#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/mttkrp.hpp"
#include "core/tensor.hpp"

namespace cpkit {

// CP model: N factor matrices A^(n) of shape s_n x R. The approximated
// tensor is the sum over r of the outer products of the factor columns.
struct KruskalModel {
    std::vector<std::uint64_t> dims;
    Eigen::Index rank = 0;
    std::vector<Matrix> factors;

    std::size_t order() const { return dims.size(); }

    static KruskalModel zeros(std::vector<std::uint64_t> dims, Eigen::Index rank);

    // Throws InvalidArgument on shape mismatches or non-finite entries.
    void validate() const;
};

// Gram matrices S^(n) = A^(n)^T A^(n) and the pairwise Hadamard products
// gamma(n,p) = hadamard over all S^(m) with m not in {n,p} (m != n when
// p == n). The empty product (order 2, p != n) is the all-ones matrix.
// gamma(n,p) and gamma(p,n) are the same matrix, computed once.
struct GammaSet {
    std::vector<Matrix> grams;
    std::vector<std::vector<Matrix>> pairwise;

    const Matrix& gamma(std::size_t n, std::size_t p) const {
        return pairwise[n][p];
    }
};

GammaSet build_gamma_set(const KruskalModel& model);

// Dense evaluation of the model. Guarded by an element-count cap.
DenseTensor reconstruct(const KruskalModel& model,
                        std::uint64_t element_cap = kDefaultElementCap);

// Relative residual r = |X - X~|_F / |X|_F and fitness f = 1 - r, computed
// without forming the dense reconstruction:
//   |X - X~|_F^2 = xnorm2 - 2 <M, A^(N-1)> + sum_rz prod_m S^(m)_rz,
// where M is the last-mode MTTKRP (computed here when not supplied).
// Negative squared norms from roundoff are clamped to zero.
std::pair<double, double> residual_fitness(const KruskalModel& model,
                                           const DenseTensor& x, double xnorm2,
                                           const Matrix* last_mode_mttkrp = nullptr);

// Binary model file format: magic "CPKM1", order, rank and extents as u64
// little-endian, then the factors in mode order, each row-major f64 LE.
void write_model(const KruskalModel& model, const std::string& path);
KruskalModel read_model(const std::string& path);

}  // namespace cpkit
