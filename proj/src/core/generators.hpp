#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "core/kruskal.hpp"

namespace cpkit {

struct UniformFamily {
    double a = 0.0;
    double b = 1.0;
};
struct GaussianFamily {};
struct MatmulFamily {
    std::uint64_t n = 2;
};

using Family = std::variant<UniformFamily, GaussianFamily, MatmulFamily>;

struct ProblemSpec {
    Family family = UniformFamily{};
    std::vector<std::uint64_t> dims;
    Eigen::Index rank = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Factor matrices drawn entrywise from the distribution; entry (i, r) of the
// mode-n factor is a pure function of (seed, n, i*R + r), so generation is
// reproducible regardless of ordering or thread count.
KruskalModel random_model(const std::vector<std::uint64_t>& dims,
                          Eigen::Index rank, std::uint64_t seed,
                          const UniformFamily& dist);
KruskalModel random_model(const std::vector<std::uint64_t>& dims,
                          Eigen::Index rank, std::uint64_t seed,
                          const GaussianFamily& dist);

// Ground-truth model plus its dense reconstruction. Requires a uniform or
// gaussian family.
std::pair<KruskalModel, DenseTensor> random_low_rank(
    const ProblemSpec& spec, std::uint64_t element_cap = kDefaultElementCap);

// Order-3 tensor of extents n^2 whose entries encode bilinear n x n matrix
// multiplication: T[(i,j),(k,l),(m,p)] = 1 iff k=i, l=m, p=j. Pair indices
// are linearized row-major.
DenseTensor matmul_tensor(std::uint64_t n,
                          std::uint64_t element_cap = kDefaultElementCap);

}  // namespace cpkit
