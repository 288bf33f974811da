#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "core/tensor.hpp"

namespace cpkit {

namespace detail {

// A tensor contracted with some factor matrices: row-major data over the
// kept modes plus a trailing rank index once any factor has been folded in.
struct MttkrpPartial {
    std::vector<std::size_t> kept_modes;  // ascending original mode ids
    std::vector<std::uint64_t> kept_dims;
    Eigen::Index rank = 0;  // 0 until the first factor contraction
    std::vector<double> data;
};

}  // namespace detail

// Caches partial tensor-factor contractions across the MTTKRP calls of one
// sweep. Modes 0..N-1 are split into a front half of ceil(N/2) modes and a
// back half; the two cached root partials (tensor contracted with all back
// factors, tensor contracted with all front factors) are each produced by a
// single contraction that touches every tensor entry, so a full sweep needs
// at most two such contractions.
//
// Each cached partial is keyed by the bitmask of modes whose factors have
// been contracted into it, and equals the tensor contracted with the
// Khatri-Rao product of those factor matrices. The caller must report factor
// updates via note_factor_update so stale partials are dropped.
class MttkrpWorkspace {
public:
    MttkrpWorkspace() = default;

    // Invalidate every cached partial that involves this mode's factor.
    void note_factor_update(std::size_t mode);
    void invalidate_all();

    // Contractions that touched all tensor entries since the last reset.
    int full_contractions() const { return full_contractions_; }
    void reset_contraction_counter() { full_contractions_ = 0; }

private:
    friend Matrix mttkrp(const DenseTensor&, const std::vector<Matrix>&,
                         std::size_t, MttkrpWorkspace&);

    // key: contracted-mode bitmask
    std::map<std::uint64_t, detail::MttkrpPartial> cache_;
    int full_contractions_ = 0;
};

// M^(n) = X_(n) * (A^(0) kr ... kr A^(n-1) kr A^(n+1) kr ... kr A^(N-1)),
// computed by contracting the factors into the tensor one mode at a time.
// The uncached overload performs one contraction over all tensor entries per
// call; the workspace overload reuses the dimension-tree partials.
Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors,
              std::size_t mode);
Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors,
              std::size_t mode, MttkrpWorkspace& ws);

}  // namespace cpkit
