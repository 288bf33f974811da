#include "core/mttkrp.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace cpkit {

namespace {

using Partial = detail::MttkrpPartial;
using MapMat = Eigen::Map<Matrix>;
using MapConst = Eigen::Map<const Matrix>;

std::uint64_t dim_product(const std::vector<std::uint64_t>& dims,
                          std::size_t lo, std::size_t hi) {
    std::uint64_t p = 1;
    for (std::size_t m = lo; m < hi; ++m) p *= dims[m];
    return p;
}

// Contract away kept mode `mode_id` against factor A, matching the rank
// index elementwise when the partial already carries one.
//
// Without a rank index (the raw tensor), slice o of the flat data is an
// (s_m x inner) block and the result block is X_o^T A; this is the step
// whose cost is proportional to the full tensor size. With a rank index,
// each (o, i_m) slab contributes its rows scaled by A(i_m, :) elementwise.
Partial contract_mode(const Partial& p, std::size_t mode_id, const Matrix& a) {
    const auto pos = static_cast<std::size_t>(
        std::find(p.kept_modes.begin(), p.kept_modes.end(), mode_id) -
        p.kept_modes.begin());
    const std::uint64_t outer = dim_product(p.kept_dims, 0, pos);
    const std::uint64_t sm = p.kept_dims[pos];
    const std::uint64_t inner = dim_product(p.kept_dims, pos + 1, p.kept_dims.size());
    const Eigen::Index rank = (p.rank > 0) ? p.rank : a.cols();

    Partial out;
    out.kept_modes = p.kept_modes;
    out.kept_modes.erase(out.kept_modes.begin() + static_cast<std::ptrdiff_t>(pos));
    out.kept_dims = p.kept_dims;
    out.kept_dims.erase(out.kept_dims.begin() + static_cast<std::ptrdiff_t>(pos));
    out.rank = rank;
    out.data.assign(outer * inner * static_cast<std::uint64_t>(rank), 0.0);

    if (p.rank == 0) {
        if (inner == 1) {
            // Trailing-mode contraction collapses to one matrix product.
            MapConst whole(p.data.data(), static_cast<Eigen::Index>(outer),
                           static_cast<Eigen::Index>(sm));
            MapMat dst(out.data.data(), static_cast<Eigen::Index>(outer), rank);
            dst.noalias() = whole * a;
            return out;
        }
        for (std::uint64_t o = 0; o < outer; ++o) {
            MapConst slice(p.data.data() + o * sm * inner,
                           static_cast<Eigen::Index>(sm),
                           static_cast<Eigen::Index>(inner));
            MapMat dst(out.data.data() + o * inner * rank,
                       static_cast<Eigen::Index>(inner), rank);
            dst.noalias() = slice.transpose() * a;
        }
    } else {
        for (std::uint64_t o = 0; o < outer; ++o) {
            MapMat dst(out.data.data() + o * inner * rank,
                       static_cast<Eigen::Index>(inner), rank);
            for (std::uint64_t im = 0; im < sm; ++im) {
                MapConst src(p.data.data() + ((o * sm + im) * inner) *
                                                 static_cast<std::uint64_t>(rank),
                             static_cast<Eigen::Index>(inner), rank);
                dst.array() += src.array().rowwise() *
                               a.row(static_cast<Eigen::Index>(im)).array();
            }
        }
    }
    return out;
}

Partial tensor_as_partial(const DenseTensor& t) {
    Partial p;
    p.kept_modes.resize(t.order());
    for (std::size_t m = 0; m < t.order(); ++m) p.kept_modes[m] = m;
    p.kept_dims = t.dims();
    p.rank = 0;
    p.data.assign(t.data(), t.data() + t.size());
    return p;
}

Matrix partial_to_matrix(const Partial& p) {
    return MapConst(p.data.data(), static_cast<Eigen::Index>(p.kept_dims[0]),
                    p.rank);
}

void check_inputs(const DenseTensor& t, const std::vector<Matrix>& factors,
                  std::size_t mode) {
    const std::size_t order = t.order();
    if (order < 2) {
        throw InvalidArgument("mttkrp: tensor order must be at least 2");
    }
    if (mode >= order) {
        throw InvalidArgument("mttkrp: mode out of range");
    }
    if (factors.size() != order) {
        throw InvalidArgument("mttkrp: factor count does not match order");
    }
    const Eigen::Index rank = factors[0].cols();
    for (std::size_t m = 0; m < order; ++m) {
        if (factors[m].cols() != rank) {
            throw InvalidArgument("mttkrp: rank mismatch across factors");
        }
        if (static_cast<std::uint64_t>(factors[m].rows()) != t.extent(m)) {
            throw InvalidArgument("mttkrp: factor rows do not match extent");
        }
    }
}

// Contract the given modes out of the partial, highest mode first.
Partial contract_set(Partial p, std::vector<std::size_t> modes,
                     const std::vector<Matrix>& factors, int* full_counter) {
    std::sort(modes.begin(), modes.end(), std::greater<>());
    for (std::size_t m : modes) {
        if (p.rank == 0 && full_counter != nullptr) ++(*full_counter);
        p = contract_mode(p, m, factors[m]);
    }
    return p;
}

std::uint64_t mask_of(const std::vector<std::size_t>& modes) {
    std::uint64_t mask = 0;
    for (std::size_t m : modes) mask |= (1ull << m);
    return mask;
}

}  // namespace

void MttkrpWorkspace::note_factor_update(std::size_t mode) {
    const std::uint64_t bit = 1ull << mode;
    for (auto it = cache_.begin(); it != cache_.end();) {
        if (it->first & bit) {
            it = cache_.erase(it);
        } else {
            ++it;
        }
    }
}

void MttkrpWorkspace::invalidate_all() { cache_.clear(); }

Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors,
              std::size_t mode) {
    check_inputs(t, factors, mode);
    std::vector<std::size_t> others;
    for (std::size_t m = 0; m < t.order(); ++m) {
        if (m != mode) others.push_back(m);
    }
    return partial_to_matrix(
        contract_set(tensor_as_partial(t), others, factors, nullptr));
}

Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors,
              std::size_t mode, MttkrpWorkspace& ws) {
    check_inputs(t, factors, mode);
    const std::size_t order = t.order();
    const std::size_t half = (order + 1) / 2;  // front: [0, half)

    std::vector<std::size_t> contracted;  // modes folded into the root partial
    std::vector<std::size_t> remaining;   // kept by the root, minus `mode`
    if (mode < half) {
        for (std::size_t m = half; m < order; ++m) contracted.push_back(m);
        for (std::size_t m = 0; m < half; ++m) {
            if (m != mode) remaining.push_back(m);
        }
    } else {
        for (std::size_t m = 0; m < half; ++m) contracted.push_back(m);
        for (std::size_t m = half; m < order; ++m) {
            if (m != mode) remaining.push_back(m);
        }
    }

    const std::uint64_t key = mask_of(contracted);
    auto it = ws.cache_.find(key);
    if (it == ws.cache_.end()) {
        Partial root = contract_set(tensor_as_partial(t), contracted, factors,
                                    &ws.full_contractions_);
        it = ws.cache_.emplace(key, std::move(root)).first;
    }
    return partial_to_matrix(
        contract_set(it->second, remaining, factors, &ws.full_contractions_));
}

}  // namespace cpkit
