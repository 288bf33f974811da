#include "core/generators.hpp"

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace cpkit {

void ProblemSpec::validate() const {
    if (rank < 1) {
        throw InvalidArgument("problem spec: rank must be positive");
    }
    if (const auto* u = std::get_if<UniformFamily>(&family)) {
        if (!(u->a < u->b)) {
            throw InvalidArgument("problem spec: uniform needs a < b");
        }
    }
    if (const auto* m = std::get_if<MatmulFamily>(&family)) {
        if (m->n < 1) {
            throw InvalidArgument("problem spec: matmul needs n >= 1");
        }
        const std::uint64_t sq = m->n * m->n;
        if (dims.size() != 3 || dims[0] != sq || dims[1] != sq || dims[2] != sq) {
            throw InvalidArgument("problem spec: matmul dims must be (n^2,n^2,n^2)");
        }
    } else if (dims.empty()) {
        throw InvalidArgument("problem spec: dims must be nonempty");
    }
}

namespace {

template <typename Draw>
KruskalModel fill_model(const std::vector<std::uint64_t>& dims,
                        Eigen::Index rank, Draw&& draw) {
    if (rank < 1) {
        throw InvalidArgument("random_model: rank must be positive");
    }
    KruskalModel model;
    model.dims = dims;
    model.rank = rank;
    for (std::size_t n = 0; n < dims.size(); ++n) {
        Matrix a(static_cast<Eigen::Index>(dims[n]), rank);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            for (Eigen::Index r = 0; r < rank; ++r) {
                const std::uint64_t index =
                    static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(rank) +
                    static_cast<std::uint64_t>(r);
                a(i, r) = draw(static_cast<std::uint64_t>(n), index);
            }
        }
        model.factors.push_back(std::move(a));
    }
    model.validate();
    return model;
}

}  // namespace

KruskalModel random_model(const std::vector<std::uint64_t>& dims,
                          Eigen::Index rank, std::uint64_t seed,
                          const UniformFamily& dist) {
    if (!(dist.a < dist.b)) {
        throw InvalidArgument("random_model: uniform needs a < b");
    }
    return fill_model(dims, rank, [&](std::uint64_t mode, std::uint64_t index) {
        return rng::uniform(seed, mode, index, dist.a, dist.b);
    });
}

KruskalModel random_model(const std::vector<std::uint64_t>& dims,
                          Eigen::Index rank, std::uint64_t seed,
                          const GaussianFamily&) {
    return fill_model(dims, rank, [&](std::uint64_t mode, std::uint64_t index) {
        return rng::gaussian(seed, mode, index);
    });
}

std::pair<KruskalModel, DenseTensor> random_low_rank(const ProblemSpec& spec,
                                                     std::uint64_t element_cap) {
    spec.validate();
    if (std::holds_alternative<MatmulFamily>(spec.family)) {
        throw InvalidArgument("random_low_rank: family must be uniform or gaussian");
    }
    if (product_of_dims(spec.dims) > element_cap) {
        throw LimitExceeded("random_low_rank: element count exceeds cap");
    }
    KruskalModel model =
        std::holds_alternative<UniformFamily>(spec.family)
            ? random_model(spec.dims, spec.rank, spec.seed,
                           std::get<UniformFamily>(spec.family))
            : random_model(spec.dims, spec.rank, spec.seed, GaussianFamily{});
    DenseTensor x = reconstruct(model, element_cap);
    return {std::move(model), std::move(x)};
}

DenseTensor matmul_tensor(std::uint64_t n, std::uint64_t element_cap) {
    if (n < 1) {
        throw InvalidArgument("matmul_tensor: n must be >= 1");
    }
    const std::uint64_t sq = n * n;
    if (sq * sq * sq > element_cap) {
        throw LimitExceeded("matmul_tensor: element count exceeds cap");
    }
    DenseTensor t({sq, sq, sq});
    // Nonzeros at ((i,j), (i,l), (l,j)) for all i, l, j in [0, n).
    for (std::uint64_t i = 0; i < n; ++i) {
        for (std::uint64_t l = 0; l < n; ++l) {
            for (std::uint64_t j = 0; j < n; ++j) {
                const std::uint64_t m0 = i * n + j;
                const std::uint64_t m1 = i * n + l;
                const std::uint64_t m2 = l * n + j;
                t[(m0 * sq + m1) * sq + m2] = 1.0;
            }
        }
    }
    return t;
}

}  // namespace cpkit
