#include "core/kruskal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/errors.hpp"

namespace cpkit {

KruskalModel KruskalModel::zeros(std::vector<std::uint64_t> dims,
                                 Eigen::Index rank) {
    KruskalModel m;
    m.dims = std::move(dims);
    m.rank = rank;
    for (std::uint64_t d : m.dims) {
        m.factors.push_back(Matrix::Zero(static_cast<Eigen::Index>(d), rank));
    }
    m.validate();
    return m;
}

void KruskalModel::validate() const {
    if (dims.empty() || rank < 1) {
        throw InvalidArgument("model needs order >= 1 and rank >= 1");
    }
    if (factors.size() != dims.size()) {
        throw InvalidArgument("model factor count does not match order");
    }
    for (std::size_t n = 0; n < dims.size(); ++n) {
        if (static_cast<std::uint64_t>(factors[n].rows()) != dims[n] ||
            factors[n].cols() != rank) {
            throw InvalidArgument("model factor shape mismatch");
        }
        if (!factors[n].allFinite()) {
            throw InvalidArgument("model factor contains non-finite entries");
        }
    }
}

GammaSet build_gamma_set(const KruskalModel& model) {
    const std::size_t order = model.order();
    if (order < 2) {
        throw InvalidArgument("build_gamma_set: order must be at least 2");
    }
    GammaSet gs;
    gs.grams.reserve(order);
    for (const auto& a : model.factors) {
        gs.grams.push_back(gram(a));
    }
    gs.pairwise.assign(order, std::vector<Matrix>(order));
    for (std::size_t n = 0; n < order; ++n) {
        for (std::size_t p = n; p < order; ++p) {
            Matrix g = Matrix::Ones(model.rank, model.rank);
            for (std::size_t m = 0; m < order; ++m) {
                if (m == n || m == p) continue;
                g = hadamard(g, gs.grams[m]);
            }
            gs.pairwise[n][p] = g;
            if (p != n) gs.pairwise[p][n] = g;
        }
    }
    return gs;
}

DenseTensor reconstruct(const KruskalModel& model, std::uint64_t element_cap) {
    model.validate();
    const std::uint64_t total = product_of_dims(model.dims);
    if (total > element_cap) {
        throw LimitExceeded("reconstruct: element count exceeds cap");
    }
    const std::size_t order = model.order();
    DenseTensor t(model.dims);
    std::vector<std::uint64_t> idx(order, 0);
    for (std::uint64_t f = 0; f < total; ++f) {
        double acc = 0.0;
        for (Eigen::Index r = 0; r < model.rank; ++r) {
            double prod = 1.0;
            for (std::size_t n = 0; n < order; ++n) {
                prod *= model.factors[n](static_cast<Eigen::Index>(idx[n]), r);
            }
            acc += prod;
        }
        t[f] = acc;
        for (std::size_t m = order; m-- > 0;) {
            if (++idx[m] < model.dims[m]) break;
            idx[m] = 0;
        }
    }
    return t;
}

std::pair<double, double> residual_fitness(const KruskalModel& model,
                                           const DenseTensor& x, double xnorm2,
                                           const Matrix* last_mode_mttkrp) {
    if (!(xnorm2 > 0.0)) {
        throw InvalidArgument("residual_fitness: tensor norm must be positive");
    }
    const std::size_t last = model.order() - 1;
    Matrix m_local;
    if (last_mode_mttkrp == nullptr) {
        m_local = mttkrp(x, model.factors, last);
        last_mode_mttkrp = &m_local;
    }
    const double cross = (last_mode_mttkrp->cwiseProduct(model.factors[last])).sum();

    Matrix all_grams = Matrix::Ones(model.rank, model.rank);
    for (const auto& a : model.factors) {
        all_grams = hadamard(all_grams, gram(a));
    }
    const double model_norm2 = all_grams.sum();

    double res2 = xnorm2 - 2.0 * cross + model_norm2;
    if (res2 < 0.0) res2 = 0.0;
    const double r = std::sqrt(res2 / xnorm2);
    return {r, 1.0 - r};
}

// ---------------------------------------------------------------------------
// Model file I/O.

namespace {

constexpr char kModelMagic[5] = {'C', 'P', 'K', 'M', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void write_model(const KruskalModel& model, const std::string& path) {
    model.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open for writing: " + path);
    }
    os.write(kModelMagic, sizeof(kModelMagic));
    put_u64(os, model.order());
    put_u64(os, static_cast<std::uint64_t>(model.rank));
    for (std::uint64_t d : model.dims) put_u64(os, d);
    for (const auto& a : model.factors) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            std::uint64_t bits;
            const double d = a.data()[i];  // row-major flat
            std::memcpy(&bits, &d, 8);
            put_u64(os, bits);
        }
    }
    if (!os) {
        throw IoError("write failed: " + path);
    }
}

KruskalModel read_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open for reading: " + path);
    }
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, kModelMagic, 5) != 0) {
        throw ParseError("bad model magic: " + path);
    }
    const std::uint64_t order = get_u64(is);
    const std::uint64_t rank = get_u64(is);
    if (!is || order == 0 || order > 64 || rank == 0) {
        throw ParseError("bad model header: " + path);
    }
    KruskalModel m;
    m.rank = static_cast<Eigen::Index>(rank);
    m.dims.resize(order);
    for (auto& d : m.dims) d = get_u64(is);
    if (!is) {
        throw ParseError("truncated model header: " + path);
    }
    for (std::uint64_t d : m.dims) {
        Matrix a(static_cast<Eigen::Index>(d), m.rank);
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            std::uint64_t bits = get_u64(is);
            double v;
            std::memcpy(&v, &bits, 8);
            a.data()[i] = v;
        }
        m.factors.push_back(std::move(a));
    }
    if (!is) {
        throw ParseError("truncated model data: " + path);
    }
    m.validate();
    return m;
}

}  // namespace cpkit
