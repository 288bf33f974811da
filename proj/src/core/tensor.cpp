#include "core/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "core/errors.hpp"

namespace cpkit {

std::uint64_t product_of_dims(const std::vector<std::uint64_t>& dims) {
    std::uint64_t n = 1;
    for (std::uint64_t d : dims) {
        if (d == 0) {
            throw InvalidArgument("tensor extents must be positive");
        }
        if (n > std::numeric_limits<std::uint64_t>::max() / d) {
            throw LimitExceeded("tensor element count overflows 64 bits");
        }
        n *= d;
    }
    return n;
}

DenseTensor::DenseTensor(std::vector<std::uint64_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) {
        throw InvalidArgument("tensor order must be at least 1");
    }
    data_.assign(product_of_dims(dims_), 0.0);
}

DenseTensor DenseTensor::from_data(std::vector<std::uint64_t> dims,
                                   std::vector<double> data) {
    DenseTensor t;
    t.dims_ = std::move(dims);
    t.data_ = std::move(data);
    if (t.dims_.empty()) {
        throw InvalidArgument("tensor order must be at least 1");
    }
    if (product_of_dims(t.dims_) != t.data_.size()) {
        throw InvalidArgument("tensor data length does not match extents");
    }
    return t;
}

double DenseTensor::at(const std::vector<std::uint64_t>& idx) const {
    if (idx.size() != dims_.size()) {
        throw InvalidArgument("index order mismatch");
    }
    std::uint64_t flat = 0;
    for (std::size_t m = 0; m < dims_.size(); ++m) {
        if (idx[m] >= dims_[m]) {
            throw InvalidArgument("index out of range");
        }
        flat = flat * dims_[m] + idx[m];
    }
    return data_[flat];
}

double DenseTensor::norm2() const {
    double acc = 0.0;
    for (double v : data_) {
        acc += v * v;
    }
    return acc;
}

double DenseTensor::frobenius_norm() const { return std::sqrt(norm2()); }

void DenseTensor::validate() const {
    if (dims_.empty()) {
        throw InvalidArgument("tensor order must be at least 1");
    }
    if (product_of_dims(dims_) != data_.size()) {
        throw InvalidArgument("tensor data length does not match extents");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("tensor contains non-finite entries");
        }
    }
}

namespace {

// Column strides of the mode-n unfolding: remaining modes in ascending
// order, last one fastest.
std::vector<std::uint64_t> unfold_col_strides(
    const std::vector<std::uint64_t>& dims, std::size_t mode) {
    std::vector<std::uint64_t> stride(dims.size(), 0);
    std::uint64_t acc = 1;
    for (std::size_t m = dims.size(); m-- > 0;) {
        if (m == mode) continue;
        stride[m] = acc;
        acc *= dims[m];
    }
    return stride;
}

void advance_index(std::vector<std::uint64_t>& idx,
                   const std::vector<std::uint64_t>& dims) {
    for (std::size_t m = dims.size(); m-- > 0;) {
        if (++idx[m] < dims[m]) return;
        idx[m] = 0;
    }
}

}  // namespace

Matrix matricize(const DenseTensor& t, std::size_t mode) {
    const auto& dims = t.dims();
    if (mode >= dims.size()) {
        throw InvalidArgument("matricize: mode out of range");
    }
    const std::uint64_t rows = dims[mode];
    const std::uint64_t cols = t.size() / rows;
    const auto cstride = unfold_col_strides(dims, mode);

    Matrix out(rows, cols);
    std::vector<std::uint64_t> idx(dims.size(), 0);
    for (std::uint64_t f = 0; f < t.size(); ++f) {
        std::uint64_t col = 0;
        for (std::size_t m = 0; m < dims.size(); ++m) {
            if (m != mode) col += idx[m] * cstride[m];
        }
        out(static_cast<Eigen::Index>(idx[mode]),
            static_cast<Eigen::Index>(col)) = t[f];
        advance_index(idx, dims);
    }
    return out;
}

DenseTensor dematricize(const Matrix& m, const std::vector<std::uint64_t>& dims,
                        std::size_t mode) {
    if (mode >= dims.size()) {
        throw InvalidArgument("dematricize: mode out of range");
    }
    const std::uint64_t total = product_of_dims(dims);
    if (static_cast<std::uint64_t>(m.rows()) != dims[mode] ||
        static_cast<std::uint64_t>(m.rows()) * static_cast<std::uint64_t>(m.cols()) !=
            total) {
        throw InvalidArgument("dematricize: matrix shape does not match extents");
    }
    const auto cstride = unfold_col_strides(dims, mode);

    DenseTensor t(dims);
    std::vector<std::uint64_t> idx(dims.size(), 0);
    for (std::uint64_t f = 0; f < total; ++f) {
        std::uint64_t col = 0;
        for (std::size_t mm = 0; mm < dims.size(); ++mm) {
            if (mm != mode) col += idx[mm] * cstride[mm];
        }
        t[f] = m(static_cast<Eigen::Index>(idx[mode]),
                 static_cast<Eigen::Index>(col));
        advance_index(idx, dims);
    }
    return t;
}

// ---------------------------------------------------------------------------
// File format helpers (explicit little-endian so the files are portable).

namespace {

constexpr char kTensorMagic[5] = {'C', 'P', 'K', 'T', '1'};

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

void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
}

double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace

void write_tensor(const DenseTensor& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open for writing: " + path);
    }
    os.write(kTensorMagic, sizeof(kTensorMagic));
    put_u64(os, t.order());
    for (std::uint64_t d : t.dims()) put_u64(os, d);
    for (std::uint64_t f = 0; f < t.size(); ++f) put_f64(os, t[f]);
    if (!os) {
        throw IoError("write failed: " + path);
    }
}

DenseTensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open for reading: " + path);
    }
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, kTensorMagic, 5) != 0) {
        throw ParseError("bad tensor magic: " + path);
    }
    const std::uint64_t order = get_u64(is);
    if (!is || order == 0 || order > 64) {
        throw ParseError("bad tensor order: " + path);
    }
    std::vector<std::uint64_t> dims(order);
    for (auto& d : dims) d = get_u64(is);
    if (!is) {
        throw ParseError("truncated tensor header: " + path);
    }
    const std::uint64_t total = product_of_dims(dims);
    std::vector<double> data(total);
    for (auto& v : data) v = get_f64(is);
    if (!is) {
        throw ParseError("truncated tensor data: " + path);
    }
    DenseTensor t = DenseTensor::from_data(std::move(dims), std::move(data));
    t.validate();
    return t;
}

}  // namespace cpkit
