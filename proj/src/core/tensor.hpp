#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/matrix_ops.hpp"

namespace cpkit {

// Default guard against accidental huge allocations (element counts).
inline constexpr std::uint64_t kDefaultElementCap = 100'000'000ull;

// Dense order-N array of doubles, row-major flat storage (last index
// fastest). Extents are strictly positive and every entry is finite.
class DenseTensor {
public:
    DenseTensor() = default;

    // Zero-filled tensor with the given extents.
    explicit DenseTensor(std::vector<std::uint64_t> dims);

    static DenseTensor from_data(std::vector<std::uint64_t> dims,
                                 std::vector<double> data);

    std::size_t order() const { return dims_.size(); }
    std::uint64_t extent(std::size_t mode) const { return dims_[mode]; }
    const std::vector<std::uint64_t>& dims() const { return dims_; }
    std::uint64_t size() const { return static_cast<std::uint64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double operator[](std::uint64_t flat) const { return data_[flat]; }
    double& operator[](std::uint64_t flat) { return data_[flat]; }

    // Element access by multi-index, for tests and small reference code.
    double at(const std::vector<std::uint64_t>& idx) const;

    double norm2() const;            // squared Frobenius norm
    double frobenius_norm() const;

    // Throws InvalidArgument on non-finite entries or a dims/data mismatch.
    void validate() const;

private:
    std::vector<std::uint64_t> dims_;
    std::vector<double> data_;
};

std::uint64_t product_of_dims(const std::vector<std::uint64_t>& dims);

// Mode-n unfolding: rows indexed by i_n, columns by the row-major
// linearization of the remaining indices in ascending mode order.
// Modes are 0-based.
Matrix matricize(const DenseTensor& t, std::size_t mode);

// Inverse of matricize: folds an s_n x (prod other dims) matrix back into a
// tensor with the given extents.
DenseTensor dematricize(const Matrix& m, const std::vector<std::uint64_t>& dims,
                        std::size_t mode);

// Binary tensor file format: magic "CPKT1", order and extents as u64
// little-endian, then the entries as f64 little-endian in row-major order.
void write_tensor(const DenseTensor& t, const std::string& path);
DenseTensor read_tensor(const std::string& path);

}  // namespace cpkit
