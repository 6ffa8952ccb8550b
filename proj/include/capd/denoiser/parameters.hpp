#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "capd/error.hpp"

namespace capd::denoiser {

/// Named tensors packed into one flat buffer. Gradients and optimizer
/// moments reuse the same layout, so they are plain vectors of equal size.
template <typename Scalar>
class ParameterStore {
public:
    using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatrixMap = Eigen::Map<RowMatrix>;
    using ConstMatrixMap = Eigen::Map<const RowMatrix>;

    struct Tensor {
        std::string name;
        std::vector<std::size_t> shape;  // 1 or 2 dims
        std::size_t offset = 0;
        std::size_t size = 0;
        bool decay = false;  // subject to weight decay

        std::size_t rows() const { return shape[0]; }
        std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
    };

    std::size_t add(std::string name, std::vector<std::size_t> shape, bool decay) {
        Tensor t;
        t.size = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
        t.offset = data_.size();
        t.name = std::move(name);
        t.shape = std::move(shape);
        t.decay = decay;
        if (index_.count(t.name)) throw ConfigError("duplicate parameter name " + t.name);
        index_[t.name] = tensors_.size();
        data_.resize(data_.size() + t.size, Scalar(0));
        tensors_.push_back(std::move(t));
        return tensors_.size() - 1;
    }

    std::size_t size() const { return data_.size(); }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    const Tensor& tensor(std::size_t i) const { return tensors_[i]; }

    std::size_t find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw DataError("no parameter named " + name);
        return it->second;
    }

    std::span<Scalar> values(std::size_t i) { return {data_.data() + tensors_[i].offset, tensors_[i].size}; }
    std::span<const Scalar> values(std::size_t i) const { return {data_.data() + tensors_[i].offset, tensors_[i].size}; }
    std::span<Scalar> values(const std::string& name) { return values(find(name)); }

    std::vector<Scalar>& flat() { return data_; }
    const std::vector<Scalar>& flat() const { return data_; }

    ConstMatrixMap matrix(std::size_t i) const {
        const Tensor& t = tensors_[i];
        return ConstMatrixMap(data_.data() + t.offset, static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
    }

    /// Row-vector view of a 1-D tensor.
    Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> row(std::size_t i) const {
        const Tensor& t = tensors_[i];
        return {data_.data() + t.offset, static_cast<Eigen::Index>(t.size)};
    }

    /// Views into an external buffer laid out like this store (gradients).
    MatrixMap matrix_in(std::vector<Scalar>& buf, std::size_t i) const {
        const Tensor& t = tensors_[i];
        return MatrixMap(buf.data() + t.offset, static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
    }
    Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> row_in(std::vector<Scalar>& buf, std::size_t i) const {
        const Tensor& t = tensors_[i];
        return {buf.data() + t.offset, static_cast<Eigen::Index>(t.size)};
    }

private:
    std::vector<Tensor> tensors_;
    std::vector<Scalar> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace capd::denoiser
