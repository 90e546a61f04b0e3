#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "rgan/common.hpp"
#include "rgan/rng.hpp"

namespace rgan {

// Dense row-major tensor. Value semantics; the autodiff tape owns copies.
template <typename S>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), S(0));
    }

    TensorT(std::vector<int> shape, std::vector<S> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        RGAN_REQUIRE(static_cast<int64_t>(data_.size()) == count(shape_),
                     "tensor: data length does not match shape");
    }

    static TensorT full(std::vector<int> shape, S v) {
        TensorT t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static TensorT scalar(S v) { return TensorT({1}, {v}); }

    static TensorT xavier(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
        TensorT t(std::move(shape));
        const S bound = static_cast<S>(std::sqrt(6.0 / (fan_in + fan_out)));
        for (auto& x : t.data_) x = static_cast<S>(rng.uniform_double() * 2.0 - 1.0) * bound;
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    S& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    S operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 2-d/3-d accessors (row-major).
    S& at(int r, int c) { return data_[static_cast<size_t>(r) * dim(1) + c]; }
    S at(int r, int c) const { return data_[static_cast<size_t>(r) * dim(1) + c]; }
    S& at(int b, int t, int c) {
        return data_[(static_cast<size_t>(b) * dim(1) + t) * dim(2) + c];
    }
    S at(int b, int t, int c) const {
        return data_[(static_cast<size_t>(b) * dim(1) + t) * dim(2) + c];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (S v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void fill(S v) {
        for (auto& x : data_) x = v;
    }

    template <typename T2>
    TensorT<T2> cast() const {
        std::vector<T2> d(data_.size());
        for (size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<T2>(data_[i]);
        return TensorT<T2>(shape_, std::move(d));
    }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            RGAN_REQUIRE(d > 0, "tensor: dimensions must be positive");
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

    static std::string shape_str(const std::vector<int>& shape) {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

private:
    std::vector<int> shape_;
    std::vector<S> data_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

}  // namespace rgan
