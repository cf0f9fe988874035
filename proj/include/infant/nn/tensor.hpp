#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "infant/common.hpp"

namespace infant::nn {

// Row-major matrix. Everything in this library is [batch, features].
template <class T>
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int r, int c, T fill = T(0)) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Tensor: negative shape");
    }
    Tensor(int r, int c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != static_cast<std::size_t>(r) * c) throw std::invalid_argument("Tensor: data length != rows*cols");
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    T operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    T* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](T x) { return std::isfinite(x); });
    }
    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(rows, cols);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    bool operator==(const Tensor&) const = default;
};

// Ordered, named parameter tensors. Index order is the binding order in a Graph.
template <class T>
class ParamSet {
public:
    int add(std::string name, Tensor<T> value) {
        if (find(name) >= 0) throw std::invalid_argument("ParamSet: duplicate parameter " + name);
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
        return static_cast<int>(values_.size()) - 1;
    }

    int size() const { return static_cast<int>(values_.size()); }
    Tensor<T>& operator[](int i) { return values_[i]; }
    const Tensor<T>& operator[](int i) const { return values_[i]; }
    const std::string& name(int i) const { return names_[i]; }

    int find(const std::string& name) const {
        for (int i = 0; i < size(); ++i)
            if (names_[i] == name) return i;
        return -1;
    }
    int require(const std::string& name) const {
        const int i = find(name);
        if (i < 0) throw std::invalid_argument("ParamSet: missing parameter " + name);
        return i;
    }

    std::size_t num_scalars() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += v.size();
        return n;
    }

    // Fingerprint of names and shapes; values are not included.
    std::uint64_t spec_hash() const {
        std::string text;
        for (int i = 0; i < size(); ++i)
            text += names_[i] + ":" + std::to_string(values_[i].rows) + "x" + std::to_string(values_[i].cols) + ";";
        return fnv1a(text);
    }

    ParamSet zeros_like() const {
        ParamSet out;
        for (int i = 0; i < size(); ++i) out.add(names_[i], Tensor<T>(values_[i].rows, values_[i].cols));
        return out;
    }

    template <class U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        for (int i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<U>());
        return out;
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](const Tensor<T>& t) { return t.all_finite(); });
    }

    bool operator==(const ParamSet&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<Tensor<T>> values_;
};

}  // namespace infant::nn
