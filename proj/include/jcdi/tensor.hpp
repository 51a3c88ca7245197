#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "jcdi/errors.hpp"

namespace jcdi {

/// Allocator that default-initializes trivial elements, so buffers that are
/// fully overwritten by a kernel skip the zeroing pass.
template <typename T>
struct uninit_alloc : std::allocator<T> {
    template <typename U>
    struct rebind {
        using other = uninit_alloc<U>;
    };
    template <typename U, typename... Args>
    void construct(U* p, Args&&... args) {
        if constexpr (sizeof...(Args) == 0)
            ::new (static_cast<void*>(p)) U;
        else
            ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

/// Dense row-major tensor. T is float or double; training normally runs in
/// the precision picked by the run config, gradient-check suites in double.
template <typename T>
struct Tensor {
    using Buffer = std::vector<T, uninit_alloc<T>>;

    std::vector<int> shape;
    Buffer data;

    Tensor() = default;
    Tensor(std::vector<int> s, Buffer d) : shape(std::move(s)), data(std::move(d)) {}

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int> s) {
        Tensor t;
        t.data.assign(static_cast<size_t>(count(s)), T(0));
        t.shape = std::move(s);
        return t;
    }

    /// Uninitialized storage; every element must be written before reading.
    static Tensor uninit(std::vector<int> s) {
        Tensor t;
        t.data.resize(static_cast<size_t>(count(s)));
        t.shape = std::move(s);
        return t;
    }

    static Tensor full(std::vector<int> s, T v) {
        Tensor t;
        t.data.assign(static_cast<size_t>(count(s)), v);
        t.shape = std::move(s);
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    bool empty() const { return data.empty(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string r = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + "]";
}

}  // namespace jcdi
