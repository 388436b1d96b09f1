#pragma once

#include <cstdint>
#include <vector>

#include "radpose/errors.h"

namespace radpose {

/// Dense row-major raster, pixel (u, v) at data[v * width + u].
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{})
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 0 || h < 0) {
            throw DomainError("image dimensions must be non-negative");
        }
    }

    std::size_t size() const { return data.size(); }
    T& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
    const T& at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
    bool same_shape(int w, int h) const { return width == w && height == h; }

    template <typename U>
    bool same_shape(const Image<U>& other) const {
        return width == other.width && height == other.height;
    }

    bool operator==(const Image&) const = default;
};

/// Depth in meters, background exactly 0.
using DepthMap = Image<float>;
/// Instance ids, 0 is background.
using InstanceMask = Image<std::int32_t>;

}  // namespace radpose
