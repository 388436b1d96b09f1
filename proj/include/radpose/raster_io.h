#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "radpose/image.h"

namespace radpose {

/// Multi-channel float raster as stored in "RKR1" files: magic "RKR1",
/// little-endian u32 width, height, channels, then channels x height x width
/// little-endian f32 values, row-major within each channel.
struct Raster {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 0;
    std::vector<float> data;

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    float& at(std::uint32_t c, std::uint32_t u, std::uint32_t v) {
        return data[c * plane_size() + static_cast<std::size_t>(v) * width + u];
    }
    float at(std::uint32_t c, std::uint32_t u, std::uint32_t v) const {
        return data[c * plane_size() + static_cast<std::size_t>(v) * width + u];
    }
    bool operator==(const Raster&) const = default;
};

std::vector<std::uint8_t> encode_rkr1(const Raster& raster);
Raster decode_rkr1(const std::vector<std::uint8_t>& bytes);

void write_rkr1(const std::filesystem::path& path, const Raster& raster);
Raster read_rkr1(const std::filesystem::path& path);

Raster to_raster(const std::vector<Image<float>>& planes);
Raster to_raster(const Image<float>& plane);
/// Instance ids are stored as f32.
Raster to_raster(const InstanceMask& mask);

std::vector<Image<float>> planes_from_raster(const Raster& raster);
DepthMap depth_from_raster(const Raster& raster);
/// Throws DomainError if a value is not an exact non-negative integer.
InstanceMask mask_from_raster(const Raster& raster);

}  // namespace radpose
