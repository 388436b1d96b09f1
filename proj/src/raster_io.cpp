#include "radpose/raster_io.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace radpose {

namespace {

constexpr char kMagic[4] = {'R', 'K', 'R', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_rkr1(const Raster& raster) {
    const std::size_t n = raster.plane_size() * raster.channels;
    if (raster.data.size() != n) {
        throw DomainError("raster data size does not match its header");
    }
    std::vector<std::uint8_t> out;
    out.reserve(16 + 4 * n);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, raster.width);
    put_u32(out, raster.height);
    put_u32(out, raster.channels);
    for (float f : raster.data) {
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

Raster decode_rkr1(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw IoError("not an RKR1 raster");
    }
    Raster r;
    r.width = get_u32(bytes.data() + 4);
    r.height = get_u32(bytes.data() + 8);
    r.channels = get_u32(bytes.data() + 12);
    const std::size_t n = r.plane_size() * r.channels;
    if (bytes.size() != 16 + 4 * n) {
        throw IoError("RKR1 payload size does not match header");
    }
    r.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.data[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
    }
    return r;
}

void write_rkr1(const std::filesystem::path& path, const Raster& raster) {
    const auto bytes = encode_rkr1(raster);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write raster " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing raster " + path.string());
    }
}

Raster read_rkr1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open raster " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_rkr1(bytes);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

Raster to_raster(const std::vector<Image<float>>& planes) {
    Raster r;
    if (planes.empty()) {
        return r;
    }
    r.width = static_cast<std::uint32_t>(planes.front().width);
    r.height = static_cast<std::uint32_t>(planes.front().height);
    r.channels = static_cast<std::uint32_t>(planes.size());
    r.data.reserve(r.plane_size() * r.channels);
    for (const auto& p : planes) {
        if (!p.same_shape(planes.front())) {
            throw DomainError("raster planes differ in shape");
        }
        r.data.insert(r.data.end(), p.data.begin(), p.data.end());
    }
    return r;
}

Raster to_raster(const Image<float>& plane) { return to_raster(std::vector<Image<float>>{plane}); }

Raster to_raster(const InstanceMask& mask) {
    Image<float> f(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        f.data[i] = static_cast<float>(mask.data[i]);
    }
    return to_raster(f);
}

std::vector<Image<float>> planes_from_raster(const Raster& raster) {
    std::vector<Image<float>> planes;
    const std::size_t n = raster.plane_size();
    for (std::uint32_t c = 0; c < raster.channels; ++c) {
        Image<float> p(static_cast<int>(raster.width), static_cast<int>(raster.height));
        std::copy_n(raster.data.begin() + static_cast<std::ptrdiff_t>(c * n), n, p.data.begin());
        planes.push_back(std::move(p));
    }
    return planes;
}

DepthMap depth_from_raster(const Raster& raster) {
    if (raster.channels != 1) {
        throw DomainError("depth raster must have exactly one channel");
    }
    return planes_from_raster(raster).front();
}

InstanceMask mask_from_raster(const Raster& raster) {
    if (raster.channels != 1) {
        throw DomainError("mask raster must have exactly one channel");
    }
    InstanceMask m(static_cast<int>(raster.width), static_cast<int>(raster.height));
    for (std::size_t i = 0; i < m.size(); ++i) {
        const float f = raster.data[i];
        if (!(f >= 0.0f) || std::floor(f) != f || f > 2.0e9f) {
            throw DomainError("mask raster holds a non-integer instance id");
        }
        m.data[i] = static_cast<std::int32_t>(f);
    }
    return m;
}

}  // namespace radpose
