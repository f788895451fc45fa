#include "dronenet/density_map.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>

#include "dronenet/errors.hpp"

namespace dronenet {

double DensityMap::sum() const {
    double acc = 0.0;
    for (float v : values) {
        acc += v;
    }
    return acc;
}

float DensityMap::max() const { return values.empty() ? 0.0f : *std::max_element(values.begin(), values.end()); }

float DensityMap::min() const { return values.empty() ? 0.0f : *std::min_element(values.begin(), values.end()); }

template <typename T>
Tensor<T> to_tensor(const DensityMap& map) {
    Tensor<T> t(Shape{1, 1, map.height, map.width});
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        t[i] = static_cast<T>(map.values[i]);
    }
    return t;
}

template <typename T>
DensityMap to_density_map(const Tensor<T>& x, std::size_t n, MapScale scale) {
    const Shape& s = x.shape();
    if (n >= s.n || s.c < 1) {
        throw ShapeError("to_density_map: no batch item " + std::to_string(n) + " in " + s.str());
    }
    DensityMap map(s.h, s.w, scale);
    const T* src = x.plane(n, 0);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        map.values[i] = static_cast<float>(src[i]);
    }
    return map;
}

std::vector<std::uint8_t> encode_dmap(const DensityMap& map) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + 4 * map.values.size());
    auto put = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    };
    out.insert(out.end(), {'D', 'M', 'A', 'P'});
    put(static_cast<std::uint32_t>(map.height));
    put(static_cast<std::uint32_t>(map.width));
    put(0);
    for (float v : map.values) {
        put(std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

DensityMap decode_dmap(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "DMAP", 4) != 0) {
        throw DataError("not a density-map file (missing DMAP header)");
    }
    auto get = [&](std::size_t off) {
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
        }
        return v;
    };
    const std::size_t h = get(4);
    const std::size_t w = get(8);
    if (bytes.size() != 16 + 4 * h * w) {
        throw DataError("density-map file size " + std::to_string(bytes.size()) + " does not match " +
                        std::to_string(h) + "x" + std::to_string(w));
    }
    DensityMap map(h, w);
    for (std::size_t i = 0; i < h * w; ++i) {
        map.values[i] = std::bit_cast<float>(get(16 + 4 * i));
    }
    return map;
}

void write_dmap(const DensityMap& map, const std::filesystem::path& path) {
    const auto bytes = encode_dmap(map);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

DensityMap read_dmap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open density map " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_dmap(bytes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_dmap_csv(const DensityMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << std::setprecision(9);
    for (std::size_t r = 0; r < map.height; ++r) {
        for (std::size_t c = 0; c < map.width; ++c) {
            out << (c ? "," : "") << map.at(r, c);
        }
        out << '\n';
    }
}

template Tensor<float> to_tensor(const DensityMap&);
template Tensor<double> to_tensor(const DensityMap&);
template DensityMap to_density_map(const Tensor<float>&, std::size_t, MapScale);
template DensityMap to_density_map(const Tensor<double>&, std::size_t, MapScale);

} // namespace dronenet
