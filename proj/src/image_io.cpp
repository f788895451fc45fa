#include "dronenet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "dronenet/errors.hpp"

namespace dronenet {

namespace {

class HeaderScanner {
public:
    HeaderScanner(const std::vector<std::uint8_t>& bytes, std::string source)
        : bytes_(bytes), source_(std::move(source)) {}

    std::size_t number(const char* what) {
        skip_space_and_comments();
        std::size_t v = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
            ++pos_;
            if (++digits > 9) {
                throw DataError(source_ + ": image header field " + what + " is too large");
            }
        }
        if (digits == 0) {
            throw DataError(source_ + ": malformed image header, expected " + what);
        }
        return v;
    }
    // exactly one whitespace byte separates the header from the raster
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw DataError(source_ + ": malformed image header, missing separator before pixel data");
        }
        return pos_ + 1;
    }
    void seek(std::size_t p) { pos_ = p; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

} // namespace

Tensor<float> decode_image(const std::vector<std::uint8_t>& bytes, const std::string& source) {
    std::string magic;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, bytes.size()); ++i) {
        const char ch = static_cast<char>(bytes[i]);
        magic += std::isprint(static_cast<unsigned char>(ch)) ? ch : '?';
    }
    std::size_t channels = 0;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw DataError(source + ": unsupported image format, magic '" + magic + "' (expected P5 or P6)");
    }
    HeaderScanner scan(bytes, source);
    scan.seek(2);
    const std::size_t width = scan.number("width");
    const std::size_t height = scan.number("height");
    const std::size_t maxval = scan.number("maxval");
    if (width == 0 || height == 0) {
        throw DataError(source + ": image has zero extent");
    }
    if (maxval == 0 || maxval > 255) {
        throw DataError(source + ": only 8-bit images are supported (maxval " + std::to_string(maxval) + ")");
    }
    const std::size_t start = scan.raster_start();
    const std::size_t needed = width * height * channels;
    if (bytes.size() < start + needed) {
        throw DataError(source + ": truncated pixel data (" + std::to_string(bytes.size() - start) + " of " +
                        std::to_string(needed) + " bytes)");
    }
    Tensor<float> img(Shape{1, channels, height, width});
    const float scale = 255.0f / static_cast<float>(maxval);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            for (std::size_t ch = 0; ch < channels; ++ch) {
                const std::uint8_t v = bytes[start + (r * width + c) * channels + ch];
                img(0, ch, r, c) = maxval == 255 ? static_cast<float>(v) : static_cast<float>(v) * scale;
            }
        }
    }
    return img;
}

Tensor<float> load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open image " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_image(bytes, path.string());
}

template <typename T>
Tensor<T> normalize_image(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data()) {
        v = v / T(127.5) - T(1);
    }
    return y;
}

void write_image(const Tensor<float>& x, const std::filesystem::path& path) {
    const Shape& s = x.shape();
    if (s.n < 1 || (s.c != 1 && s.c != 3)) {
        throw ShapeError("write_image: need 1 or 3 channels, got " + s.str());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << (s.c == 1 ? "P5" : "P6") << '\n' << s.w << ' ' << s.h << "\n255\n";
    std::vector<char> raster(s.h * s.w * s.c);
    for (std::size_t r = 0; r < s.h; ++r) {
        for (std::size_t c = 0; c < s.w; ++c) {
            for (std::size_t ch = 0; ch < s.c; ++ch) {
                const float v = std::clamp(std::round(x(0, ch, r, c)), 0.0f, 255.0f);
                raster[(r * s.w + c) * s.c + ch] = static_cast<char>(static_cast<std::uint8_t>(v));
            }
        }
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

template Tensor<float> normalize_image(const Tensor<float>&);
template Tensor<double> normalize_image(const Tensor<double>&);

} // namespace dronenet
