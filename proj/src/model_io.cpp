#include "dronenet/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dronenet/errors.hpp"

namespace dronenet {

namespace {

constexpr std::uint32_t kKindSelfOnn = 1;
constexpr std::uint32_t kKindConv = 2;
constexpr std::uint32_t kFlagPool = 1;
constexpr std::uint32_t kMaxLayers = 4096;
constexpr std::uint32_t kMaxQ = 64;
constexpr std::size_t kMaxKernel = 255;
constexpr std::size_t kMaxChannels = 1u << 16;
constexpr std::uint32_t kFusionColumn = 0xFFFFFFFFu;

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
    template <typename T>
    void tensor(const Tensor<T>& t) {
        for (T v : t.data()) {
            f32(static_cast<float>(v));
        }
    }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    void tensor(Tensor<float>& t, const char* what) {
        need(4 * t.size(), what);
        for (auto& v : t.data()) {
            v = std::bit_cast<float>(u32(what));
        }
    }
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw DataError("model file truncated at byte " + std::to_string(pos_) + " while reading " + what);
        }
    }
    [[nodiscard]] std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

template <typename T>
void write_layer_header(Writer& w, std::uint32_t kind, std::uint32_t column, std::uint32_t flags, std::uint32_t q,
                        const ConvSpec& s) {
    w.u32(kind);
    w.u32(column);
    w.u32(flags);
    w.u32(q);
    for (std::size_t v : {s.kernel_h, s.kernel_w, s.padding, s.stride, s.in_channels, s.out_channels}) {
        w.u32(static_cast<std::uint32_t>(v));
    }
}

struct Record {
    std::uint32_t kind = 0;
    std::uint32_t column = 0;
    std::uint32_t flags = 0;
    std::uint32_t q = 0;
    ConvSpec spec;
    std::vector<Tensor<float>> banks;
    Tensor<float> bias;
};

std::string record_name(std::size_t i) { return "layer record " + std::to_string(i); }

} // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks
    std::size_t off = 0;
    while (off < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

template <typename T>
std::vector<std::uint8_t> serialize_model(const DroneNet<T>& model) {
    Writer w;
    w.raw("SONN", 4);
    w.u32(kModelFormatVersion);
    std::uint32_t count = 1;
    for (const auto& col : model.columns()) {
        count += static_cast<std::uint32_t>(col.layers.size());
    }
    w.u32(count);
    for (std::size_t c = 0; c < model.columns().size(); ++c) {
        const auto& col = model.columns()[c];
        for (std::size_t l = 0; l < col.layers.size(); ++l) {
            const auto& layer = col.layers[l];
            write_layer_header<T>(w, kKindSelfOnn, static_cast<std::uint32_t>(c), col.pool_after[l] ? kFlagPool : 0,
                                  static_cast<std::uint32_t>(layer.q_max), layer.spec);
            for (const auto& bank : layer.weights) {
                w.tensor(bank);
            }
            w.tensor(layer.bias);
        }
    }
    const auto& f = model.fusion();
    write_layer_header<T>(w, kKindConv, kFusionColumn, 0, 1, f.spec);
    w.tensor(f.weight);
    w.tensor(f.bias);
    const std::uint32_t crc = crc32(w.bytes());
    w.u32(crc);
    return std::move(w.bytes());
}

DroneNet<float> deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "SONN", 4) != 0) {
        std::string found;
        for (std::size_t i = 0; i < std::min<std::size_t>(4, bytes.size()); ++i) {
            const char ch = static_cast<char>(bytes[i]);
            found += (ch >= 32 && ch < 127) ? std::string(1, ch) : "?";
        }
        throw DataError("not a model file: bad magic '" + found + "'");
    }
    Reader r(bytes.subspan(4));
    const std::uint32_t version = r.u32("version");
    if (version != kModelFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(version));
    }
    if (bytes.size() < 16) {
        throw DataError("model file truncated: " + std::to_string(bytes.size()) + " bytes");
    }
    const std::uint32_t stored_crc = static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
                                     static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8 |
                                     static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16 |
                                     static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24;
    const std::span<const std::uint8_t> payload = bytes.first(bytes.size() - 4);
    if (crc32(payload) != stored_crc) {
        throw DataError("model file checksum mismatch (corrupt or truncated file)");
    }

    Reader body(payload.subspan(4));
    body.u32("version");
    const std::uint32_t count = body.u32("layer count");
    if (count < 2 || count > kMaxLayers) {
        throw DataError("model file declares an implausible layer count " + std::to_string(count));
    }
    std::vector<Record> records;
    records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = record_name(i);
        Record rec;
        rec.kind = body.u32("layer kind");
        rec.column = body.u32("column index");
        rec.flags = body.u32("layer flags");
        rec.q = body.u32("q_max");
        std::size_t* fields[] = {&rec.spec.kernel_h,  &rec.spec.kernel_w,    &rec.spec.padding,
                                 &rec.spec.stride,    &rec.spec.in_channels, &rec.spec.out_channels};
        for (std::size_t* f : fields) {
            *f = body.u32("conv spec");
        }
        if (rec.kind != kKindSelfOnn && rec.kind != kKindConv) {
            throw DataError(name + ": unknown layer kind " + std::to_string(rec.kind));
        }
        if (rec.q < 1 || rec.q > kMaxQ || (rec.kind == kKindConv && rec.q != 1)) {
            throw DataError(name + ": invalid q_max " + std::to_string(rec.q));
        }
        const ConvSpec& s = rec.spec;
        if (s.kernel_h == 0 || s.kernel_h > kMaxKernel || s.kernel_h != s.kernel_w || s.kernel_h % 2 == 0 ||
            s.padding != s.kernel_h / 2 || s.stride != 1 || s.in_channels == 0 || s.in_channels > kMaxChannels ||
            s.out_channels == 0 || s.out_channels > kMaxChannels) {
            throw DataError(name + ": unsupported convolution geometry");
        }
        // bound the allocation by what the file can actually hold
        const std::size_t weights = static_cast<std::size_t>(rec.q) * s.weight_shape().size();
        const std::size_t payload_floats = (payload.size() - 4 - body.pos()) / 4;
        if (weights + s.out_channels > payload_floats) {
            throw DataError("model file truncated: " + name + " needs more data than the file holds");
        }
        for (std::uint32_t q = 0; q < rec.q; ++q) {
            rec.banks.emplace_back(s.weight_shape());
            body.tensor(rec.banks.back(), "weights");
        }
        rec.bias = Tensor<float>(s.bias_shape());
        body.tensor(rec.bias, "bias");
        records.push_back(std::move(rec));
    }
    if (body.pos() + 4 != payload.size()) {
        throw DataError("model file has " + std::to_string(payload.size() - 4 - body.pos()) +
                        " unexpected trailing bytes");
    }

    DroneNetConfig cfg;
    const Record& fusion = records.back();
    if (fusion.kind != kKindConv || fusion.spec.kernel_h != 1 || fusion.spec.out_channels != 1) {
        throw DataError("model file: last record is not a 1x1 single-output fusion convolution");
    }
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
        const Record& rec = records[i];
        if (rec.kind != kKindSelfOnn) {
            throw DataError(record_name(i) + ": convolution record before the end of the file");
        }
        if (rec.column == cfg.columns.size()) {
            cfg.columns.emplace_back();
        } else if (rec.column + 1 != cfg.columns.size()) {
            throw DataError(record_name(i) + ": column index " + std::to_string(rec.column) + " out of order");
        }
        cfg.columns.back().layers.push_back(
            LayerDesc{rec.spec.kernel_h, rec.spec.out_channels, static_cast<int>(rec.q), (rec.flags & kFlagPool) != 0});
    }
    if (cfg.columns.empty()) {
        throw DataError("model file contains no Self-ONN columns");
    }
    cfg.in_channels = records.front().spec.in_channels;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("model file describes an invalid network: ") + e.what());
    }

    DroneNet<float> model(cfg);
    std::size_t i = 0;
    for (auto& col : model.columns()) {
        for (auto& layer : col.layers) {
            Record& rec = records[i++];
            if (!(rec.spec == layer.spec)) {
                throw DataError(record_name(i - 1) + ": input channels do not chain with the previous layer");
            }
            layer.weights = std::move(rec.banks);
            layer.bias = std::move(rec.bias);
        }
    }
    if (!(fusion.spec == model.fusion().spec)) {
        throw DataError("model file: fusion input channels do not match the column outputs");
    }
    model.fusion().weight = fusion.banks.front();
    model.fusion().bias = fusion.bias;
    return model;
}

template <typename T>
void save_model(const DroneNet<T>& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

DroneNet<float> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open model file " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize_model(bytes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

template std::vector<std::uint8_t> serialize_model(const DroneNet<float>&);
template std::vector<std::uint8_t> serialize_model(const DroneNet<double>&);
template void save_model(const DroneNet<float>&, const std::filesystem::path&);
template void save_model(const DroneNet<double>&, const std::filesystem::path&);

} // namespace dronenet
