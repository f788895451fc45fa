#include "dronenet/macs.hpp"

namespace dronenet {

namespace {

LayerMacs layer_macs(std::string name, std::size_t h, std::size_t w, std::size_t in_c, std::size_t out_c,
                     std::size_t kernel, int q) {
    LayerMacs m;
    m.name = std::move(name);
    m.in_h = m.out_h = h;
    m.in_w = m.out_w = w;
    m.in_channels = in_c;
    m.out_channels = out_c;
    m.kernel = kernel;
    m.q = q;
    const auto qq = static_cast<std::uint64_t>(q);
    m.macs = qq * h * w * out_c * in_c * kernel * kernel;
    m.power_multiplies = qq * (qq - 1) / 2 * in_c * h * w;
    return m;
}

} // namespace

MacReport count_macs(const DroneNetConfig& config, std::size_t input_h, std::size_t input_w) {
    config.validate();
    MacReport report;
    std::size_t out_h = 0, out_w = 0;
    for (std::size_t c = 0; c < config.columns.size(); ++c) {
        std::size_t h = input_h, w = input_w, in = config.in_channels;
        const auto& layers = config.columns[c].layers;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& d = layers[l];
            report.layers.push_back(layer_macs("col" + std::to_string(c) + ".layer" + std::to_string(l), h, w, in,
                                               d.channels, d.kernel, d.q));
            in = d.channels;
            if (d.pool_after) {
                h = (h + 1) / 2;
                w = (w + 1) / 2;
            }
        }
        out_h = h;
        out_w = w;
    }
    report.layers.push_back(layer_macs("fusion", out_h, out_w, config.fusion_in_channels(), 1, 1, 1));
    for (const auto& l : report.layers) {
        report.total_macs += l.macs;
        report.total_power_multiplies += l.power_multiplies;
    }
    return report;
}

} // namespace dronenet
