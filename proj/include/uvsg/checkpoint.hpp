#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsg/net.hpp"
#include "uvsg/rng.hpp"
#include "uvsg/tensor_io.hpp"

namespace uvsg {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const NetworkConfig& cfg) {
    return {{"enc_stages", cfg.enc_stages},
            {"dec_stages", cfg.dec_stages},
            {"features", cfg.features},
            {"kernel", cfg.kernel},
            {"slope", cfg.slope},
            {"in_channels_query", cfg.in_channels_query},
            {"in_channels_support", cfg.in_channels_support},
            {"reduction", cfg.reduction == Reduction::sorted ? "sorted" : "input_order"}};
}

inline NetworkConfig config_from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.enc_stages = j.at("enc_stages").get<int>();
    cfg.dec_stages = j.at("dec_stages").get<int>();
    cfg.features = j.at("features").get<int>();
    cfg.kernel = j.at("kernel").get<int>();
    cfg.slope = j.at("slope").get<float>();
    cfg.in_channels_query = j.at("in_channels_query").get<int>();
    cfg.in_channels_support = j.at("in_channels_support").get<int>();
    cfg.reduction = j.value("reduction", "input_order") == std::string("sorted")
                        ? Reduction::sorted
                        : Reduction::input_order;
    return cfg;
}

struct Checkpoint {
    NetworkConfig config;
    ModelParameters params;
    nlohmann::json extra;  // rng state, step counter, run metadata
    // Non-model tensors riding along in the same file (e.g. Adam moments).
    std::vector<std::pair<std::string, Tensor>> extra_tensors;
};

// Layout: "UVCK", u32 little-endian header length, JSON header, then one UVSG
// tensor record per parameter at the recorded offsets (relative to the end of
// the header).
inline void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
    std::ostringstream payload(std::ios::binary);
    nlohmann::json tensors = nlohmann::json::array();
    auto append = [&](const std::string& name, const Tensor& t) {
        const std::uint64_t offset = static_cast<std::uint64_t>(payload.tellp());
        write_tensor(payload, t, Dtype::f32);
        tensors.push_back({{"name", name},
                           {"shape", t.shape},
                           {"offset", offset},
                           {"bytes", static_cast<std::uint64_t>(payload.tellp()) - offset}});
    };
    for (auto& [name, t] : ckpt.params.named_tensors()) append(name, *t);
    for (auto& [name, t] : ckpt.extra_tensors) append(name, t);
    nlohmann::json header = {{"format_version", kCheckpointVersion},
                             {"config", config_to_json(ckpt.config)},
                             {"tensors", tensors},
                             {"extra", ckpt.extra}};
    const std::string hdr = header.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for write: " + path);
    os.write("UVCK", 4);
    detail::write_u32_le(os, static_cast<std::uint32_t>(hdr.size()));
    os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    const std::string body = payload.str();
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!os) throw IoError("checkpoint write failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "UVCK") throw IoError("bad checkpoint magic");
    const std::uint32_t hdr_len = detail::read_u32_le(is);
    std::string hdr(hdr_len, '\0');
    is.read(hdr.data(), hdr_len);
    if (!is) throw IoError("truncated checkpoint header");
    nlohmann::json header = nlohmann::json::parse(hdr);
    if (header.at("format_version").get<int>() != kCheckpointVersion)
        throw IoError("unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.config = config_from_json(header.at("config"));
    ckpt.extra = header.value("extra", nlohmann::json::object());
    Rng dummy(0);
    ckpt.params = init_network(ckpt.config, dummy);
    const std::streampos payload_start = is.tellg();
    auto named = ckpt.params.named_tensors();
    const auto& tensors = header.at("tensors");
    if (tensors.size() < named.size()) throw IoError("checkpoint tensor count mismatch");
    std::size_t model_i = 0;
    for (const auto& entry : tensors) {
        const std::string name = entry.at("name").get<std::string>();
        is.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
        Tensor t = read_tensor<float>(is);
        if (t.shape != entry.at("shape").get<Shape>())
            throw IoError("checkpoint tensor shape mismatch: " + name);
        if (model_i < named.size() && name == named[model_i].first) {
            if (t.shape != named[model_i].second->shape)
                throw IoError("checkpoint tensor shape mismatch: " + name);
            *named[model_i].second = std::move(t);
            ++model_i;
        } else {
            ckpt.extra_tensors.emplace_back(name, std::move(t));
        }
    }
    if (model_i != named.size()) throw IoError("checkpoint tensor name mismatch");
    return ckpt;
}

}  // namespace uvsg
