#include "srr/model.hpp"

#include "srr/checkpoint.hpp"
#include "srr/error.hpp"

namespace srr {

namespace {

StageConfigs make_stages(const std::array<std::size_t, 4>& channels, const std::array<std::size_t, 4>& depths,
                         const std::array<std::size_t, 4>& heads, const std::array<std::size_t, 4>& sr) {
    StageConfigs s;
    for (std::size_t i = 0; i < 4; ++i) {
        s[i].channels = channels[i];
        s[i].depth = depths[i];
        s[i].attention.heads = heads[i];
        s[i].attention.head_dim = channels[i] / heads[i];
        s[i].attention.sr_ratio = sr[i];
        s[i].attention.mlp_ratio = 4;
        s[i].embed_kernel = i == 0 ? 7 : 3;
        s[i].embed_stride = i == 0 ? 4 : 2;
        s[i].embed_padding = i == 0 ? 3 : 1;
    }
    return s;
}

std::size_t to_size(const std::map<std::string, std::string>& meta, const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw ConfigError("model metadata lacks '" + key + "'");
    try {
        return static_cast<std::size_t>(std::stoull(it->second));
    } catch (const std::exception&) {
        throw ConfigError("model metadata '" + key + "' is not an integer");
    }
}

const std::string& lookup(const std::map<std::string, std::string>& meta, const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw ConfigError("model metadata lacks '" + key + "'");
    return it->second;
}

}  // namespace

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    c.preset = "desk";
    c.stages = make_stages({8, 16, 24, 32}, {1, 1, 1, 1}, {1, 2, 2, 4}, {1, 1, 1, 1});
    c.decoder.ch_prime = 64;
    c.decoder.ch_double_prime = 32;
    c.input_size = 64;
    return c;
}

ModelConfig ModelConfig::full() {
    ModelConfig c;
    c.preset = "full";
    c.stages = make_stages({64, 128, 320, 512}, {3, 4, 6, 3}, {1, 2, 5, 8}, {8, 4, 2, 1});
    c.decoder.ch_prime = 1024;
    c.decoder.ch_double_prime = 256;
    c.input_size = 512;
    return c;
}

ModelConfig ModelConfig::from_preset(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "full") return full();
    throw ConfigError("unknown preset '" + name + "' (expected desk|full)");
}

void ModelConfig::set_attention_mode(AttentionMode mode) {
    for (auto& s : stages) s.attention.mode = mode;
}

void ModelConfig::set_share_cross_qkv(bool share) {
    for (auto& s : stages) s.attention.share_cross_qkv = share;
}

void ModelConfig::validate() const {
    validate_stages(stages);
    decoder.validate();
    if (input_size == 0 || input_size % 32 != 0) throw ConfigError("input_size must be a positive multiple of 32");
}

std::map<std::string, std::string> ModelConfig::to_metadata() const {
    std::map<std::string, std::string> m;
    m["preset"] = preset;
    m["input_size"] = std::to_string(input_size);
    m["attention_mode"] = std::string(to_string(attention_mode()));
    m["share_cross_qkv"] = stages[0].attention.share_cross_qkv ? "1" : "0";
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string p = "stage" + std::to_string(i + 1) + ".";
        const StageConfig& s = stages[i];
        m[p + "channels"] = std::to_string(s.channels);
        m[p + "depth"] = std::to_string(s.depth);
        m[p + "heads"] = std::to_string(s.attention.heads);
        m[p + "sr_ratio"] = std::to_string(s.attention.sr_ratio);
        m[p + "mlp_ratio"] = std::to_string(s.attention.mlp_ratio);
        m[p + "embed_kernel"] = std::to_string(s.embed_kernel);
        m[p + "embed_stride"] = std::to_string(s.embed_stride);
        m[p + "embed_padding"] = std::to_string(s.embed_padding);
    }
    m["decoder.ch_prime"] = std::to_string(decoder.ch_prime);
    m["decoder.ch_double_prime"] = std::to_string(decoder.ch_double_prime);
    m["decoder.full_resolution"] = decoder.full_resolution ? "1" : "0";
    m["decoder.error_target"] = std::string(to_string(decoder.error_target));
    return m;
}

ModelConfig ModelConfig::from_metadata(const std::map<std::string, std::string>& meta) {
    ModelConfig c;
    c.preset = lookup(meta, "preset");
    c.input_size = to_size(meta, "input_size");
    const AttentionMode mode = parse_attention_mode(lookup(meta, "attention_mode"));
    const bool share = lookup(meta, "share_cross_qkv") == "1";
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string p = "stage" + std::to_string(i + 1) + ".";
        StageConfig& s = c.stages[i];
        s.channels = to_size(meta, p + "channels");
        s.depth = to_size(meta, p + "depth");
        s.attention.heads = to_size(meta, p + "heads");
        if (s.attention.heads == 0) throw ConfigError("model metadata has zero heads");
        s.attention.head_dim = s.channels / s.attention.heads;
        s.attention.sr_ratio = to_size(meta, p + "sr_ratio");
        s.attention.mlp_ratio = to_size(meta, p + "mlp_ratio");
        s.attention.mode = mode;
        s.attention.share_cross_qkv = share;
        s.embed_kernel = to_size(meta, p + "embed_kernel");
        s.embed_stride = to_size(meta, p + "embed_stride");
        s.embed_padding = to_size(meta, p + "embed_padding");
    }
    c.decoder.ch_prime = to_size(meta, "decoder.ch_prime");
    c.decoder.ch_double_prime = to_size(meta, "decoder.ch_double_prime");
    c.decoder.full_resolution = lookup(meta, "decoder.full_resolution") == "1";
    c.decoder.error_target = parse_error_target(lookup(meta, "decoder.error_target"));
    c.validate();
    return c;
}

SrrNet::SrrNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    backbone_ = std::make_unique<Backbone>(store_, cfg_.stages, rng);
    std::array<std::size_t, 4> widths{};
    for (std::size_t i = 0; i < 4; ++i) widths[i] = cfg_.stages[i].channels;
    decoder_ = std::make_unique<Decoder>(store_, widths, cfg_.decoder, rng);
}

PyramidFeatures SrrNet::features(const FrameTriplet& input, AttentionProbe* probe) const {
    return backbone_->forward(input, probe);
}

PredictionPair SrrNet::forward(const FrameTriplet& input, AttentionProbe* probe) const {
    return decoder_->forward(backbone_->forward(input, probe), input.height(), input.width());
}

std::unique_ptr<SrrNet> SrrNet::clone() const {
    auto copy = std::make_unique<SrrNet>(cfg_, 0);
    Checkpoint ckpt;
    for (const auto& p : store_.parameters()) ckpt.tensors.emplace_back(p.name, p.tensor);
    assign_parameters(copy->store_, ckpt);
    return copy;
}

void save_model(const std::filesystem::path& path, const SrrNet& net) {
    save_checkpoint(path, net.parameters(), net.config().to_metadata());
}

std::unique_ptr<SrrNet> load_model(const std::filesystem::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    auto net = std::make_unique<SrrNet>(ModelConfig::from_metadata(ckpt.metadata), 0);
    assign_parameters(net->parameters(), ckpt);
    return net;
}

}  // namespace srr
