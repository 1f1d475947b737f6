#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "srr/decoder.hpp"

namespace srr {

struct ModelConfig {
    std::string preset = "desk";
    StageConfigs stages;
    DecoderConfig decoder;
    std::size_t input_size = 64;

    /// Channels [8,16,24,32], depth 1, heads [1,2,2,4], Ch' 64, Ch'' 32, 64x64 input.
    static ModelConfig desk();
    /// Channels [64,128,320,512], depths [3,4,6,3], heads [1,2,5,8], sr [8,4,2,1],
    /// Ch' 1024, Ch'' 256, 512x512 input.
    static ModelConfig full();
    static ModelConfig from_preset(const std::string& name);

    void set_attention_mode(AttentionMode mode);
    void set_share_cross_qkv(bool share);
    AttentionMode attention_mode() const { return stages[0].attention.mode; }

    std::map<std::string, std::string> to_metadata() const;
    static ModelConfig from_metadata(const std::map<std::string, std::string>& meta);
    void validate() const;
};

/// Backbone plus dual-purpose decoder, owning its parameters.
class SrrNet {
public:
    SrrNet(const ModelConfig& cfg, std::uint64_t seed);
    SrrNet(const SrrNet&) = delete;
    SrrNet& operator=(const SrrNet&) = delete;

    PredictionPair forward(const FrameTriplet& input, AttentionProbe* probe = nullptr) const;
    PyramidFeatures features(const FrameTriplet& input, AttentionProbe* probe = nullptr) const;

    /// Fresh network with the same configuration and a copy of the parameter values.
    std::unique_ptr<SrrNet> clone() const;

    ParameterStore& parameters() { return store_; }
    const ParameterStore& parameters() const { return store_; }
    const ModelConfig& config() const { return cfg_; }
    const Backbone& backbone() const { return *backbone_; }
    const Decoder& decoder() const { return *decoder_; }

private:
    ModelConfig cfg_;
    ParameterStore store_;
    std::unique_ptr<Backbone> backbone_;
    std::unique_ptr<Decoder> decoder_;
};

void save_model(const std::filesystem::path& path, const SrrNet& net);
std::unique_ptr<SrrNet> load_model(const std::filesystem::path& path);

}  // namespace srr
