#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "srr/model.hpp"
#include "srr/session.hpp"
#include "srr/synth.hpp"
#include "srr/train.hpp"

namespace srr {

/// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Everything a CLI run can be configured with. Keys of the flat config file
/// match the long flag names.
struct RunConfig {
    std::string preset = "desk";
    AttentionMode attention_mode = AttentionMode::Rma;
    ReferenceMode reference_mode = ReferenceMode::Scored;
    bool share_cross_qkv = true;
    std::uint64_t seed = 1;
    std::string data, pool, gt, out, checkpoint, loss_csv;
    TrainSchedule schedule;
    SynthParams synth;
    std::size_t synth_sequences = 1;
    std::size_t static_images = 0;  // synth also writes a labelled still pool when > 0
    std::size_t static_categories = 4;

    /// Applies one key; unknown keys and malformed values raise ConfigError.
    void set(const std::string& key, const std::string& value);
    void apply(const std::map<std::string, std::string>& values);
    static RunConfig from_file(const std::filesystem::path& path);
    static const std::vector<std::string>& keys();

    ModelConfig model_config() const;
};

}  // namespace srr
