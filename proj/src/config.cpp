#include "srr/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "srr/error.hpp"

namespace srr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    try {
        return std::stoull(v);
    } catch (const std::out_of_range&) {
        throw ConfigError(key + ": integer out of range");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (out.count(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k{
        "preset", "attention_mode", "reference_mode", "share_cross_qkv", "seed", "data", "pool", "gt", "out",
        "checkpoint", "loss_csv", "gamma", "error_target", "pretrain_iters", "finetune_iters", "pretrain_lr", "finetune_lr",
        "batch", "weight_decay", "hflip", "crop", "frames", "size", "texture_grain", "contrast", "contrast_variation",
        "motion_amplitude", "occlusion_prob", "min_radius", "max_radius", "sequences", "static_images", "static_categories", "appearance_seed"};
    return k;
}

void RunConfig::set(const std::string& key, const std::string& v) {
    if (key == "preset") {
        ModelConfig::from_preset(v);
        preset = v;
    } else if (key == "attention_mode") {
        attention_mode = parse_attention_mode(v);
    } else if (key == "reference_mode") {
        reference_mode = parse_reference_mode(v);
    } else if (key == "share_cross_qkv") {
        share_cross_qkv = to_bool(key, v);
    } else if (key == "seed") {
        seed = to_uint(key, v);
        schedule.seed = seed;
        synth.seed = seed;
    } else if (key == "data") {
        data = v;
    } else if (key == "pool") {
        pool = v;
    } else if (key == "gt") {
        gt = v;
    } else if (key == "out") {
        out = v;
    } else if (key == "checkpoint") {
        checkpoint = v;
    } else if (key == "loss_csv") {
        loss_csv = v;
    } else if (key == "gamma") {
        schedule.loss.gamma = to_double(key, v);
        schedule.loss.validate();
    } else if (key == "error_target") {
        schedule.loss.error_target = parse_error_target(v);
    } else if (key == "pretrain_iters") {
        schedule.pretrain_iters = to_uint(key, v);
    } else if (key == "finetune_iters") {
        schedule.finetune_iters = to_uint(key, v);
    } else if (key == "pretrain_lr") {
        schedule.pretrain_lr = to_double(key, v);
    } else if (key == "finetune_lr") {
        schedule.finetune_lr = to_double(key, v);
    } else if (key == "batch") {
        schedule.batch = to_uint(key, v);
    } else if (key == "weight_decay") {
        schedule.optimizer.weight_decay = to_double(key, v);
    } else if (key == "hflip") {
        schedule.augment.hflip = to_bool(key, v);
    } else if (key == "crop") {
        schedule.augment.crop = to_uint(key, v);
    } else if (key == "frames") {
        synth.frames = to_uint(key, v);
    } else if (key == "size") {
        synth.size = to_uint(key, v);
    } else if (key == "texture_grain") {
        synth.texture_grain = to_double(key, v);
    } else if (key == "contrast") {
        synth.contrast = to_double(key, v);
    } else if (key == "contrast_variation") {
        synth.contrast_variation = to_double(key, v);
    } else if (key == "motion_amplitude") {
        synth.motion_amplitude = to_double(key, v);
    } else if (key == "occlusion_prob") {
        synth.occlusion_prob = to_double(key, v);
    } else if (key == "min_radius") {
        synth.min_radius = to_double(key, v);
    } else if (key == "max_radius") {
        synth.max_radius = to_double(key, v);
    } else if (key == "sequences") {
        synth_sequences = to_uint(key, v);
    } else if (key == "appearance_seed") {
        synth.appearance_seed = to_uint(key, v);
    } else if (key == "static_images") {
        static_images = to_uint(key, v);
    } else if (key == "static_categories") {
        static_categories = to_uint(key, v);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values) set(k, v);
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg;
    cfg.apply(parse_key_values(ss.str()));
    return cfg;
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m = ModelConfig::from_preset(preset);
    m.set_attention_mode(attention_mode);
    m.set_share_cross_qkv(share_cross_qkv);
    m.decoder.error_target = schedule.loss.error_target;
    m.validate();
    return m;
}

}  // namespace srr
