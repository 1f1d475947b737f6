#include "srr/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "srr/error.hpp"

namespace srr {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'R', 'P', 'A', 'R', 'A', 'M'};

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes(b) {}
    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw ParseError("truncated checkpoint", pos);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return s;
    }
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.out.insert(w.out.end(), std::begin(kMagic), std::end(kMagic));
    w.u32(Checkpoint::kVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
    for (const auto& [k, v] : ckpt.metadata) {
        w.str(k);
        w.str(v);
    }
    w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) w.u64(d);
        for (double v : t.values()) w.f64(v);
    }
    return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    r.need(sizeof(kMagic));
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw ParseError("bad checkpoint magic", 0);
    r.pos = sizeof(kMagic);
    const std::size_t version_at = r.pos;
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::kVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version), version_at);
    }
    Checkpoint ckpt;
    const std::uint32_t n_meta = r.u32();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = r.str();
        ckpt.metadata[k] = r.str();
    }
    const std::uint32_t n_params = r.u32();
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string name = r.str();
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        const std::size_t n = shape_numel(shape);
        r.need(n * 8);
        std::vector<double> values(n);
        for (double& v : values) v = r.f64();
        ckpt.tensors.emplace_back(std::move(name), Tensor::from_values(shape, std::move(values)));
    }
    if (r.pos != bytes.size()) throw ParseError("trailing bytes after checkpoint", r.pos);
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::map<std::string, std::string>& metadata) {
    Checkpoint ckpt;
    ckpt.metadata = metadata;
    for (const auto& p : store.parameters()) ckpt.tensors.emplace_back(p.name, p.tensor);
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

void assign_parameters(ParameterStore& store, const Checkpoint& ckpt) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
    for (const auto& p : store.parameters()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw ConfigError("checkpoint lacks parameter '" + p.name + "'");
        if (it->second->shape() != p.tensor.shape()) {
            throw ConfigError("checkpoint parameter '" + p.name + "' has shape " + shape_str(it->second->shape()) +
                              ", model expects " + shape_str(p.tensor.shape()));
        }
        Tensor dst = p.tensor;
        auto src = it->second->values();
        std::copy(src.begin(), src.end(), dst.mutable_values().begin());
    }
    if (by_name.size() != store.parameters().size()) {
        throw ConfigError("checkpoint holds parameters the model does not define");
    }
}

}  // namespace srr
