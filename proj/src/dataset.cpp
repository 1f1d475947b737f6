#include "srr/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "srr/error.hpp"
#include "srr/image.hpp"

namespace srr {

namespace fs = std::filesystem;

std::string frame_stem(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    return buf;
}

Sequence load_sequence(const fs::path& dir, bool require_masks) {
    if (!fs::is_directory(dir)) throw IoError("not a sequence directory: " + dir.string());
    Sequence seq;
    seq.name = dir.filename().string();
    for (std::size_t i = 0;; ++i) {
        const fs::path frame = dir / (frame_stem(i) + ".ppm");
        if (!fs::exists(frame)) break;
        seq.frames.push_back(read_frame(frame));
        const fs::path mask = dir / (frame_stem(i) + ".pgm");
        if (fs::exists(mask)) {
            if (seq.masks.size() != i) throw ConfigError(dir.string() + ": masks missing before " + mask.string());
            seq.masks.push_back(read_mask(mask));
        } else if (require_masks) {
            throw ConfigError(dir.string() + ": missing mask " + mask.filename().string());
        }
        if (seq.frames.back().shape() != seq.frames.front().shape()) {
            throw ConfigError(dir.string() + ": frame " + frame_stem(i) + " changes size");
        }
    }
    if (seq.frames.empty()) throw ConfigError(dir.string() + ": no frames named 00000.ppm onwards");
    if (!seq.masks.empty() && seq.masks.size() != seq.frames.size()) {
        throw ConfigError(dir.string() + ": " + std::to_string(seq.masks.size()) + " masks for " +
                          std::to_string(seq.frames.size()) + " frames");
    }
    return seq;
}

void save_sequence(const fs::path& dir, const Sequence& seq) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        write_pnm(dir / (frame_stem(i) + ".ppm"), tensor_to_image(seq.frames[i]));
        if (i < seq.masks.size()) write_mask(dir / (frame_stem(i) + ".pgm"), seq.masks[i]);
    }
}

std::vector<fs::path> sequence_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "00000.ppm")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::vector<Sequence> load_dataset(const fs::path& root, bool require_masks) {
    std::vector<Sequence> out;
    if (fs::exists(root / "00000.ppm")) {
        out.push_back(load_sequence(root, require_masks));
        return out;
    }
    for (const auto& d : sequence_dirs(root)) out.push_back(load_sequence(d, require_masks));
    if (out.empty()) throw ConfigError(root.string() + ": no sequence directories found");
    return out;
}

StaticPool load_static_pool(const fs::path& dir) {
    std::ifstream in(dir / "categories.txt");
    if (!in) throw IoError("missing manifest " + (dir / "categories.txt").string());
    StaticPool pool;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string stem, category, extra;
        if (!(ls >> stem >> category) || (ls >> extra)) {
            throw ConfigError("categories.txt line " + std::to_string(lineno) + ": expected '<stem> <category>'");
        }
        pool.names.push_back(stem);
        pool.categories.push_back(category);
        pool.images.push_back(read_frame(dir / (stem + ".ppm")));
        pool.masks.push_back(read_mask(dir / (stem + ".pgm")));
    }
    if (pool.images.empty()) throw ConfigError(dir.string() + ": empty static pool");
    return pool;
}

void save_static_pool(const fs::path& dir, const StaticPool& pool) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream manifest(dir / "categories.txt");
    if (!manifest) throw IoError("cannot write " + (dir / "categories.txt").string());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        write_pnm(dir / (pool.names[i] + ".ppm"), tensor_to_image(pool.images[i]));
        write_mask(dir / (pool.names[i] + ".pgm"), pool.masks[i]);
        manifest << pool.names[i] << ' ' << pool.categories[i] << '\n';
    }
}

}  // namespace srr
