#include "srr/infer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "srr/error.hpp"
#include "srr/image.hpp"

namespace srr {

DirectoryFrameSource::DirectoryFrameSource(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) throw IoError("not a sequence directory: " + dir_.string());
    while (std::filesystem::exists(dir_ / (frame_stem(count_) + ".ppm"))) ++count_;
}

Tensor DirectoryFrameSource::frame(std::size_t index) {
    if (index >= count_) throw UsageError("frame index out of range");
    return read_frame(dir_ / (frame_stem(index) + ".ppm"));
}

std::vector<StepResult> infer_sequence(FrameSource& frames, Predictor& predictor, const InferOptions& opts,
                                       const std::function<void(const StepResult&)>& sink) {
    const std::size_t n = frames.size();
    if (n == 0) throw ConfigError("cannot run inference on an empty sequence");
    InferenceSession session(predictor, opts.reference_mode, opts.seed);
    std::vector<StepResult> results;
    results.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const Tensor frame = frames.frame(t);
        if (t == 0) session.init(frame);
        results.push_back(session.step(frame));
        if (sink) sink(results.back());
    }
    return results;
}

double mask_mae(const Tensor& mask, const Tensor& gt) {
    if (mask.shape() != gt.shape()) {
        throw DimensionError("mask " + shape_str(mask.shape()) + " and ground truth " + shape_str(gt.shape()) +
                             " disagree");
    }
    const auto a = mask.values(), b = gt.values();
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(a.size());
}

std::vector<ScoreRow> score_trace(const std::vector<StepResult>& results, const std::vector<Tensor>& gt) {
    if (!gt.empty() && gt.size() != results.size()) throw ConfigError("ground truth count does not match frame count");
    std::vector<ScoreRow> rows;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const StepResult& r = results[i];
        ScoreRow row{r.frame_index, r.score, std::nullopt, r.updated, r.ref_frame_index};
        if (!gt.empty()) row.true_mae = mask_mae(r.mask, gt[i]);
        rows.push_back(row);
    }
    return rows;
}

void write_score_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "frame_index,score,true_mae,updated,ref_frame_index\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,", r.frame_index, r.score);
        out << buf;
        if (r.true_mae) {
            std::snprintf(buf, sizeof buf, "%.17g", *r.true_mae);
            out << buf;
        }
        out << ',' << (r.updated ? 1 : 0) << ',' << r.ref_frame_index << '\n';
    }
}

std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "frame_index,score,true_mae,updated,ref_frame_index") throw ConfigError(path.string() + ": bad header");
    std::vector<ScoreRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (line.back() == ',') cols.emplace_back();
        if (cols.size() != 5) throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": expected 5 columns");
        try {
            ScoreRow r;
            r.frame_index = std::stoul(cols[0]);
            r.score = std::stod(cols[1]);
            if (!cols[2].empty()) r.true_mae = std::stod(cols[2]);
            r.updated = cols[3] == "1";
            r.ref_frame_index = std::stoul(cols[4]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

}  // namespace srr
