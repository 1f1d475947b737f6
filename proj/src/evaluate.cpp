#include "srr/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "srr/dataset.hpp"
#include "srr/error.hpp"
#include "srr/image.hpp"

namespace srr {

namespace fs = std::filesystem;

namespace {

Grid read_gray(const fs::path& path) {
    const Image img = read_pnm(path);
    if (img.channels != 1) throw ConfigError(path.string() + ": expected a gray (P5) map");
    Grid g(img.height, img.width);
    for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = img.pixels[i] / 255.0;
    return g;
}

Grid binarize(Grid g) {
    for (double& v : g.values) v = v >= 0.5 ? 1.0 : 0.0;
    return g;
}

std::vector<std::size_t> mask_indices(const fs::path& dir) {
    std::vector<std::size_t> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const fs::path p = e.path();
        const std::string stem = p.stem().string();
        if (p.extension() != ".pgm" || stem.size() != 5 || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
        out.push_back(std::stoul(stem));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

FrameMetrics evaluate_frame(const Grid& soft, const Grid& binary, const Grid& gt) {
    FrameMetrics m;
    m.s_alpha = s_measure(soft, gt);
    m.f_w = weighted_fbeta(soft, gt);
    m.mae = mae(binary, gt);
    m.dice = dice(binary, gt);
    m.iou = iou(binary, gt);
    return m;
}

MetricSummary summarize(const std::vector<FrameMetrics>& frames) {
    MetricSummary s;
    std::size_t with_f = 0;
    for (const auto& f : frames) {
        s.s_alpha += f.s_alpha;
        s.mae += f.mae;
        s.mdice += f.dice;
        s.miou += f.iou;
        if (f.f_w) {
            s.f_w += *f.f_w;
            ++with_f;
        } else {
            ++s.f_skipped;
        }
    }
    s.frames = frames.size();
    if (s.frames > 0) {
        const double n = static_cast<double>(s.frames);
        s.s_alpha /= n;
        s.mae /= n;
        s.mdice /= n;
        s.miou /= n;
    }
    if (with_f > 0) s.f_w /= static_cast<double>(with_f);
    return s;
}

MetricSummary macro_average(const std::vector<SequenceReport>& sequences) {
    MetricSummary m;
    std::size_t with_f = 0;
    for (const auto& s : sequences) {
        m.s_alpha += s.summary.s_alpha;
        m.mae += s.summary.mae;
        m.mdice += s.summary.mdice;
        m.miou += s.summary.miou;
        if (s.summary.f_skipped < s.summary.frames) {
            m.f_w += s.summary.f_w;
            ++with_f;
        }
        m.frames += s.summary.frames;
        m.f_skipped += s.summary.f_skipped;
    }
    if (!sequences.empty()) {
        const double n = static_cast<double>(sequences.size());
        m.s_alpha /= n;
        m.mae /= n;
        m.mdice /= n;
        m.miou /= n;
    }
    if (with_f > 0) m.f_w /= static_cast<double>(with_f);
    return m;
}

MetricReport evaluate_dataset(const fs::path& pred_root, const fs::path& gt_root, const EvalOptions& opts) {
    if (!fs::is_directory(gt_root)) throw IoError("not a directory: " + gt_root.string());
    if (!fs::is_directory(pred_root)) throw IoError("not a directory: " + pred_root.string());
    std::vector<fs::path> gt_dirs;
    for (const auto& e : fs::directory_iterator(gt_root))
        if (e.is_directory() && !mask_indices(e.path()).empty()) gt_dirs.push_back(e.path());
    std::sort(gt_dirs.begin(), gt_dirs.end());
    if (gt_dirs.empty()) throw ConfigError(gt_root.string() + ": no ground-truth sequences");

    MetricReport report;
    for (const fs::path& gdir : gt_dirs) {
        const std::string name = gdir.filename().string();
        const fs::path pdir = pred_root / name;
        const bool nested = fs::is_directory(pdir / "mask");
        const fs::path mask_dir = nested ? pdir / "mask" : pdir;
        const fs::path prob_dir = pdir / "prob";
        std::vector<FrameMetrics> frames;
        for (std::size_t idx : mask_indices(gdir)) {
            const std::string file = frame_stem(idx) + ".pgm";
            if (!fs::exists(mask_dir / file)) {
                report.missing.push_back(name + "/" + file);
                continue;
            }
            const Grid gt = binarize(read_gray(gdir / file));
            const Grid binary = binarize(read_gray(mask_dir / file));
            const Grid soft = nested && fs::exists(prob_dir / file) ? read_gray(prob_dir / file) : binary;
            FrameMetrics m = evaluate_frame(soft, binary, gt);
            m.sequence = name;
            m.frame = idx;
            frames.push_back(m);
        }
        if (!frames.empty()) report.sequences.push_back({name, summarize(frames)});
        report.frames.insert(report.frames.end(), frames.begin(), frames.end());
    }
    if (!report.missing.empty() && !opts.allow_missing) {
        std::string list;
        for (std::size_t i = 0; i < report.missing.size() && i < 10; ++i) list += "\n  " + report.missing[i];
        if (report.missing.size() > 10) list += "\n  ...";
        throw ConfigError(std::to_string(report.missing.size()) + " prediction(s) missing:" + list);
    }
    if (report.frames.empty()) throw ConfigError("no frames to evaluate");
    report.macro = macro_average(report.sequences);
    report.flat = summarize(report.frames);
    return report;
}

void write_metrics_csv(const fs::path& path, const MetricReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "sequence,frame,s_alpha,f_w,mae,dice,iou\n";
    char buf[256];
    for (const auto& f : report.frames) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,", f.sequence.c_str(), f.frame, f.s_alpha);
        out << buf;
        if (f.f_w) {
            std::snprintf(buf, sizeof buf, "%.17g", *f.f_w);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", f.mae, f.dice, f.iou);
        out << buf;
    }
}

std::string format_report(const MetricReport& report, bool flat_primary) {
    std::size_t width = 8;
    for (const auto& s : report.sequences) width = std::max(width, s.name.size());
    std::string out;
    char buf[256];
    auto row = [&](const std::string& name, const MetricSummary& m) {
        std::snprintf(buf, sizeof buf, "%-*s %7zu %8.4f %8.4f %8.4f %8.4f %8.4f\n", static_cast<int>(width), name.c_str(),
                      m.frames, m.s_alpha, m.f_w, m.mae, m.mdice, m.miou);
        out += buf;
    };
    std::snprintf(buf, sizeof buf, "%-*s %7s %8s %8s %8s %8s %8s\n", static_cast<int>(width), "sequence", "frames",
                  "S_alpha", "F_w", "MAE", "mDice", "mIoU");
    out += buf;
    for (const auto& s : report.sequences) row(s.name, s.summary);
    if (flat_primary) {
        row("flat", report.flat);
        row("macro", report.macro);
    } else {
        row("macro", report.macro);
        row("flat", report.flat);
    }
    if (report.macro.f_skipped > 0) {
        out += std::to_string(report.macro.f_skipped) + " frame(s) with empty ground truth excluded from F_w\n";
    }
    if (!report.missing.empty()) out += std::to_string(report.missing.size()) + " prediction(s) missing\n";
    return out;
}

}  // namespace srr
