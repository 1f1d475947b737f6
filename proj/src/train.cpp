#include "srr/train.hpp"

#include <cstdio>
#include <fstream>

#include "srr/error.hpp"

namespace srr {

LossRecord train_step(SrrNet& net, AdamW& opt, const TrainTriplet& batch, const LossConfig& loss) {
    net.parameters().zero_grad();
    const PredictionPair pred = net.forward(batch.input);
    const LossTerms terms = compute_loss(pred, batch.gt, loss);
    require_finite(terms.total, "training loss");
    terms.total.backward();
    for (const Parameter& p : net.parameters().parameters())
        if (p.tensor.has_grad() && !all_finite(p.tensor.grad())) throw NumericError("non-finite gradient in " + p.name);
    opt.step();
    LossRecord r;
    r.total = terms.total.item();
    r.bce = terms.bce.item();
    r.mse = terms.mse.item();
    return r;
}

std::vector<LossRecord> train_model(SrrNet& net, const StaticPool* pool, const std::vector<Sequence>& videos,
                                    const TrainSchedule& schedule,
                                    const std::function<void(const LossRecord&)>& on_record) {
    schedule.loss.validate();
    if (schedule.batch == 0) throw ConfigError("batch size must be positive");
    Rng rng(schedule.seed);
    std::vector<LossRecord> records;
    std::size_t iteration = 0;

    auto run_stage = [&](const char* stage, std::size_t iters, double lr, auto&& sample) {
        if (iters == 0) return;
        AdamWConfig oc = schedule.optimizer;
        oc.lr = lr;
        AdamW opt(net.parameters(), oc);
        for (std::size_t i = 0; i < iters; ++i) {
            std::vector<TrainTriplet> batch;
            for (std::size_t b = 0; b < schedule.batch; ++b) batch.push_back(augment(sample(), schedule.augment, rng));
            LossRecord r = train_step(net, opt, stack_triplets(batch), schedule.loss);
            r.iteration = ++iteration;
            r.stage = stage;
            records.push_back(r);
            if (on_record) on_record(r);
        }
    };

    StaticPool fallback;
    if (schedule.pretrain_iters > 0 && !pool) {
        for (const Sequence& s : videos) {
            if (!s.labeled()) throw ConfigError("sequence '" + s.name + "' has no masks for pretraining");
            for (std::size_t i = 0; i < s.size(); ++i) {
                fallback.names.push_back(s.name + "/" + frame_stem(i));
                fallback.categories.push_back(s.name);
                fallback.images.push_back(s.frames[i]);
                fallback.masks.push_back(s.masks[i]);
            }
        }
        if (fallback.size() == 0) throw ConfigError("pretraining needs a static pool or video frames");
        pool = &fallback;
    }
    run_stage("pretrain", schedule.pretrain_iters, schedule.pretrain_lr, [&] { return sample_static_triplet(*pool, rng); });

    if (schedule.finetune_iters > 0 && videos.empty()) throw ConfigError("fine-tuning needs at least one video");
    run_stage("finetune", schedule.finetune_iters, schedule.finetune_lr, [&] {
        const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(videos.size())));
        return sample_training_triplet(videos[k], rng);
    });
    return records;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "iteration,stage,total,bce,mse\n";
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g\n", r.iteration, r.stage.c_str(), r.total, r.bce, r.mse);
        out << buf;
    }
}

}  // namespace srr
