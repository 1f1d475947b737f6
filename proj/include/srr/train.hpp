#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "srr/loss.hpp"
#include "srr/model.hpp"
#include "srr/optim.hpp"
#include "srr/sampling.hpp"

namespace srr {

struct TrainSchedule {
    std::size_t pretrain_iters = 0;   // static-image stage
    std::size_t finetune_iters = 200;  // video stage
    double pretrain_lr = 6e-5;
    double finetune_lr = 1e-5;
    std::size_t batch = 1;
    AdamWConfig optimizer;  // lr is replaced per stage
    LossConfig loss;
    AugmentConfig augment;
    std::uint64_t seed = 1;
};

struct LossRecord {
    std::size_t iteration = 0;  // global, counted from 1
    std::string stage;          // "pretrain" or "finetune"
    double total = 0.0;
    double bce = 0.0;
    double mse = 0.0;
};

/// Static pretraining on `pool` (falls back to the video frames, one category
/// per sequence, when `pool` is null), then fine-tuning on `videos`.
std::vector<LossRecord> train_model(SrrNet& net, const StaticPool* pool, const std::vector<Sequence>& videos,
                                    const TrainSchedule& schedule,
                                    const std::function<void(const LossRecord&)>& on_record = {});

/// One optimizer step on a batch; returns the loss terms before the update.
LossRecord train_step(SrrNet& net, AdamW& opt, const TrainTriplet& batch, const LossConfig& loss);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& records);

}  // namespace srr
