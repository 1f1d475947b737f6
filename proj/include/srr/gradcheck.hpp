#pragma once

#include <functional>
#include <string>
#include <vector>

#include "srr/loss.hpp"
#include "srr/model.hpp"

namespace srr {

struct GradcheckOptions {
    std::size_t size = 32;  // square input extent of the random triplet
    std::uint64_t seed = 7;
    double step = 1e-4;                  // central-difference half step
    double tolerance = 1e-3;             // max accepted relative error
    double floor = 1e-7;                 // denominator floor for near-zero gradients
    std::size_t max_elements_per_tensor = 0;  // 0 checks every element
    double jitter = 0.1;  // stddev of seeded noise added to every parameter for the check, then undone
    LossConfig loss;
    std::function<void(const std::string& name, std::size_t done, std::size_t total)> progress;
};

struct ParameterCheck {
    std::string name;
    std::size_t checked = 0;
    double max_rel = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;  // at worst_index
    double numeric = 0.0;
};

struct GradcheckReport {
    std::vector<ParameterCheck> parameters;
    std::size_t elements = 0;
    double max_rel = 0.0;
    std::string worst;
    double seconds = 0.0;
    double tolerance = 0.0;

    bool passed() const { return elements > 0 && max_rel < tolerance; }
};

/// Random triplet plus a binary ground truth of the given square extent.
struct GradcheckSample {
    FrameTriplet input;
    Tensor gt;
};
GradcheckSample random_gradcheck_sample(std::size_t size, std::uint64_t seed);

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Compares backward-pass gradients of the full training loss against
/// central finite differences for the parameters of `net`. Values behind a
/// stop-gradient (the mask logits fed to the error head, the error target)
/// are held at their unperturbed values, matching what backward sees.
GradcheckReport gradcheck_model(SrrNet& net, const GradcheckOptions& opts);

}  // namespace srr
