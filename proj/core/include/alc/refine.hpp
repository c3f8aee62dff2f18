#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alc/label_grid.hpp"
#include "alc/net.hpp"
#include "alc/tensor.hpp"

namespace alc {

// KL form used for the per-pass uncertainty: class-summed KL (a
// proper nonnegative divergence) or the literal single-term variant
// kept for comparison (it can go negative).
enum class KlForm { kSummed, kPrinted };

struct ProbStack {
    std::string sample_id;
    int m = 0;
    int h = 0;
    int w = 0;
    int c = 0;
    Tensor probs;                      // (m,H,W,C)
    std::vector<std::uint64_t> seeds;  // per-pass forward seeds

    Tensor slice(int j) const;  // (H,W,C) copy of pass j
};

// m stochastic teacher passes with seeds derived from master_seed.
// base_mode supplies sigma and dropout rate; its kind and seed are
// ignored (passes are always stochastic).
ProbStack perturbed_stack(const ModelState& teacher, const Tensor& image, int m,
                          const ForwardMode& base_mode, std::uint64_t master_seed,
                          const std::string& sample_id);

Tensor stack_mean(const ProbStack& stack);  // (H,W,C)

// Per-pixel divergence of member from mean, both clamped to [eps,1]
// before the logs. Returns (H,W).
Tensor voxel_kl(const Tensor& mean, const Tensor& member, KlForm form = KlForm::kSummed);

struct UncertaintyMaps {
    Tensor mean;  // (H,W,C)
    Tensor kl;    // (m,H,W)
};

UncertaintyMaps uncertainty_maps(const ProbStack& stack, KlForm form = KlForm::kSummed);

// Fused vector F = (1/m) sum_j w_j psi_j with per-pixel weights
// w_j = softmax_j(-KL_j); kl is (m,H,W) as produced by
// uncertainty_maps.
Tensor fuse_refined(const ProbStack& stack, const Tensor& kl);

// argmax of the fused vector, ties toward the lower class index.
LabelGrid refine_label(const ProbStack& stack, KlForm form = KlForm::kSummed);

LabelGrid argmax_label(const Tensor& prob);  // (H,W,C) -> per-pixel argmax

}  // namespace alc
