#pragma once

#include <vector>

#include "alc/label_grid.hpp"
#include "alc/tensor.hpp"

namespace alc {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDiceSmooth = 1e-5;

struct LossSpec {
    double alpha = 3.0;
    double beta = 2.0;
    double lambda_now = 0.0;
    bool use_hs = true;
    bool use_ls = true;
    bool use_n = true;
    bool use_c = true;
};

// prob tensors are (H, W, C) with per-pixel rows on the simplex.
// *_grad variants return dLoss/dprob with the same shape and are the
// exact derivatives of the clamped/smoothed forward expressions.

double cross_entropy(const Tensor& prob, const LabelGrid& label);
Tensor cross_entropy_grad(const Tensor& prob, const LabelGrid& label);

double soft_dice_loss(const Tensor& prob, const LabelGrid& label);
Tensor soft_dice_grad(const Tensor& prob, const LabelGrid& label);

double seg_loss(const Tensor& prob, const LabelGrid& label);
Tensor seg_loss_grad(const Tensor& prob, const LabelGrid& label);

// Batch means of seg_loss. The HQ batch must be nonempty; the other
// two report an empty batch as an exact 0 contribution.
double hq_loss(const std::vector<Tensor>& probs, const std::vector<LabelGrid>& labels);
double lq_loss(const std::vector<Tensor>& probs, const std::vector<LabelGrid>& refined);
double noisy_loss(const std::vector<Tensor>& probs, const std::vector<LabelGrid>& targets);

// teacher_stack is (m, H, W, C): m stochastic teacher passes. The
// loss is the pixel-mean Euclidean norm between the stack mean and
// the student output.
double consistency_loss(const Tensor& teacher_stack, const Tensor& student_prob);
Tensor consistency_grad(const Tensor& teacher_stack, const Tensor& student_prob);

// Gaussian ramp exp(-5 (1 - min(t/t_ramp, 1))^2); reaches 1 at t_ramp.
double lambda_ramp(int t, int t_ramp);

double total_loss(double l_hs, double l_ls, double l_n, double l_c, const LossSpec& spec);

}  // namespace alc
