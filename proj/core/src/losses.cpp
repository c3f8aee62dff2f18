#include "alc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace alc {
namespace {

void check_prob_label(const Tensor& prob, const LabelGrid& label) {
    if (prob.rank() != 3) throw std::invalid_argument("loss: prob must be (H,W,C)");
    if (prob.dim(0) != label.h || prob.dim(1) != label.w)
        throw std::invalid_argument("loss: prob/label shape mismatch");
    for (auto v : label.v)
        if (v >= prob.dim(2)) throw std::invalid_argument("loss: label class out of range");
}

double batch_mean(const std::vector<Tensor>& probs, const std::vector<LabelGrid>& labels) {
    if (probs.size() != labels.size())
        throw std::invalid_argument("loss: batch size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) sum += seg_loss(probs[i], labels[i]);
    return sum / static_cast<double>(probs.size());
}

}  // namespace

double cross_entropy(const Tensor& prob, const LabelGrid& label) {
    check_prob_label(prob, label);
    const int h = prob.dim(0), w = prob.dim(1);
    double sum = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double p = prob.at(y, x, label.at(y, x));
            sum += -std::log(std::clamp(p, kProbClamp, 1.0));
        }
    return sum / static_cast<double>(h * w);
}

Tensor cross_entropy_grad(const Tensor& prob, const LabelGrid& label) {
    check_prob_label(prob, label);
    const int h = prob.dim(0), w = prob.dim(1);
    Tensor g = Tensor::zeros(prob.shape);
    const double inv_n = 1.0 / static_cast<double>(h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int c = label.at(y, x);
            const double p = prob.at(y, x, c);
            // The clamp gates the gradient: outside (eps, 1) the
            // forward value is constant in p.
            if (p >= kProbClamp && p <= 1.0) g.at(y, x, c) = -inv_n / p;
        }
    return g;
}

double soft_dice_loss(const Tensor& prob, const LabelGrid& label) {
    check_prob_label(prob, label);
    const int h = prob.dim(0), w = prob.dim(1), nc = prob.dim(2);
    double acc = 0.0;
    for (int c = 0; c < nc; ++c) {
        double s_pg = 0.0, s_p = 0.0, s_g = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double p = prob.at(y, x, c);
                const double g = label.at(y, x) == c ? 1.0 : 0.0;
                s_pg += p * g;
                s_p += p;
                s_g += g;
            }
        acc += (2.0 * s_pg + kDiceSmooth) / (s_p + s_g + kDiceSmooth);
    }
    return 1.0 - acc / static_cast<double>(nc);
}

Tensor soft_dice_grad(const Tensor& prob, const LabelGrid& label) {
    check_prob_label(prob, label);
    const int h = prob.dim(0), w = prob.dim(1), nc = prob.dim(2);
    Tensor grad = Tensor::zeros(prob.shape);
    for (int c = 0; c < nc; ++c) {
        double s_pg = 0.0, s_p = 0.0, s_g = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double p = prob.at(y, x, c);
                const double g = label.at(y, x) == c ? 1.0 : 0.0;
                s_pg += p * g;
                s_p += p;
                s_g += g;
            }
        const double den = s_p + s_g + kDiceSmooth;
        const double num = 2.0 * s_pg + kDiceSmooth;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double g = label.at(y, x) == c ? 1.0 : 0.0;
                grad.at(y, x, c) = -(2.0 * g * den - num) / (den * den * nc);
            }
    }
    return grad;
}

double seg_loss(const Tensor& prob, const LabelGrid& label) {
    return 0.5 * (cross_entropy(prob, label) + soft_dice_loss(prob, label));
}

Tensor seg_loss_grad(const Tensor& prob, const LabelGrid& label) {
    Tensor g = cross_entropy_grad(prob, label);
    const Tensor d = soft_dice_grad(prob, label);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = 0.5 * (g.data[i] + d.data[i]);
    return g;
}

double hq_loss(const std::vector<Tensor>& probs, const std::vector<LabelGrid>& labels) {
    if (probs.empty()) throw std::invalid_argument("hq_loss: empty batch");
    return batch_mean(probs, labels);
}

double lq_loss(const std::vector<Tensor>& probs, const std::vector<LabelGrid>& refined) {
    if (probs.empty()) return 0.0;
    return batch_mean(probs, refined);
}

double noisy_loss(const std::vector<Tensor>& probs, const std::vector<LabelGrid>& targets) {
    if (probs.empty()) return 0.0;
    return batch_mean(probs, targets);
}

double consistency_loss(const Tensor& teacher_stack, const Tensor& student_prob) {
    if (teacher_stack.rank() != 4 || student_prob.rank() != 3 ||
        teacher_stack.dim(1) != student_prob.dim(0) ||
        teacher_stack.dim(2) != student_prob.dim(1) ||
        teacher_stack.dim(3) != student_prob.dim(2))
        throw std::invalid_argument("consistency_loss: shape mismatch");
    const int m = teacher_stack.dim(0), h = student_prob.dim(0), w = student_prob.dim(1),
              nc = student_prob.dim(2);
    double sum = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sq = 0.0;
            for (int c = 0; c < nc; ++c) {
                double t = 0.0;
                for (int j = 0; j < m; ++j) t += teacher_stack.at(j, y, x, c);
                const double d = t / m - student_prob.at(y, x, c);
                sq += d * d;
            }
            sum += std::sqrt(sq);
        }
    return sum / static_cast<double>(h * w);
}

Tensor consistency_grad(const Tensor& teacher_stack, const Tensor& student_prob) {
    const int m = teacher_stack.dim(0), h = student_prob.dim(0), w = student_prob.dim(1),
              nc = student_prob.dim(2);
    Tensor grad = Tensor::zeros(student_prob.shape);
    const double inv_n = 1.0 / static_cast<double>(h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sq = 0.0;
            std::vector<double> diff(static_cast<std::size_t>(nc));
            for (int c = 0; c < nc; ++c) {
                double t = 0.0;
                for (int j = 0; j < m; ++j) t += teacher_stack.at(j, y, x, c);
                diff[static_cast<std::size_t>(c)] = t / m - student_prob.at(y, x, c);
                sq += diff[static_cast<std::size_t>(c)] * diff[static_cast<std::size_t>(c)];
            }
            const double norm = std::sqrt(sq);
            if (norm == 0.0) continue;  // subgradient 0 at the kink
            for (int c = 0; c < nc; ++c)
                grad.at(y, x, c) = -diff[static_cast<std::size_t>(c)] / norm * inv_n;
        }
    return grad;
}

double lambda_ramp(int t, int t_ramp) {
    if (t < 0 || t_ramp <= 0) throw std::invalid_argument("lambda_ramp: bad step args");
    const double frac = std::min(static_cast<double>(t) / t_ramp, 1.0);
    const double gap = 1.0 - frac;
    return std::exp(-5.0 * gap * gap);
}

double total_loss(double l_hs, double l_ls, double l_n, double l_c, const LossSpec& spec) {
    for (double v : {l_hs, l_ls, l_n, l_c, spec.alpha, spec.beta, spec.lambda_now})
        if (!std::isfinite(v)) throw std::invalid_argument("total_loss: non-finite input");
    const double hs = spec.use_hs ? l_hs : 0.0;
    const double ls = spec.use_ls ? l_ls : 0.0;
    const double n = spec.use_n ? l_n : 0.0;
    const double c = spec.use_c ? l_c : 0.0;
    return hs + spec.lambda_now * (spec.alpha * ls + spec.beta * n + c);
}

}  // namespace alc
