#include "alc/refine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "alc/losses.hpp"

namespace alc {
namespace {

void check_stack(const ProbStack& s) {
    if (s.m < 2) throw std::invalid_argument("ProbStack: m must be >= 2");
    if (s.probs.rank() != 4 || s.probs.dim(0) != s.m || s.probs.dim(1) != s.h ||
        s.probs.dim(2) != s.w || s.probs.dim(3) != s.c)
        throw std::invalid_argument("ProbStack: inconsistent shape");
}

}  // namespace

Tensor ProbStack::slice(int j) const {
    Tensor out = Tensor::zeros({h, w, c});
    const std::size_t n = out.numel();
    std::copy_n(probs.data.begin() + static_cast<std::ptrdiff_t>(n) * j, n, out.data.begin());
    return out;
}

ProbStack perturbed_stack(const ModelState& teacher, const Tensor& image, int m,
                          const ForwardMode& base_mode, std::uint64_t master_seed,
                          const std::string& sample_id) {
    if (m < 2) throw std::invalid_argument("perturbed_stack: m must be >= 2");

    ProbStack stack;
    stack.sample_id = sample_id;
    stack.m = m;
    stack.seeds.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        stack.seeds[static_cast<std::size_t>(j)] = mix_seed(master_seed, static_cast<std::uint64_t>(j));

    // Shape probe; slices are independent and fill disjoint ranges.
    ForwardMode mode = base_mode;
    mode.kind = ForwardKind::kStochastic;
    mode.rng_seed = stack.seeds[0];
    Tensor first = forward(teacher, image, mode);
    stack.h = first.dim(0);
    stack.w = first.dim(1);
    stack.c = first.dim(2);
    stack.probs = Tensor::zeros({m, stack.h, stack.w, stack.c});
    const std::size_t n = first.numel();
    std::copy(first.data.begin(), first.data.end(), stack.probs.data.begin());

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int j = 1; j < m; ++j) {
        ForwardMode mj = base_mode;
        mj.kind = ForwardKind::kStochastic;
        mj.rng_seed = stack.seeds[static_cast<std::size_t>(j)];
        const Tensor out = forward(teacher, image, mj);
        std::copy(out.data.begin(), out.data.end(),
                  stack.probs.data.begin() + static_cast<std::ptrdiff_t>(n) * j);
    }
    return stack;
}

Tensor stack_mean(const ProbStack& stack) {
    check_stack(stack);
    Tensor mean = Tensor::zeros({stack.h, stack.w, stack.c});
    const std::size_t n = mean.numel();
    for (int j = 0; j < stack.m; ++j) {
        const double* src = stack.probs.data.data() + static_cast<std::size_t>(j) * n;
        for (std::size_t i = 0; i < n; ++i) mean.data[i] += src[i];
    }
    for (double& v : mean.data) v /= stack.m;
    return mean;
}

Tensor voxel_kl(const Tensor& mean, const Tensor& member, KlForm form) {
    if (mean.rank() != 3 || !mean.same_shape(member))
        throw std::invalid_argument("voxel_kl: shape mismatch");
    const int h = mean.dim(0), w = mean.dim(1), c = mean.dim(2);
    Tensor out = Tensor::zeros({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < c; ++k) {
                const double p = std::clamp(mean.at(y, x, k), kProbClamp, 1.0);
                const double q = std::clamp(member.at(y, x, k), kProbClamp, 1.0);
                const double term = p * std::log(p / q);
                if (form == KlForm::kSummed) {
                    acc += term;
                } else if (k == c - 1) {
                    // literal single-term form, read as the binary
                    // foreground probability (last channel)
                    acc = term;
                }
            }
            out.at(y, x) = acc;
        }
    return out;
}

UncertaintyMaps uncertainty_maps(const ProbStack& stack, KlForm form) {
    check_stack(stack);
    UncertaintyMaps maps;
    maps.mean = stack_mean(stack);
    maps.kl = Tensor::zeros({stack.m, stack.h, stack.w});
    const std::size_t n = static_cast<std::size_t>(stack.h) * stack.w;
    for (int j = 0; j < stack.m; ++j) {
        const Tensor kl = voxel_kl(maps.mean, stack.slice(j), form);
        std::copy(kl.data.begin(), kl.data.end(),
                  maps.kl.data.begin() + static_cast<std::ptrdiff_t>(n) * j);
    }
    return maps;
}

Tensor fuse_refined(const ProbStack& stack, const Tensor& kl) {
    check_stack(stack);
    if (kl.rank() != 3 || kl.dim(0) != stack.m || kl.dim(1) != stack.h || kl.dim(2) != stack.w)
        throw std::invalid_argument("fuse_refined: kl shape mismatch");

    Tensor fused = Tensor::zeros({stack.h, stack.w, stack.c});
    std::vector<double> wj(static_cast<std::size_t>(stack.m));
    for (int y = 0; y < stack.h; ++y)
        for (int x = 0; x < stack.w; ++x) {
            // softmax over passes of -KL, stabilized by the min KL
            double lo = kl.at(0, y, x);
            for (int j = 1; j < stack.m; ++j) lo = std::min(lo, kl.at(j, y, x));
            double z = 0.0;
            for (int j = 0; j < stack.m; ++j) {
                wj[static_cast<std::size_t>(j)] = std::exp(lo - kl.at(j, y, x));
                z += wj[static_cast<std::size_t>(j)];
            }
            for (int c = 0; c < stack.c; ++c) {
                double f = 0.0;
                for (int j = 0; j < stack.m; ++j)
                    f += wj[static_cast<std::size_t>(j)] / z * stack.probs.at(j, y, x, c);
                fused.at(y, x, c) = f / stack.m;
            }
        }
    return fused;
}

LabelGrid refine_label(const ProbStack& stack, KlForm form) {
    const UncertaintyMaps maps = uncertainty_maps(stack, form);
    return argmax_label(fuse_refined(stack, maps.kl));
}

LabelGrid argmax_label(const Tensor& prob) {
    if (prob.rank() != 3) throw std::invalid_argument("argmax_label: need (H,W,C)");
    const int h = prob.dim(0), w = prob.dim(1), c = prob.dim(2);
    LabelGrid out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double bv = prob.at(y, x, 0);
            for (int k = 1; k < c; ++k)
                if (prob.at(y, x, k) > bv) {  // strict: ties stay at the lower class
                    bv = prob.at(y, x, k);
                    best = k;
                }
            out.at(y, x) = static_cast<std::uint8_t>(best);
        }
    return out;
}

}  // namespace alc
