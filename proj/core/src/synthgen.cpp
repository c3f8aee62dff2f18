#include "alc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace alc {
namespace {

// Sub-stream tags so the generator, the HQ/LQ shuffle and per-sample
// corruption never share state.
constexpr std::uint64_t kStreamSample = 1;
constexpr std::uint64_t kStreamShuffle = 2;
constexpr std::uint64_t kStreamCorrupt = 3;

std::vector<std::pair<int, int>> disc_offsets(int radius) {
    std::vector<std::pair<int, int>> off;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dy * dy + dx * dx <= radius * radius) off.emplace_back(dy, dx);
    return off;
}

std::string sample_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%04d", i);
    return buf;
}

}  // namespace

LabelGrid morph(const LabelGrid& mask, MorphMode mode, int radius) {
    if (radius < 0) throw std::invalid_argument("morph: negative radius");
    const auto off = disc_offsets(radius);
    LabelGrid out(mask.h, mask.w);
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            bool hit = mode == MorphMode::kErode;
            for (const auto& [dy, dx] : off) {
                const int yy = y + dy, xx = x + dx;
                const bool in = yy >= 0 && yy < mask.h && xx >= 0 && xx < mask.w;
                const bool fg = in && mask.at(yy, xx) != 0;
                if (mode == MorphMode::kDilate) {
                    if (fg) { hit = true; break; }
                } else {
                    if (!fg) { hit = false; break; }
                }
            }
            out.at(y, x) = hit ? 1 : 0;
        }
    }
    return out;
}

LabelGrid corrupt_label(const LabelGrid& label, int n_classes, int min_px, int max_px,
                        Rng& rng) {
    if (min_px < 0 || max_px < min_px)
        throw std::invalid_argument("corrupt_label: bad amplitude range");
    constexpr double kTau = 6.283185307179586;
    const int h = label.h, w = label.w;
    const double side = static_cast<double>(std::min(h, w));
    LabelGrid out(h, w);
    for (int c = 1; c < n_classes; ++c) {
        // The warp is drawn before looking at the mask so absent classes
        // consume the same amount of stream.
        const double amp = rng.uniform(min_px, max_px);
        double fy[3], fx[3], ph[3], wt[3], wsum = 0.0;
        for (int j = 0; j < 3; ++j) {
            fy[j] = rng.uniform(0.4, 1.2);
            fx[j] = rng.uniform(0.4, 1.2);
            ph[j] = rng.uniform(0.0, kTau);
            wt[j] = rng.uniform(0.5, 1.0);
            wsum += wt[j];
        }

        const LabelGrid mask = binarize(label, c);
        std::vector<std::pair<int, int>> boundary;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!mask.at(y, x)) continue;
                const bool edge = y == 0 || y == h - 1 || x == 0 || x == w - 1 ||
                                  !mask.at(y - 1, x) || !mask.at(y + 1, x) ||
                                  !mask.at(y, x - 1) || !mask.at(y, x + 1);
                if (edge) boundary.emplace_back(y, x);
            }
        }
        if (boundary.empty()) continue;

        // Each class boundary is displaced by a smooth field of at most
        // `amp` pixels: keep a pixel exactly when its signed distance to
        // the clean boundary stays below the field.
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double d2 = 1e30;
                for (const auto& [by, bx] : boundary) {
                    const double dy = y - by, dx = x - bx;
                    d2 = std::min(d2, dy * dy + dx * dx);
                }
                const double sdf = mask.at(y, x) ? -std::sqrt(d2) : std::sqrt(d2);
                double g = 0.0;
                for (int j = 0; j < 3; ++j)
                    g += wt[j] * std::sin(kTau * (fy[j] * y + fx[j] * x) / side + ph[j]);
                if (sdf <= amp * g / wsum) out.at(y, x) = static_cast<std::uint8_t>(c);
            }
        }
    }
    return out;
}

Dataset make_shapes_dataset(std::uint64_t seed, int n, int h, int w, int n_classes) {
    if (n <= 0 || n_classes < 2)
        throw std::invalid_argument("make_shapes_dataset: bad arguments");
    if (h < 16 || w < 16)
        throw std::invalid_argument("make_shapes_dataset: grid must be at least 16x16");

    Dataset ds;
    ds.h = h;
    ds.w = w;
    ds.n_classes = n_classes;
    ds.seed = seed;

    constexpr double kTau = 6.283185307179586;
    const double side = static_cast<double>(std::min(h, w));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, kStreamSample, static_cast<std::uint64_t>(i)));
        LabelGrid lab(h, w);

        for (int c = 1; c < n_classes; ++c) {
            const int n_shapes = 1 + static_cast<int>(rng.uniform_int(0, 1));
            for (int s = 0; s < n_shapes; ++s) {
                const bool ellipse = rng.uniform_int(0, 1) == 0;
                const double cy = rng.uniform(0.25, 0.75) * h;
                const double cx = rng.uniform(0.25, 0.75) * w;
                // One dominant structure per class, sometimes a satellite.
                const double lo = s == 0 ? 0.16 : 0.08, hi = s == 0 ? 0.28 : 0.14;
                const double ry = rng.uniform(lo, hi) * side;
                const double rx = rng.uniform(lo, hi) * side;
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
                        const bool in = ellipse ? dy * dy + dx * dx <= 1.0
                                                : std::abs(y - cy) <= ry && std::abs(x - cx) <= rx;
                        if (in) lab.at(y, x) = static_cast<std::uint8_t>(c);
                    }
                }
            }
        }

        // Low contrast, an illumination gradient and heavy pixel noise keep
        // the task from being solvable by a global threshold.
        const double bg = rng.uniform(0.25, 0.45);
        const double gap = rng.uniform(0.15, 0.35);
        const double ill_amp = rng.uniform(0.02, 0.07);
        const double ill_fy = rng.uniform(0.3, 1.0);
        const double ill_fx = rng.uniform(0.3, 1.0);
        const double ill_ph = rng.uniform(0.0, kTau);
        const double pix_sigma = rng.uniform(0.08, 0.12);

        Sample smp;
        smp.id = sample_id(i);
        smp.image = Tensor::zeros({h, w});
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int c = lab.at(y, x);
                const double base =
                    c == 0 ? bg : bg + gap * static_cast<double>(c) / (n_classes - 1);
                const double ill =
                    ill_amp * std::sin(kTau * (ill_fy * y + ill_fx * x) / side + ill_ph);
                const double v = std::clamp(base + ill + rng.normal(0.0, pix_sigma), 0.0, 1.0);
                smp.image.at(y, x) = static_cast<double>(static_cast<float>(v));
            }
        }
        smp.label = lab;
        smp.quality = Quality::kLq;
        ds.clean_labels[smp.id] = std::move(lab);
        ds.samples.push_back(std::move(smp));
    }
    return ds;
}

void split_hq_lq(Dataset& ds, double hq_ratio, int noise_min_px, int noise_max_px,
                 std::uint64_t seed) {
    if (hq_ratio <= 0.0 || hq_ratio > 1.0)
        throw std::invalid_argument("split_hq_lq: hq_ratio outside (0,1]");

    const int n = static_cast<int>(ds.samples.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(seed, kStreamShuffle));
    shuffle_rng.shuffle(order);

    const int n_hq = static_cast<int>(std::floor(hq_ratio * n));
    if (n_hq == 0) throw std::invalid_argument("split_hq_lq: hq_ratio leaves no HQ sample");
    std::vector<bool> is_hq(n, false);
    for (int i = 0; i < n_hq; ++i) is_hq[static_cast<std::size_t>(order[i])] = true;

    for (int i = 0; i < n; ++i) {
        Sample& s = ds.samples[static_cast<std::size_t>(i)];
        if (is_hq[static_cast<std::size_t>(i)]) {
            s.quality = Quality::kHq;
            s.label = ds.clean_labels.at(s.id);
        } else {
            s.quality = Quality::kLq;
            Rng rng(mix_seed(seed, kStreamCorrupt, static_cast<std::uint64_t>(i)));
            s.label = corrupt_label(ds.clean_labels.at(s.id), ds.n_classes, noise_min_px,
                                    noise_max_px, rng);
        }
    }
    ds.split_seed = seed;
    ds.hq_ratio = hq_ratio;
    ds.noise_min_px = noise_min_px;
    ds.noise_max_px = noise_max_px;
}

}  // namespace alc
