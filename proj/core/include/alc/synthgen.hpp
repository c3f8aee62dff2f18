#pragma once

#include <cstdint>

#include "alc/dataset.hpp"
#include "alc/label_grid.hpp"
#include "alc/rng.hpp"

namespace alc {

enum class MorphMode { kDilate, kErode };

// Binary morphology with a disc structuring element of radius r
// (offsets with dy*dy + dx*dx <= r*r). Outside the grid counts as
// background for both modes.
LabelGrid morph(const LabelGrid& mask, MorphMode mode, int radius);

// Boundary corruption: every foreground class gets an independent
// radius in [min_px, max_px] and a coin flip between dilate and
// erode, then the per-class masks are recomposed in ascending class
// order. Draws happen for every class even when its mask is empty so
// the stream consumed from `rng` does not depend on mask content.
LabelGrid corrupt_label(const LabelGrid& label, int n_classes, int min_px, int max_px,
                        Rng& rng);

// Random ellipses and axis-aligned rectangles (1..3 per foreground
// class) on a flat background, rendered to intensities with additive
// Gaussian noise and quantized to float32. Labels start out clean:
// sample.label == clean_labels[id] for every sample.
Dataset make_shapes_dataset(std::uint64_t seed, int n, int h, int w, int n_classes);

// Marks the first floor(hq_ratio * N) samples of a seeded shuffle as
// high quality (clean label kept); the rest become low quality and
// have their training labels corrupted in place.
void split_hq_lq(Dataset& ds, double hq_ratio, int noise_min_px, int noise_max_px,
                 std::uint64_t seed);

}  // namespace alc
