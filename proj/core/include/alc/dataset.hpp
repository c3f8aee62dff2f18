#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "alc/label_grid.hpp"
#include "alc/tensor.hpp"

namespace alc {

enum class Quality { kHq, kLq };

const char* quality_name(Quality q);
Quality quality_from_name(const std::string& s);

struct Sample {
    std::string id;
    Tensor image;     // (H, W), values in [0,1], float32-representable
    LabelGrid label;  // training label; may carry boundary corruption
    Quality quality = Quality::kLq;
};

struct Dataset {
    int h = 0;
    int w = 0;
    int n_classes = 0;
    std::uint64_t seed = 0;
    // Split/corruption parameters, recorded once split_hq_lq ran.
    std::uint64_t split_seed = 0;
    double hq_ratio = 0.0;
    int noise_min_px = 0;
    int noise_max_px = 0;
    std::vector<Sample> samples;
    // Pristine labels kept alongside for evaluation, keyed by sample id.
    std::map<std::string, LabelGrid> clean_labels;

    const Sample* find(const std::string& id) const;
    std::vector<const Sample*> by_quality(Quality q) const;
};

// On-disk layout: <dir>/manifest.json plus, per sample, <id>.img
// (float32, row-major), <id>.lab and <id>.clean (uint8).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvOffset);

// Hash of every sample payload in manifest order; stable across
// save/load round trips.
std::uint64_t dataset_fingerprint(const Dataset& ds);

}  // namespace alc
