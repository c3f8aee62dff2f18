#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alc/label_grid.hpp"

namespace alc {

// Overlap scores on binary masks; a pair of empty masks scores 1.
double dice(const LabelGrid& pred, const LabelGrid& gt);
double jaccard(const LabelGrid& pred, const LabelGrid& gt);

// Foreground pixels with at least one 4-neighbor outside the
// foreground; the grid border counts as outside.
std::vector<std::pair<int, int>> surface_points(const LabelGrid& mask);

// Surface-to-surface distances in pixel units. hd95 is the max of
// the two directed 95th percentiles (linear interpolation between
// order statistics); asd pools both directed multisets into one
// mean. Empty masks make the metric non-computable -> nullopt.
std::optional<double> hd95(const LabelGrid& pred, const LabelGrid& gt);
std::optional<double> asd(const LabelGrid& pred, const LabelGrid& gt);

struct ClassMetrics {
    double dice = 0.0;
    double jaccard = 0.0;
    std::optional<double> hd95;
    std::optional<double> asd;
};

struct MetricsReport {
    // Mean across foreground classes; distance fields average the
    // computable classes only.
    ClassMetrics overall;
    std::map<int, ClassMetrics> per_class;
};

MetricsReport compare_labels(const LabelGrid& pred, const LabelGrid& ref, int n_classes);

struct SampleMetricsRow {
    std::string id;
    MetricsReport report;
};

// One row per sample and foreground class, then a trailing __mean__
// row. Non-computable distances serialize as "nan".
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<SampleMetricsRow>& rows);

// Exact Euclidean distance transform (squared distances) of a site
// indicator grid; sites are (y, x) pairs. Exposed for testing.
std::vector<double> squared_edt(int h, int w, const std::vector<std::pair<int, int>>& sites);

}  // namespace alc
