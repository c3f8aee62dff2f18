#pragma once

#include <filesystem>
#include <vector>

#include <alc/label_grid.hpp>
#include <alc/tensor.hpp>

namespace alc::tools {

// 8-bit binary PGM (P5). Values are clamped to [lo, hi] and scaled.
void write_pgm(const std::filesystem::path& file, const std::vector<double>& values, int h,
               int w, double lo, double hi);

// Grayscale preview of one (H, W) plane; auto-ranged when lo == hi.
void write_plane_pgm(const std::filesystem::path& file, const Tensor& plane);

// Label preview: classes spread evenly over the gray range.
void write_label_pgm(const std::filesystem::path& file, const LabelGrid& label, int n_classes);

}  // namespace alc::tools
