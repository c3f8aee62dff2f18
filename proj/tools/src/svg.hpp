#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace alc::tools {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Self-contained line chart; points with non-finite coordinates break the
// polyline. Throws when no finite point exists.
void write_line_chart(const std::filesystem::path& file, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series);

// Heatmap over a small grid; cells holding NaN are left blank. values is
// row-major, rows running along y_ticks.
void write_heatmap(const std::filesystem::path& file, const std::string& title,
                   const std::string& xlabel, const std::string& ylabel,
                   const std::vector<std::string>& x_ticks,
                   const std::vector<std::string>& y_ticks,
                   const std::vector<double>& values);

}  // namespace alc::tools
