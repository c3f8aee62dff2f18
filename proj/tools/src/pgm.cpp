#include "pgm.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace alc::tools {

void write_pgm(const std::filesystem::path& file, const std::vector<double>& values, int h,
               int w, double lo, double hi) {
    if (h < 1 || w < 1 || values.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("write_pgm: bad dimensions");
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    f << "P5\n" << w << ' ' << h << "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = (values[static_cast<std::size_t>(y) * w + x] - lo) / span;
            row[static_cast<std::size_t>(x)] =
                static_cast<std::uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
        }
        f.write(reinterpret_cast<const char*>(row.data()), w);
    }
    if (!f) throw std::runtime_error("short write on " + file.string());
}

void write_plane_pgm(const std::filesystem::path& file, const Tensor& plane) {
    if (plane.rank() != 2) throw std::invalid_argument("write_plane_pgm: rank != 2");
    double lo = plane.data.empty() ? 0.0 : plane.data[0];
    double hi = lo;
    for (double v : plane.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    write_pgm(file, plane.data, plane.dim(0), plane.dim(1), lo, hi);
}

void write_label_pgm(const std::filesystem::path& file, const LabelGrid& label,
                     int n_classes) {
    std::vector<double> v(label.v.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = label.v[i];
    write_pgm(file, v, label.h, label.w, 0.0, std::max(1, n_classes - 1));
}

}  // namespace alc::tools
