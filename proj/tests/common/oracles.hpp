#pragma once

// Independent reference implementations used to cross-check the library:
// everything here is deliberately written the slow, obvious way.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <alc/label_grid.hpp>

namespace oracle {

inline std::vector<std::pair<int, int>> surface(const alc::LabelGrid& mask) {
    std::vector<std::pair<int, int>> pts;
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            if (mask.at(y, x) == 0) continue;
            const bool edge = y == 0 || y == mask.h - 1 || x == 0 || x == mask.w - 1 ||
                              mask.at(y - 1, x) == 0 || mask.at(y + 1, x) == 0 ||
                              mask.at(y, x - 1) == 0 || mask.at(y, x + 1) == 0;
            if (edge) pts.emplace_back(y, x);
        }
    return pts;
}

// Multiset of nearest-neighbor distances from each point of a to b.
inline std::vector<double> directed_distances(const std::vector<std::pair<int, int>>& a,
                                              const std::vector<std::pair<int, int>>& b) {
    std::vector<double> out;
    out.reserve(a.size());
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) {
            const double dy = p.first - q.first, dx = p.second - q.second;
            best = std::min(best, dy * dy + dx * dx);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

// Linear interpolation between order statistics, like the library.
inline double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

inline double hd95(const alc::LabelGrid& a, const alc::LabelGrid& b) {
    const auto sa = surface(a), sb = surface(b);
    return std::max(percentile(directed_distances(sa, sb), 95.0),
                    percentile(directed_distances(sb, sa), 95.0));
}

inline double asd(const alc::LabelGrid& a, const alc::LabelGrid& b) {
    const auto sa = surface(a), sb = surface(b);
    const auto dab = directed_distances(sa, sb), dba = directed_distances(sb, sa);
    double sum = 0.0;
    for (double d : dab) sum += d;
    for (double d : dba) sum += d;
    return sum / static_cast<double>(dab.size() + dba.size());
}

}  // namespace oracle
