#include "alc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "alc/format.hpp"

namespace alc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Large finite stand-in for "no site"; keeps the envelope arithmetic
// below free of inf - inf. Dominates any real squared distance.
constexpr double kFar = 1e20;

void check_shapes(const LabelGrid& a, const LabelGrid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("metrics: shape mismatch");
}

// Felzenszwalb & Huttenlocher lower-envelope scan for one row/column.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    auto cross = [&](int q, int p) {
        const double qq = static_cast<double>(q) * q, pp = static_cast<double>(p) * p;
        return ((f[static_cast<std::size_t>(q)] + qq) - (f[static_cast<std::size_t>(p)] + pp)) /
               (2.0 * (q - p));
    };
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = cross(q, v[static_cast<std::size_t>(k)]);
        while (s <= z[static_cast<std::size_t>(k)]) {
            --k;
            s = cross(q, v[static_cast<std::size_t>(k)]);
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
        const double dq = q - v[static_cast<std::size_t>(k)];
        d[static_cast<std::size_t>(q)] = dq * dq + f[static_cast<std::size_t>(v[static_cast<std::size_t>(k)])];
    }
}

// NumPy-style percentile with linear interpolation, p in [0, 100].
double percentile(std::vector<double> vals, double p) {
    std::sort(vals.begin(), vals.end());
    const double rank = (static_cast<double>(vals.size()) - 1.0) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    if (lo + 1 >= vals.size()) return vals.back();
    const double frac = rank - static_cast<double>(lo);
    return vals[lo] + frac * (vals[lo + 1] - vals[lo]);
}

// Nearest-surface distances from every surface point of `from` to
// the surface of `to`; nullopt when either surface is empty.
std::optional<std::vector<double>> directed_distances(const LabelGrid& from,
                                                      const LabelGrid& to) {
    const auto src = surface_points(from);
    const auto dst = surface_points(to);
    if (src.empty() || dst.empty()) return std::nullopt;
    const auto sq = squared_edt(from.h, from.w, dst);
    std::vector<double> out;
    out.reserve(src.size());
    for (const auto& [y, x] : src)
        out.push_back(std::sqrt(sq[static_cast<std::size_t>(y) * from.w + x]));
    return out;
}

}  // namespace

double dice(const LabelGrid& pred, const LabelGrid& gt) {
    check_shapes(pred, gt);
    std::size_t np = 0, ng = 0, ni = 0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
        np += p;
        ng += g;
        ni += p && g;
    }
    if (np + ng == 0) return 1.0;
    return 2.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
}

double jaccard(const LabelGrid& pred, const LabelGrid& gt) {
    check_shapes(pred, gt);
    std::size_t ni = 0, nu = 0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
        ni += p && g;
        nu += p || g;
    }
    if (nu == 0) return 1.0;
    return static_cast<double>(ni) / static_cast<double>(nu);
}

std::vector<std::pair<int, int>> surface_points(const LabelGrid& mask) {
    std::vector<std::pair<int, int>> pts;
    auto fg = [&](int y, int x) {
        return y >= 0 && y < mask.h && x >= 0 && x < mask.w && mask.at(y, x) != 0;
    };
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            if (fg(y, x) &&
                (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1)))
                pts.emplace_back(y, x);
    return pts;
}

std::vector<double> squared_edt(int h, int w, const std::vector<std::pair<int, int>>& sites) {
    std::vector<double> grid(static_cast<std::size_t>(h) * w, kFar);
    for (const auto& [y, x] : sites) {
        if (y < 0 || y >= h || x < 0 || x >= w)
            throw std::invalid_argument("squared_edt: site outside grid");
        grid[static_cast<std::size_t>(y) * w + x] = 0.0;
    }

    std::vector<double> f(static_cast<std::size_t>(h)), d(static_cast<std::size_t>(h));
    std::vector<int> v(static_cast<std::size_t>(h));
    std::vector<double> z(static_cast<std::size_t>(h) + 1);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y)
            f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
        edt_1d(f, d, v, z);
        for (int y = 0; y < h; ++y)
            grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
    }

    f.resize(static_cast<std::size_t>(w));
    d.resize(static_cast<std::size_t>(w));
    v.resize(static_cast<std::size_t>(w));
    z.resize(static_cast<std::size_t>(w) + 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            f[static_cast<std::size_t>(x)] = grid[static_cast<std::size_t>(y) * w + x];
        edt_1d(f, d, v, z);
        for (int x = 0; x < w; ++x)
            grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(x)];
    }
    return grid;
}

std::optional<double> hd95(const LabelGrid& pred, const LabelGrid& gt) {
    check_shapes(pred, gt);
    const auto ab = directed_distances(pred, gt);
    const auto ba = directed_distances(gt, pred);
    if (!ab || !ba) return std::nullopt;
    return std::max(percentile(*ab, 95.0), percentile(*ba, 95.0));
}

std::optional<double> asd(const LabelGrid& pred, const LabelGrid& gt) {
    check_shapes(pred, gt);
    const auto ab = directed_distances(pred, gt);
    const auto ba = directed_distances(gt, pred);
    if (!ab || !ba) return std::nullopt;
    double sum = 0.0;
    for (double v : *ab) sum += v;
    for (double v : *ba) sum += v;
    return sum / static_cast<double>(ab->size() + ba->size());
}

MetricsReport compare_labels(const LabelGrid& pred, const LabelGrid& ref, int n_classes) {
    check_shapes(pred, ref);
    if (n_classes < 2) throw std::invalid_argument("compare_labels: need n_classes >= 2");

    MetricsReport rep;
    double dsum = 0.0, jsum = 0.0, hsum = 0.0, asum = 0.0;
    int n_h = 0, n_a = 0;
    for (int c = 1; c < n_classes; ++c) {
        const LabelGrid p = binarize(pred, c), g = binarize(ref, c);
        ClassMetrics m;
        m.dice = dice(p, g);
        m.jaccard = jaccard(p, g);
        m.hd95 = hd95(p, g);
        m.asd = asd(p, g);
        dsum += m.dice;
        jsum += m.jaccard;
        if (m.hd95) { hsum += *m.hd95; ++n_h; }
        if (m.asd) { asum += *m.asd; ++n_a; }
        rep.per_class[c] = m;
    }
    const double nfg = static_cast<double>(n_classes - 1);
    rep.overall.dice = dsum / nfg;
    rep.overall.jaccard = jsum / nfg;
    if (n_h > 0) rep.overall.hd95 = hsum / n_h;
    if (n_a > 0) rep.overall.asd = asum / n_a;
    return rep;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<SampleMetricsRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "# hd95 and asd are in pixel units\n";
    f << "id,class,dice,jaccard,hd95,asd\n";

    double dsum = 0.0, jsum = 0.0, hsum = 0.0, asum = 0.0;
    std::size_t n = 0, n_h = 0, n_a = 0;
    for (const auto& row : rows) {
        for (const auto& [c, m] : row.report.per_class) {
            f << row.id << ',' << c << ',' << fmt_double(m.dice) << ',' << fmt_double(m.jaccard)
              << ',' << fmt_opt(m.hd95) << ',' << fmt_opt(m.asd) << '\n';
            dsum += m.dice;
            jsum += m.jaccard;
            if (m.hd95) { hsum += *m.hd95; ++n_h; }
            if (m.asd) { asum += *m.asd; ++n_a; }
            ++n;
        }
    }
    std::optional<double> hm, am;
    if (n_h > 0) hm = hsum / static_cast<double>(n_h);
    if (n_a > 0) am = asum / static_cast<double>(n_a);
    const double dn = n > 0 ? static_cast<double>(n) : 1.0;
    f << "__mean__,all," << fmt_double(dsum / dn) << ',' << fmt_double(jsum / dn) << ','
      << fmt_opt(hm) << ',' << fmt_opt(am) << '\n';
}

}  // namespace alc
