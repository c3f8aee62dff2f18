#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <alc/format.hpp>

namespace alc::tools {
namespace {

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kLeft = 70.0, kRight = 30.0, kTop = 50.0, kBottom = 60.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

// Tick step of the form {1, 2, 2.5, 5} * 10^k.
double nice_step(double span, int target) {
    const double raw = span / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    double step = 10.0;
    if (r <= 1.0) step = 1.0;
    else if (r <= 2.0) step = 2.0;
    else if (r <= 2.5) step = 2.5;
    else if (r <= 5.0) step = 5.0;
    return step * mag;
}

std::string tick_text(double v) {
    if (std::abs(v) < 1e-12) return "0";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

struct Range {
    double lo = 0.0, hi = 1.0;
    void widen(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

// Five-stop blue -> yellow ramp for heatmap cells.
std::string ramp_color(double t) {
    static const double stops[5][3] = {{68, 1, 84},
                                       {59, 82, 139},
                                       {33, 145, 140},
                                       {94, 201, 98},
                                       {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const int i = std::min(3, static_cast<int>(t));
    const double f = t - i;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                  static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                  static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                  static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
    return buf;
}

std::ofstream open_svg(const std::filesystem::path& file, const std::string& title) {
    std::ofstream f(file, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << esc(title) << "</text>\n";
    return f;
}

void axis_labels(std::ofstream& f, const std::string& xlabel, const std::string& ylabel) {
    f << "<text x=\"" << (kLeft + (kWidth - kLeft - kRight) / 2) << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << esc(xlabel) << "</text>\n";
    f << "<text x=\"18\" y=\"" << (kTop + (kHeight - kTop - kBottom) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << (kTop + (kHeight - kTop - kBottom) / 2) << ")\">"
      << esc(ylabel) << "</text>\n";
}

}  // namespace

void write_line_chart(const std::filesystem::path& file, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series) {
    Range rx, ry;
    bool any = false;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("write_line_chart: x/y length mismatch");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (!any) {
                rx.lo = rx.hi = s.x[i];
                ry.lo = ry.hi = s.y[i];
                any = true;
            }
            rx.widen(s.x[i]);
            ry.widen(s.y[i]);
        }
    }
    if (!any) throw std::invalid_argument("write_line_chart: no finite data");
    if (rx.hi == rx.lo) rx.hi = rx.lo + 1.0;
    if (ry.hi == ry.lo) ry.hi = ry.lo + 1.0;
    const double pad = 0.04 * (ry.hi - ry.lo);
    ry.lo -= pad;
    ry.hi += pad;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
    auto sy = [&](double v) { return kTop + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

    std::ofstream f = open_svg(file, title);
    const double xstep = nice_step(rx.hi - rx.lo, 6), ystep = nice_step(ry.hi - ry.lo, 5);
    for (double v = std::ceil(rx.lo / xstep) * xstep; v <= rx.hi + 1e-9 * xstep; v += xstep) {
        f << "<line x1=\"" << sx(v) << "\" y1=\"" << kTop << "\" x2=\"" << sx(v) << "\" y2=\""
          << kTop + ph << "\" stroke=\"#e0e0e0\"/>\n";
        f << "<text x=\"" << sx(v) << "\" y=\"" << kTop + ph + 18
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
          << tick_text(v) << "</text>\n";
    }
    for (double v = std::ceil(ry.lo / ystep) * ystep; v <= ry.hi + 1e-9 * ystep; v += ystep) {
        f << "<line x1=\"" << kLeft << "\" y1=\"" << sy(v) << "\" x2=\"" << kLeft + pw
          << "\" y2=\"" << sy(v) << "\" stroke=\"#e0e0e0\"/>\n";
        f << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(v) + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
          << tick_text(v) << "</text>\n";
    }
    f << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"#404040\"/>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % kPaletteSize];
        bool open = false;
        std::string d;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                open = false;
                continue;
            }
            d += open ? " L" : " M";
            d += fmt_double(sx(s.x[i])) + ' ' + fmt_double(sy(s.y[i]));
            open = true;
        }
        if (!d.empty())
            f << "<path d=\"" << d.substr(1) << "\" fill=\"none\" stroke=\"" << color
              << "\" stroke-width=\"1.6\"/>\n";
        const double ly = kTop + 14 + 16.0 * static_cast<double>(si);
        f << "<line x1=\"" << kLeft + pw - 130 << "\" y1=\"" << ly << "\" x2=\""
          << kLeft + pw - 110 << "\" y2=\"" << ly << "\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
        f << "<text x=\"" << kLeft + pw - 104 << "\" y=\"" << ly + 4
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << esc(s.label)
          << "</text>\n";
    }
    axis_labels(f, xlabel, ylabel);
    f << "</svg>\n";
}

void write_heatmap(const std::filesystem::path& file, const std::string& title,
                   const std::string& xlabel, const std::string& ylabel,
                   const std::vector<std::string>& x_ticks,
                   const std::vector<std::string>& y_ticks,
                   const std::vector<double>& values) {
    const std::size_t nx = x_ticks.size(), ny = y_ticks.size();
    if (nx == 0 || ny == 0 || values.size() != nx * ny)
        throw std::invalid_argument("write_heatmap: grid size mismatch");
    double lo = 0.0, hi = 1.0;
    bool any = false;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        if (!any) {
            lo = hi = v;
            any = true;
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!any) throw std::invalid_argument("write_heatmap: no finite data");
    if (hi == lo) hi = lo + 1.0;

    const double pw = kWidth - kLeft - kRight - 60.0, ph = kHeight - kTop - kBottom;
    const double cw = pw / static_cast<double>(nx), ch = ph / static_cast<double>(ny);
    std::ofstream f = open_svg(file, title);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double v = values[iy * nx + ix];
            const double x = kLeft + cw * static_cast<double>(ix);
            const double y = kTop + ph - ch * static_cast<double>(iy + 1);
            if (std::isfinite(v)) {
                f << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw
                  << "\" height=\"" << ch << "\" fill=\"" << ramp_color((v - lo) / (hi - lo))
                  << "\"/>\n";
                f << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4
                  << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
                  << "fill=\"white\">" << tick_text(v) << "</text>\n";
            } else {
                f << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw
                  << "\" height=\"" << ch << "\" fill=\"#f0f0f0\"/>\n";
            }
        }
    }
    for (std::size_t ix = 0; ix < nx; ++ix)
        f << "<text x=\"" << kLeft + cw * (static_cast<double>(ix) + 0.5) << "\" y=\""
          << kTop + ph + 18
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
          << esc(x_ticks[ix]) << "</text>\n";
    for (std::size_t iy = 0; iy < ny; ++iy)
        f << "<text x=\"" << kLeft - 6 << "\" y=\""
          << kTop + ph - ch * (static_cast<double>(iy) + 0.5) + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
          << esc(y_ticks[iy]) << "</text>\n";
    f << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"#404040\"/>\n";

    for (int i = 0; i <= 40; ++i) {
        const double t = static_cast<double>(i) / 40.0;
        f << "<rect x=\"" << kLeft + pw + 24 << "\" y=\"" << kTop + ph * (1.0 - t)
          << "\" width=\"16\" height=\"" << ph / 40.0 + 1.0 << "\" fill=\"" << ramp_color(t)
          << "\"/>\n";
    }
    f << "<text x=\"" << kLeft + pw + 44 << "\" y=\"" << kTop + ph + 4
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << tick_text(lo) << "</text>\n";
    f << "<text x=\"" << kLeft + pw + 44 << "\" y=\"" << kTop + 8
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << tick_text(hi) << "</text>\n";
    axis_labels(f, xlabel, ylabel);
    f << "</svg>\n";
}

}  // namespace alc::tools
