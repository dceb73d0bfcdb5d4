#include "oodrl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "oodrl/csvfmt.hpp"

namespace oodrl {

namespace {

constexpr double kLogFloor = 1e-12;
constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kMarginL = 80.0;
constexpr double kMarginR = 30.0;
constexpr double kMarginT = 50.0;
constexpr double kMarginB = 60.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string coord(double v) {
    // fixed two-decimal pixel coordinates keep the output compact and stable
    const double r = std::round(v * 100.0) / 100.0;
    return fmt_double(r);
}

}  // namespace

void emit_series_plot(const std::vector<PlotSeries>& series, const std::string& path,
                      const std::string& title, const std::string& y_label) {
    if (series.empty()) throw std::invalid_argument("emit_series_plot: no series");
    bool any_point = false;
    for (const auto& s : series) any_point |= !s.points.empty();
    if (!any_point) throw std::invalid_argument("emit_series_plot: no data points");

    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    bool clamped = false;
    auto clamp_y = [&clamped](double y) {
        if (y <= kLogFloor) {
            clamped = true;
            return kLogFloor;
        }
        return y;
    };
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            const double yc = clamp_y(y);
            y_min = std::min(y_min, yc);
            y_max = std::max(y_max, yc);
        }
    if (clamped)
        std::cerr << "emit_series_plot: values <= 0 clamped to " << kLogFloor
                  << " for the log axis\n";
    if (x_min == x_max) {
        x_min -= 1.0;
        x_max += 1.0;
    }
    double ly_min = std::floor(std::log10(y_min));
    double ly_max = std::ceil(std::log10(y_max));
    if (ly_min == ly_max) {
        ly_min -= 1.0;
        ly_max += 1.0;
    }

    const double plot_w = kWidth - kMarginL - kMarginR;
    const double plot_h = kHeight - kMarginT - kMarginB;
    auto px = [&](double x) { return kMarginL + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) {
        const double ly = std::log10(clamp_y(y));
        return kMarginT + (ly_max - ly) / (ly_max - ly_min) * plot_h;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"18\" "
        << "font-family=\"sans-serif\">" << title << "</text>\n";

    // axes
    svg << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
        << "\" y2=\"" << kMarginT + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT + plot_h << "\" x2=\""
        << kMarginL + plot_w << "\" y2=\"" << kMarginT + plot_h << "\" stroke=\"black\"/>\n";

    // y ticks at powers of ten
    for (double e = ly_min; e <= ly_max + 0.5; e += 1.0) {
        const double y = py(std::pow(10.0, e));
        svg << "<line x1=\"" << kMarginL - 5 << "\" y1=\"" << coord(y) << "\" x2=\"" << kMarginL
            << "\" y2=\"" << coord(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << kMarginL - 9 << "\" y=\"" << coord(y + 4)
            << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">1e"
            << static_cast<long long>(e) << "</text>\n";
    }
    // x ticks: five evenly spaced
    for (int t = 0; t <= 4; ++t) {
        const double x = x_min + (x_max - x_min) * t / 4.0;
        svg << "<line x1=\"" << coord(px(x)) << "\" y1=\"" << kMarginT + plot_h << "\" x2=\""
            << coord(px(x)) << "\" y2=\"" << kMarginT + plot_h + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << coord(px(x)) << "\" y=\"" << kMarginT + plot_h + 20
            << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
            << fmt_double(std::round(x)) << "</text>\n";
    }
    svg << "<text x=\"" << kMarginL + plot_w / 2 << "\" y=\"" << kHeight - 14
        << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">"
        << "training episode</text>\n";
    svg << "<text x=\"20\" y=\"" << kMarginT + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 20 " << kMarginT + plot_h / 2 << ")\">" << y_label
        << "</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        if (series[s].points.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& [x, y] : series[s].points)
                svg << coord(px(x)) << "," << coord(py(y)) << " ";
            svg << "\"/>\n";
        }
        for (const auto& [x, y] : series[s].points)
            svg << "<circle cx=\"" << coord(px(x)) << "\" cy=\"" << coord(py(y))
                << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        // legend entry
        const double ly = kMarginT + 8 + 18.0 * static_cast<double>(s);
        svg << "<line x1=\"" << kMarginL + plot_w - 150 << "\" y1=\"" << coord(ly) << "\" x2=\""
            << kMarginL + plot_w - 125 << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << kMarginL + plot_w - 120 << "\" y=\"" << coord(ly + 4)
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << series[s].label
            << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("emit_series_plot: cannot open " + path);
    out << svg.str();
    if (!out) throw std::runtime_error("emit_series_plot: write failed for " + path);
}

void emit_plot(const std::vector<MetricsRow>& metrics, const std::string& path) {
    if (metrics.empty()) throw std::invalid_argument("emit_plot: empty metrics list");
    PlotSeries train{"train", {}}, mirror{"mirror", {}};
    for (const auto& row : metrics) {
        train.points.emplace_back(static_cast<double>(row.snapshot_episode), row.train_mean_epi);
        mirror.points.emplace_back(static_cast<double>(row.snapshot_episode), row.mirror_mean_epi);
    }
    emit_series_plot({train, mirror}, path, "Per-episode mean uncertainty of chosen actions",
                     "mean epistemic variance");
}

void emit_compare_plot(const std::vector<std::pair<std::string, std::vector<MetricsRow>>>& runs,
                       const std::string& path) {
    if (runs.empty()) throw std::invalid_argument("emit_compare_plot: no runs");
    std::vector<PlotSeries> series;
    for (const auto& [label, metrics] : runs) {
        PlotSeries train{label + ":train", {}}, mirror{label + ":mirror", {}};
        for (const auto& row : metrics) {
            train.points.emplace_back(static_cast<double>(row.snapshot_episode),
                                      row.train_mean_epi);
            mirror.points.emplace_back(static_cast<double>(row.snapshot_episode),
                                       row.mirror_mean_epi);
        }
        series.push_back(std::move(train));
        series.push_back(std::move(mirror));
    }
    emit_series_plot(series, path, "Mean uncertainty of chosen actions (comparison)",
                     "mean epistemic variance");
}

}  // namespace oodrl
