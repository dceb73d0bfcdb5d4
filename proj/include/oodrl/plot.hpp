#pragma once

#include <string>
#include <utility>
#include <vector>

#include "oodrl/eval.hpp"

namespace oodrl {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (episode, value)
};

// Deterministic SVG line plot with a log-scaled y axis. Values at or below
// zero are clamped to 1e-12 with a warning on stderr.
void emit_series_plot(const std::vector<PlotSeries>& series, const std::string& path,
                      const std::string& title, const std::string& y_label);

// Train and mirror mean epistemic uncertainty vs snapshot episode.
void emit_plot(const std::vector<MetricsRow>& metrics, const std::string& path);

// Overlay of several metrics files (train and mirror curve per label).
void emit_compare_plot(const std::vector<std::pair<std::string, std::vector<MetricsRow>>>& runs,
                       const std::string& path);

}  // namespace oodrl
