#pragma once

#include <string>
#include <vector>

#include "fsrlab/tensor.hpp"

namespace fsrlab {

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
    std::vector<double> yerr; // optional stderr band
};

/// Self-contained line chart (one polyline per series, optional error
/// bars); CSV files are the contract, these are for quick inspection.
void write_line_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series);

/// K x K matrix as a shaded grid with the value range in the caption.
void write_heatmap_svg(const std::string& path, const std::string& title, const Tensor& m);

} // namespace fsrlab
