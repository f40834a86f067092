#include "fsrlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fsrlab {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(5) << v;
    return ss.str();
}

} // namespace

void write_line_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);

    const double W = 640, H = 420, L = 70, R = 200, T = 40, B = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double err = i < s.yerr.size() ? s.yerr[i] : 0.0;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - err);
            ymax = std::max(ymax, s.y[i] + err);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' font-family='sans-serif' font-size='12'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << (L + (W - L - R) / 2) << "' y='20' text-anchor='middle' "
        << "font-size='15'>" << title << "</text>\n";

    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        out << "<line x1='" << L << "' y1='" << py(yv) << "' x2='" << (W - R) << "' y2='"
            << py(yv) << "' stroke='#dddddd'/>\n";
        out << "<text x='" << (L - 6) << "' y='" << (py(yv) + 4)
            << "' text-anchor='end'>" << fmt(yv) << "</text>\n";
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        out << "<text x='" << px(xv) << "' y='" << (H - B + 18)
            << "' text-anchor='middle'>" << fmt(xv) << "</text>\n";
    }
    out << "<line x1='" << L << "' y1='" << py(ymin) << "' x2='" << (W - R) << "' y2='"
        << py(ymin) << "' stroke='black'/>\n";
    out << "<line x1='" << L << "' y1='" << py(ymin) << "' x2='" << L << "' y2='" << py(ymax)
        << "' stroke='black'/>\n";
    out << "<text x='" << (L + (W - L - R) / 2) << "' y='" << (H - 10)
        << "' text-anchor='middle'>" << x_label << "</text>\n";
    out << "<text x='18' y='" << (T + (H - T - B) / 2)
        << "' text-anchor='middle' transform='rotate(-90 18 " << (T + (H - T - B) / 2)
        << ")'>" << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 10];
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i)
            pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
        out << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
            << "' stroke-width='2'/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
                << "' r='3' fill='" << color << "'/>\n";
            if (i < s.yerr.size() && s.yerr[i] > 0) {
                out << "<line x1='" << px(s.x[i]) << "' y1='" << py(s.y[i] - s.yerr[i])
                    << "' x2='" << px(s.x[i]) << "' y2='" << py(s.y[i] + s.yerr[i])
                    << "' stroke='" << color << "'/>\n";
            }
        }
        const double ly = T + 18 * double(si);
        out << "<rect x='" << (W - R + 14) << "' y='" << (ly - 9)
            << "' width='12' height='12' fill='" << color << "'/>\n";
        out << "<text x='" << (W - R + 32) << "' y='" << (ly + 2) << "'>" << s.label
            << "</text>\n";
    }
    out << "</svg>\n";
}

void write_heatmap_svg(const std::string& path, const std::string& title, const Tensor& m) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    const std::size_t rows = m.rows(), cols = m.cols();
    const double cell = 28, L = 60, T = 50;
    const double W = L + cell * double(cols) + 30, H = T + cell * double(rows) + 40;

    float lo = m.data.empty() ? 0.0f : m.data[0], hi = lo;
    for (float v : m.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi > lo ? hi - lo : 1.0f;

    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' font-family='sans-serif' font-size='11'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << (W / 2) << "' y='20' text-anchor='middle' font-size='14'>" << title
        << " [" << fmt(double(lo)) << ", " << fmt(double(hi)) << "]</text>\n";
    for (std::size_t r = 0; r < rows; ++r) {
        out << "<text x='" << (L - 8) << "' y='" << (T + cell * double(r) + cell / 2 + 4)
            << "' text-anchor='end'>" << r << "</text>\n";
        for (std::size_t c = 0; c < cols; ++c) {
            if (r == 0)
                out << "<text x='" << (L + cell * double(c) + cell / 2) << "' y='" << (T - 8)
                    << "' text-anchor='middle'>" << c << "</text>\n";
            const double v = (double(m.at(r, c)) - lo) / span;
            const int shade = int(std::lround(255.0 * (1.0 - v)));
            out << "<rect x='" << (L + cell * double(c)) << "' y='" << (T + cell * double(r))
                << "' width='" << cell << "' height='" << cell << "' fill='rgb(" << shade
                << "," << shade << ",255)' stroke='#cccccc'/>\n";
        }
    }
    out << "</svg>\n";
}

} // namespace fsrlab
