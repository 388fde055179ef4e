#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmstab/csv.hpp"
#include "pmstab/errors.hpp"
#include "pmstab/instability.hpp"
#include "pmstab/precision.hpp"

namespace pmstab {

struct SmoothCurve {
    std::vector<double> grid;
    std::vector<double> values;
    double span = 0.75;
};

// Local linear regression with tricube weights over the nearest
// ceil(span * N) neighbours, evaluated on a fixed 100-point grid spanning the
// observed x range. Fitted values are clamped to the data's y range so the
// envelope never overshoots the inputs.
inline SmoothCurve lowess(std::span<const double> xs, std::span<const double> ys, double span = 0.75) {
    if (xs.size() != ys.size()) throw DimensionMismatch("lowess: x/y length mismatch");
    if (xs.size() < 10) throw Error(ErrorKind::numerical, "TooFewPoints: lowess needs >= 10 points");
    if (!(span > 0.0 && span <= 1.0)) throw DomainError("lowess: span must be in (0,1]");

    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> sx(n), sy(n);
    for (std::size_t i = 0; i < n; ++i) {
        sx[i] = xs[order[i]];
        sy[i] = ys[order[i]];
    }
    const double ymin = *std::min_element(sy.begin(), sy.end());
    const double ymax = *std::max_element(sy.begin(), sy.end());
    const std::size_t k = std::min(n, static_cast<std::size_t>(std::ceil(span * static_cast<double>(n))));

    SmoothCurve curve;
    curve.span = span;
    const int grid_points = 100;
    curve.grid.resize(grid_points);
    curve.values.resize(grid_points);
    const double x0 = sx.front(), x1 = sx.back();
    std::size_t lo = 0;
    for (int g = 0; g < grid_points; ++g) {
        const double gx = grid_points == 1 ? x0 : x0 + (x1 - x0) * g / (grid_points - 1);
        // slide the k-window right while the next point is nearer than the leftmost
        while (lo + k < n && (sx[lo + k] - gx) < (gx - sx[lo])) ++lo;
        double dmax = 0.0;
        for (std::size_t i = lo; i < lo + k; ++i) dmax = std::max(dmax, std::abs(sx[i] - gx));
        double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
        for (std::size_t i = lo; i < lo + k; ++i) {
            double w = 1.0;
            if (dmax > 0.0) {
                const double u = std::abs(sx[i] - gx) / dmax;
                const double t = 1.0 - u * u * u;
                w = t * t * t;
            }
            sw += w;
            swx += w * sx[i];
            swy += w * sy[i];
            swxx += w * sx[i] * sx[i];
            swxy += w * sx[i] * sy[i];
        }
        const double det = sw * swxx - swx * swx;
        double fit;
        if (std::abs(det) < 1e-12 * std::max(1.0, sw * swxx)) {
            fit = swy / sw; // window has no x spread: weighted mean
        } else {
            const double b = (sw * swxy - swx * swy) / det;
            const double a = (swy - b * swx) / sw;
            fit = a + b * gx;
        }
        curve.grid[static_cast<std::size_t>(g)] = gx;
        curve.values[static_cast<std::size_t>(g)] = std::clamp(fit, ymin, ymax);
    }
    return curve;
}

struct PlotOutput {
    std::string svg;
    std::string csv;
};

namespace plotdetail {

constexpr double kWidth = 640.0, kHeight = 480.0;
constexpr double kLeft = 62.0, kRight = 18.0, kTop = 26.0, kBottom = 52.0;

struct Frame {
    double ymax; // data y range is [0, ymax]; x range is always [0, 1]

    double px(double x) const { return kLeft + x * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y / ymax) * (kHeight - kTop - kBottom); }
};

inline std::string px_str(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline void open_svg(std::string& s, const std::string& title) {
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
    s += "<text x=\"320\" y=\"17\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         title + "</text>\n";
}

inline void axes(std::string& s, const Frame& f, const std::string& xlabel, const std::string& ylabel,
                 double ytick_step) {
    s += "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
    s += "<line x1=\"" + px_str(f.px(0)) + "\" y1=\"" + px_str(f.py(0)) + "\" x2=\"" + px_str(f.px(1)) +
         "\" y2=\"" + px_str(f.py(0)) + "\"/>\n";
    s += "<line x1=\"" + px_str(f.px(0)) + "\" y1=\"" + px_str(f.py(0)) + "\" x2=\"" + px_str(f.px(0)) +
         "\" y2=\"" + px_str(f.py(f.ymax)) + "\"/>\n";
    s += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double x = i / 5.0;
        s += "<line x1=\"" + px_str(f.px(x)) + "\" y1=\"" + px_str(f.py(0)) + "\" x2=\"" + px_str(f.px(x)) +
             "\" y2=\"" + px_str(f.py(0) + 4) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + px_str(f.px(x)) + "\" y=\"" + px_str(f.py(0) + 17) + "\" text-anchor=\"middle\">" +
             px_str(x) + "</text>\n";
    }
    for (double y = 0.0; y <= f.ymax + 1e-12; y += ytick_step) {
        s += "<line x1=\"" + px_str(f.px(0) - 4) + "\" y1=\"" + px_str(f.py(y)) + "\" x2=\"" + px_str(f.px(0)) +
             "\" y2=\"" + px_str(f.py(y)) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + px_str(f.px(0) - 7) + "\" y=\"" + px_str(f.py(y) + 4) +
             "\" text-anchor=\"end\">" + px_str(y) + "</text>\n";
    }
    s += "<text x=\"" + px_str((f.px(0) + f.px(1)) / 2) + "\" y=\"" + px_str(kHeight - 14) +
         "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
    s += "<text x=\"16\" y=\"" + px_str((f.py(0) + f.py(f.ymax)) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + px_str((f.py(0) + f.py(f.ymax)) / 2) +
         ")\">" + ylabel + "</text>\n";
    s += "</g>\n";
}

inline void polyline(std::string& s, const Frame& f, std::span<const double> xs,
                     std::span<const double> ys, const std::string& style) {
    s += "<polyline fill=\"none\" " + style + " points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ' ';
        s += px_str(f.px(xs[i])) + "," + px_str(f.py(ys[i]));
    }
    s += "\"/>\n";
}

// Deterministic thinning keeps SVGs reviewable for very large populations.
inline std::size_t plot_stride(std::size_t n, std::size_t max_points) {
    return n <= max_points ? 1 : (n + max_points - 1) / max_points;
}

} // namespace plotdetail

// True risk (x) against the per-individual uncertainty interval (y), drawn as
// vertical segments, with the identity line and optional smoothed envelope
// curves through the interval bounds.
inline PlotOutput prediction_instability_plot(const std::vector<PrecisionRecord>& records,
                                              bool curves, const std::string& title = "Prediction instability",
                                              std::size_t max_points = 20000) {
    if (records.empty()) throw EmptyInput("prediction_instability_plot: no records");
    using namespace plotdetail;
    const Frame f{1.0};

    std::string svg;
    open_svg(svg, title);
    axes(svg, f, "True risk", "95% uncertainty interval for estimated risk", 0.2);

    std::string table = "element,x,y1,y2\n";
    svg += "<line x1=\"" + px_str(f.px(0)) + "\" y1=\"" + px_str(f.py(0)) + "\" x2=\"" + px_str(f.px(1)) +
           "\" y2=\"" + px_str(f.py(1)) + "\" stroke=\"grey\" stroke-dasharray=\"5,4\"/>\n";
    table += "identity,0,0,\nidentity,1,1,\n";

    const std::size_t stride = plot_stride(records.size(), max_points);
    svg += "<g stroke=\"#1f6fb4\" stroke-width=\"1\" stroke-opacity=\"0.55\">\n";
    std::vector<double> xs, lows, ups;
    for (std::size_t i = 0; i < records.size(); i += stride) {
        const auto& r = records[i];
        svg += "<line x1=\"" + px_str(f.px(r.true_risk)) + "\" y1=\"" + px_str(f.py(r.lower)) + "\" x2=\"" +
               px_str(f.px(r.true_risk)) + "\" y2=\"" + px_str(f.py(r.upper)) + "\"/>\n";
        table += "interval," + csv::format_double(r.true_risk) + ',' + csv::format_double(r.lower) +
                 ',' + csv::format_double(r.upper) + '\n';
        xs.push_back(r.true_risk);
        lows.push_back(r.lower);
        ups.push_back(r.upper);
    }
    svg += "</g>\n";

    if (curves && xs.size() >= 10) {
        const SmoothCurve lo = lowess(xs, lows);
        const SmoothCurve hi = lowess(xs, ups);
        polyline(svg, f, lo.grid, lo.values, "stroke=\"#c0392b\" stroke-width=\"2\" stroke-dasharray=\"7,4\"");
        polyline(svg, f, hi.grid, hi.values, "stroke=\"#c0392b\" stroke-width=\"2\" stroke-dasharray=\"7,4\"");
        for (std::size_t g = 0; g < lo.grid.size(); ++g) {
            table += "curve_lower," + csv::format_double(lo.grid[g]) + ',' +
                     csv::format_double(lo.values[g]) + ",\n";
        }
        for (std::size_t g = 0; g < hi.grid.size(); ++g) {
            table += "curve_upper," + csv::format_double(hi.grid[g]) + ',' +
                     csv::format_double(hi.values[g]) + ",\n";
        }
    }
    svg += "</svg>\n";
    return {svg, table};
}

// True risk (x) against the probability that the estimate falls on the wrong
// side of the decision threshold (y, capped at 0.5), with a rule at the
// threshold itself.
inline PlotOutput classification_instability_plot(const std::vector<InstabilityRecord>& records,
                                                  double threshold,
                                                  const std::string& title = "Classification instability",
                                                  std::size_t max_points = 20000) {
    if (records.empty()) throw EmptyInput("classification_instability_plot: no records");
    if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("threshold must be in (0,1)");
    using namespace plotdetail;
    const Frame f{0.5};

    std::string svg;
    open_svg(svg, title);
    axes(svg, f, "True risk", "P(estimate on wrong side of threshold)", 0.1);

    std::string table = "element,x,y1,y2\n";
    svg += "<line x1=\"" + px_str(f.px(threshold)) + "\" y1=\"" + px_str(f.py(0)) + "\" x2=\"" +
           px_str(f.px(threshold)) + "\" y2=\"" + px_str(f.py(0.5)) +
           "\" stroke=\"grey\" stroke-dasharray=\"5,4\"/>\n";
    table += "threshold," + csv::format_double(threshold) + ",,\n";

    const std::size_t stride = plot_stride(records.size(), max_points);
    svg += "<g fill=\"#1f6fb4\" fill-opacity=\"0.55\">\n";
    for (std::size_t i = 0; i < records.size(); i += stride) {
        const auto& r = records[i];
        if (!r.misclass_prob) {
            throw DomainError("classification_instability_plot: records carry no misclassification");
        }
        svg += "<circle cx=\"" + px_str(f.px(r.true_risk)) + "\" cy=\"" + px_str(f.py(*r.misclass_prob)) +
               "\" r=\"2\"/>\n";
        table += "point," + csv::format_double(r.true_risk) + ',' +
                 csv::format_double(*r.misclass_prob) + ",\n";
    }
    svg += "</g>\n</svg>\n";
    return {svg, table};
}

} // namespace pmstab
