#pragma once

#include <string>
#include <vector>

namespace domino {

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// One scatter marker: a hyperparameter setting averaged over seeds.
struct ScatterPoint {
    double x = 0.0;       // mean diversity score
    double y = 0.0;       // mean extrinsic value
    double x_half = 0.0;  // 1.96 * sd / sqrt(k) over seeds, 0 when k = 1
    double y_half = 0.0;
    double alpha = 0.0;
    int n = 0;
    std::string label;
    int count = 0;
};

/// Groups successful rows of a QD CSV by every hyperparameter column (all
/// columns except run_index, seed, run_seed and the result columns).
std::vector<ScatterPoint> aggregate_qd(const std::string& csv_text);

struct AxisRange {
    double lo = 0.0;
    double hi = 1.0;
};

struct ScatterLayout {
    AxisRange x, y;
};

/// Data extent including the crosses, padded by 5% of the span on each side.
ScatterLayout compute_layout(const std::vector<ScatterPoint>& points);

std::string render_scatter_svg(const std::vector<ScatterPoint>& points);

void plot_scatter(const std::string& csv_path, const std::string& svg_path);

}  // namespace domino
