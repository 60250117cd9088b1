#include "domino/plot.hpp"

#include "domino/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace domino {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char c = text[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < text.size() && text[k + 1] == '"') {
                    field += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) throw std::invalid_argument("unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

const std::set<std::string> kNonKeyColumns = {
    "run_index", "seed", "run_seed", "optimal_value", "extrinsic_value_mean", "extrinsic_value_per_policy",
    "diversity_score", "diversity_sum", "objective", "status"};

double to_number(const std::string& s, const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("column " + column + ": '" + s + "' is not a number");
    }
}

double half_width(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (v.size() - 1));
    return 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

AxisRange padded(double lo, double hi) {
    const double span = hi - lo;
    const double pad = span > 0.0 ? 0.05 * span : 0.05 * std::max(1.0, std::abs(lo));
    return {lo - pad, hi + pad};
}

std::string fmt(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", x);
    std::string s(buf);
    return s == "-0.00" ? "0.00" : s;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

const char* const kPalette[] = {"#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#00798c", "#8d6a9f", "#444444"};

std::string marker(int shape, double cx, double cy, const std::string& color) {
    const double r = 5.0;
    const std::string style = " fill=\"" + std::string(color) + "\" stroke=\"#000\" stroke-width=\"0.6\"/>\n";
    switch (shape % 4) {
        case 0: return "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\"" + style;
        case 1:
            return "<rect x=\"" + fmt(cx - r) + "\" y=\"" + fmt(cy - r) + "\" width=\"" + fmt(2 * r) + "\" height=\"" +
                   fmt(2 * r) + "\"" + style;
        case 2:
            return "<polygon points=\"" + fmt(cx) + "," + fmt(cy - r) + " " + fmt(cx + r) + "," + fmt(cy + r) + " " +
                   fmt(cx - r) + "," + fmt(cy + r) + "\"" + style;
        default:
            return "<polygon points=\"" + fmt(cx) + "," + fmt(cy - r) + " " + fmt(cx + r) + "," + fmt(cy) + " " +
                   fmt(cx) + "," + fmt(cy + r) + " " + fmt(cx - r) + "," + fmt(cy) + "\"" + style;
    }
}

}  // namespace

std::vector<ScatterPoint> aggregate_qd(const std::string& csv_text) {
    const auto rows = parse_csv(csv_text);
    if (rows.empty()) throw std::invalid_argument("QD CSV is empty");
    const auto& header = rows.front();
    std::map<std::string, int> col;
    for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = static_cast<int>(k);
    for (const char* need : {"diversity_score", "extrinsic_value_mean", "alpha", "n"})
        if (!col.count(need)) throw std::invalid_argument(std::string("QD CSV is missing column '") + need + "'");

    struct Group {
        std::vector<double> xs, ys;
        double alpha = 0.0;
        int n = 0;
        std::string label;
    };
    std::map<std::string, Group> groups;
    std::vector<std::string> order;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw std::invalid_argument("QD CSV row " + std::to_string(r) + " has the wrong number of fields");
        if (col.count("status") && row[col["status"]] != "ok") continue;
        std::string key, label;
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (kNonKeyColumns.count(header[k])) continue;
            key += header[k] + "=" + row[k] + "|";
        }
        if (!groups.count(key)) order.push_back(key);
        Group& g = groups[key];
        g.xs.push_back(to_number(row[col["diversity_score"]], "diversity_score"));
        g.ys.push_back(to_number(row[col["extrinsic_value_mean"]], "extrinsic_value_mean"));
        g.alpha = to_number(row[col["alpha"]], "alpha");
        g.n = static_cast<int>(to_number(row[col["n"]], "n"));
        g.label = (col.count("strategy") ? row[col["strategy"]] + " " : std::string()) + "alpha=" + row[col["alpha"]] +
                  " n=" + row[col["n"]];
    }
    std::vector<ScatterPoint> out;
    for (const std::string& key : order) {
        const Group& g = groups[key];
        ScatterPoint p;
        p.x = mean_of(g.xs);
        p.y = mean_of(g.ys);
        p.x_half = half_width(g.xs);
        p.y_half = half_width(g.ys);
        p.alpha = g.alpha;
        p.n = g.n;
        p.label = g.label;
        p.count = static_cast<int>(g.xs.size());
        out.push_back(p);
    }
    return out;
}

ScatterLayout compute_layout(const std::vector<ScatterPoint>& points) {
    if (points.empty()) return {};
    double x0 = points[0].x - points[0].x_half, x1 = points[0].x + points[0].x_half;
    double y0 = points[0].y - points[0].y_half, y1 = points[0].y + points[0].y_half;
    for (const ScatterPoint& p : points) {
        x0 = std::min(x0, p.x - p.x_half);
        x1 = std::max(x1, p.x + p.x_half);
        y0 = std::min(y0, p.y - p.y_half);
        y1 = std::max(y1, p.y + p.y_half);
    }
    return {padded(x0, x1), padded(y0, y1)};
}

std::string render_scatter_svg(const std::vector<ScatterPoint>& points) {
    const double W = 720, H = 480, left = 70, right = 190, top = 30, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;
    const ScatterLayout lay = compute_layout(points);
    auto sx = [&](double x) { return left + (x - lay.x.lo) / (lay.x.hi - lay.x.lo) * pw; };
    auto sy = [&](double y) { return top + ph - (y - lay.y.lo) / (lay.y.hi - lay.y.lo) * ph; };

    std::vector<double> alphas;
    std::vector<int> sizes;
    for (const ScatterPoint& p : points) {
        if (std::find(alphas.begin(), alphas.end(), p.alpha) == alphas.end()) alphas.push_back(p.alpha);
        if (std::find(sizes.begin(), sizes.end(), p.n) == sizes.end()) sizes.push_back(p.n);
    }
    std::sort(alphas.begin(), alphas.end());
    std::sort(sizes.begin(), sizes.end());
    auto color_of = [&](double a) {
        const auto k = std::find(alphas.begin(), alphas.end(), a) - alphas.begin();
        return std::string(kPalette[k % 8]);
    };
    auto shape_of = [&](int n) { return static_cast<int>(std::find(sizes.begin(), sizes.end(), n) - sizes.begin()); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) + "\" viewBox=\"0 0 " +
         fmt(W) + " " + fmt(H) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    s += "<g stroke=\"#000\" stroke-width=\"1\">\n";
    s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(left + pw) + "\" y2=\"" +
         fmt(top + ph) + "\"/>\n";
    s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) + "\" y2=\"" + fmt(top + ph) +
         "\"/>\n";
    s += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = lay.x.lo + (lay.x.hi - lay.x.lo) * t / 4.0;
        const double yv = lay.y.lo + (lay.y.hi - lay.y.lo) * t / 4.0;
        s += "<line x1=\"" + fmt(sx(xv)) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(sx(xv)) + "\" y2=\"" +
             fmt(top + ph + 5) + "\" stroke=\"#000\"/>\n";
        s += "<text x=\"" + fmt(sx(xv)) + "\" y=\"" + fmt(top + ph + 18) + "\" text-anchor=\"middle\">" + fmt(xv) +
             "</text>\n";
        s += "<line x1=\"" + fmt(left - 5) + "\" y1=\"" + fmt(sy(yv)) + "\" x2=\"" + fmt(left) + "\" y2=\"" +
             fmt(sy(yv)) + "\" stroke=\"#000\"/>\n";
        s += "<text x=\"" + fmt(left - 8) + "\" y=\"" + fmt(sy(yv) + 4) + "\" text-anchor=\"end\">" + fmt(yv) +
             "</text>\n";
    }
    s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(H - 15) + "\" text-anchor=\"middle\">diversity score</text>\n";
    s += "<text x=\"18\" y=\"" + fmt(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fmt(top + ph / 2) + ")\">extrinsic value</text>\n";
    s += "</g>\n<g>\n";
    for (const ScatterPoint& p : points) {
        const std::string color = color_of(p.alpha);
        const double cx = sx(p.x), cy = sy(p.y);
        s += "<line x1=\"" + fmt(sx(p.x - p.x_half)) + "\" y1=\"" + fmt(cy) + "\" x2=\"" + fmt(sx(p.x + p.x_half)) +
             "\" y2=\"" + fmt(cy) + "\" stroke=\"" + color + "\" stroke-width=\"1.2\"/>\n";
        s += "<line x1=\"" + fmt(cx) + "\" y1=\"" + fmt(sy(p.y - p.y_half)) + "\" x2=\"" + fmt(cx) + "\" y2=\"" +
             fmt(sy(p.y + p.y_half)) + "\" stroke=\"" + color + "\" stroke-width=\"1.2\"/>\n";
        s += marker(shape_of(p.n), cx, cy, color);
    }
    s += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
    double ly = top + 10;
    const double lx = left + pw + 20;
    for (double a : alphas) {
        s += "<rect x=\"" + fmt(lx) + "\" y=\"" + fmt(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" + color_of(a) +
             "\"/>\n";
        s += "<text x=\"" + fmt(lx + 16) + "\" y=\"" + fmt(ly + 1) + "\">alpha = " + escape_xml(format_double(a)) +
             "</text>\n";
        ly += 16;
    }
    ly += 8;
    for (int n : sizes) {
        s += marker(shape_of(n), lx + 5, ly - 3, "#bbbbbb");
        s += "<text x=\"" + fmt(lx + 16) + "\" y=\"" + fmt(ly + 1) + "\">n = " + std::to_string(n) + "</text>\n";
        ly += 16;
    }
    s += "</g>\n</svg>\n";
    return s;
}

void plot_scatter(const std::string& csv_path, const std::string& svg_path) {
    write_text_file(svg_path, render_scatter_svg(aggregate_qd(read_text_file(csv_path))));
}

}  // namespace domino
