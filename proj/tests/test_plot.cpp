#include "domino/plot.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

using namespace domino;

namespace {

const char* const kHeader = "run_index,strategy,alpha,n,seed,run_seed,diversity_score,extrinsic_value_mean,status\n";

int count(const std::string& s, const std::string& needle) {
    int c = 0;
    for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++c;
    return c;
}

}  // namespace

TEST_CASE("one point gives one marker and axes") {
    const std::string csv = std::string(kHeader) + "0,DominoLagrangian,0.9,5,0,1,0.4,0.8,ok\n";
    const auto points = aggregate_qd(csv);
    REQUIRE(points.size() == 1);
    CHECK(points[0].x_half == 0.0);
    const std::string svg = render_scatter_svg(points);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    // one data marker plus one legend marker
    CHECK(count(svg, "stroke-width=\"0.6\"") == 2);
    CHECK(svg.find("diversity score") != std::string::npos);
}

TEST_CASE("identical points overplot without error") {
    std::string csv = kHeader;
    csv += "0,DominoLagrangian,0.9,5,0,1,0.4,0.8,ok\n";
    csv += "1,DominoLagrangian,0.5,5,0,1,0.4,0.8,ok\n";
    const auto points = aggregate_qd(csv);
    CHECK(points.size() == 2);
    const std::string svg = render_scatter_svg(points);
    CHECK(svg.find("nan") == std::string::npos);
    CHECK(svg.find("inf") == std::string::npos);
}

TEST_CASE("seeds are averaged with a cross over seeds; failed rows are skipped") {
    std::string csv = kHeader;
    csv += "0,DominoLagrangian,0.9,5,0,1,1.0,2.0,ok\n";
    csv += "1,DominoLagrangian,0.9,5,1,2,3.0,4.0,ok\n";
    csv += "2,DominoLagrangian,0.9,5,2,3,,,failed\n";
    const auto points = aggregate_qd(csv);
    REQUIRE(points.size() == 1);
    CHECK(points[0].count == 2);
    CHECK(points[0].x == 2.0);
    CHECK(points[0].y == 3.0);
    // sd = sqrt(2), k = 2
    CHECK(points[0].x_half == doctest::Approx(1.96));
}

TEST_CASE("axis ranges cover the data with 5% padding") {
    std::string csv = kHeader;
    const double xs[] = {0.1, 0.7, 0.35, 0.5}, ys[] = {0.2, -0.4, 0.9, 0.3};
    for (int k = 0; k < 4; ++k)
        csv += std::to_string(k) + ",Smerl," + std::to_string(0.5 + 0.1 * k) + ",3,0,1," + std::to_string(xs[k]) +
               "," + std::to_string(ys[k]) + ",ok\n";
    const ScatterLayout lay = compute_layout(aggregate_qd(csv));
    const double x0 = *std::min_element(xs, xs + 4), x1 = *std::max_element(xs, xs + 4);
    const double y0 = *std::min_element(ys, ys + 4), y1 = *std::max_element(ys, ys + 4);
    CHECK(lay.x.lo == doctest::Approx(x0 - 0.05 * (x1 - x0)));
    CHECK(lay.x.hi == doctest::Approx(x1 + 0.05 * (x1 - x0)));
    CHECK(lay.y.lo == doctest::Approx(y0 - 0.05 * (y1 - y0)));
    CHECK(lay.y.hi == doctest::Approx(y1 + 0.05 * (y1 - y0)));
}

TEST_CASE("missing columns are reported") {
    CHECK_THROWS(aggregate_qd("run_index,alpha,n,status\n0,0.9,5,ok\n"));
}
