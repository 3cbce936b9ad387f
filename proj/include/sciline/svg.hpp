#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sciline::svg {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Line {
    std::string name;
    std::vector<Point> points;
    bool markers = false;
    // optional shaded band, same x as points
    std::vector<double> lo;
    std::vector<double> hi;
};

struct Bar {
    double x0 = 0.0;
    double x1 = 0.0;
    double height = 0.0;
};

struct Axes {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::optional<double> reference_y;  // dashed horizontal guide, e.g. ratio 1
};

// Plain deterministic SVG text, no timestamps or random ids.
std::string line_chart(const Axes& axes, const std::vector<Line>& lines);
std::string bar_chart(const Axes& axes, const std::vector<Bar>& bars);

}  // namespace sciline::svg
