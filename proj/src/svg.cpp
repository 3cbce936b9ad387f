#include "sciline/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sciline/common.hpp"

namespace sciline::svg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) { return format_fixed(v, 2); }

struct Frame {
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

    void fit(double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            return;
        }
        if (empty) {
            x_min = x_max = x;
            y_min = y_max = y;
            empty = false;
            return;
        }
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
    }
    void pad() {
        if (x_max <= x_min) {
            x_min -= 0.5;
            x_max += 0.5;
        }
        if (y_max <= y_min) {
            y_min -= 0.5;
            y_max += 0.5;
        }
        const double dy = 0.05 * (y_max - y_min);
        y_min -= dy;
        y_max += dy;
    }
    double px(double x) const { return kLeft + (x - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y_min) / (y_max - y_min) * (kHeight - kTop - kBottom); }

    bool empty = true;
};

void open(std::ostringstream& o, const Axes& axes, const Frame& f) {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(axes.title)
      << "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    o << "<path d=\"M" << num(x0) << ' ' << num(y1) << " L" << num(x0) << ' ' << num(y0) << " L" << num(x1) << ' '
      << num(y0) << "\" stroke=\"black\" fill=\"none\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.x_min + (f.x_max - f.x_min) * i / 4.0;
        const double yv = f.y_min + (f.y_max - f.y_min) * i / 4.0;
        o << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(y0 + 15) << "\" text-anchor=\"middle\">"
          << format_fixed(xv, std::abs(f.x_max - f.x_min) >= 10 ? 0 : 2) << "</text>\n";
        o << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">"
          << format_fixed(yv, 3) << "</text>\n";
    }
    o << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
      << esc(axes.x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((y0 + y1) / 2) << ")\">" << esc(axes.y_label) << "</text>\n";
    if (axes.reference_y && *axes.reference_y >= f.y_min && *axes.reference_y <= f.y_max) {
        o << "<line x1=\"" << num(x0) << "\" x2=\"" << num(x1) << "\" y1=\"" << num(f.py(*axes.reference_y))
          << "\" y2=\"" << num(f.py(*axes.reference_y)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    }
}

}  // namespace

std::string line_chart(const Axes& axes, const std::vector<Line>& lines) {
    Frame f;
    for (const auto& l : lines) {
        for (std::size_t i = 0; i < l.points.size(); ++i) {
            f.fit(l.points[i].x, l.points[i].y);
            if (i < l.lo.size()) f.fit(l.points[i].x, l.lo[i]);
            if (i < l.hi.size()) f.fit(l.points[i].x, l.hi[i]);
        }
    }
    if (axes.reference_y) {
        f.fit(f.empty ? 0.0 : f.x_min, *axes.reference_y);
    }
    f.pad();
    std::ostringstream o;
    open(o, axes, f);
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const auto& l = lines[k];
        const char* color = kPalette[k % std::size(kPalette)];
        if (!l.lo.empty() && l.lo.size() == l.points.size() && l.hi.size() == l.points.size()) {
            o << "<path d=\"";
            for (std::size_t i = 0; i < l.points.size(); ++i) {
                o << (i ? " L" : "M") << num(f.px(l.points[i].x)) << ' ' << num(f.py(l.hi[i]));
            }
            for (std::size_t i = l.points.size(); i-- > 0;) {
                o << " L" << num(f.px(l.points[i].x)) << ' ' << num(f.py(l.lo[i]));
            }
            o << " Z\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        }
        o << "<path d=\"";
        bool pen = false;
        for (const auto& p : l.points) {
            if (!std::isfinite(p.y)) {
                pen = false;
                continue;
            }
            o << (pen ? " L" : " M") << num(f.px(p.x)) << ' ' << num(f.py(p.y));
            pen = true;
        }
        o << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        if (l.markers) {
            for (const auto& p : l.points) {
                if (std::isfinite(p.y)) {
                    o << "<circle cx=\"" << num(f.px(p.x)) << "\" cy=\"" << num(f.py(p.y)) << "\" r=\"2.5\" fill=\""
                      << color << "\"/>\n";
                }
            }
        }
        const double ly = kTop + 16.0 * static_cast<double>(k);
        o << "<line x1=\"" << num(kWidth - kRight + 10) << "\" x2=\"" << num(kWidth - kRight + 30) << "\" y1=\""
          << num(ly) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << num(kWidth - kRight + 34) << "\" y=\"" << num(ly + 4) << "\">" << esc(l.name)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string bar_chart(const Axes& axes, const std::vector<Bar>& bars) {
    Frame f;
    for (const auto& b : bars) {
        f.fit(b.x0, 0.0);
        f.fit(b.x1, b.height);
    }
    f.pad();
    f.y_min = std::min(0.0, f.y_min);
    std::ostringstream o;
    open(o, axes, f);
    for (const auto& b : bars) {
        const double top = f.py(b.height);
        const double base = f.py(0.0);
        o << "<rect x=\"" << num(f.px(b.x0)) << "\" y=\"" << num(std::min(top, base)) << "\" width=\""
          << num(std::max(0.0, f.px(b.x1) - f.px(b.x0))) << "\" height=\"" << num(std::abs(base - top))
          << "\" fill=\"" << kPalette[0] << "\"/>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace sciline::svg
