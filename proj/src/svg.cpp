#include "stvs/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace stvs::svg {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kLeft = 64, kRight = 150, kTop = 40, kBottom = 56;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Frame {
    const Axes& a;
    double px(double x) const {
        const double span = a.x_max - a.x_min;
        return kLeft + (span == 0 ? 0.5 : (x - a.x_min) / span) * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        const double span = a.y_max - a.y_min;
        return kHeight - kBottom - (span == 0 ? 0.5 : (y - a.y_min) / span) * (kHeight - kTop - kBottom);
    }
};

void open(std::ostringstream& os, const Axes& a) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(a.title)
       << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, bool numeric_x) {
    const auto& a = f.a;
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    os << "<g stroke=\"#444\" fill=\"none\">\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\"/>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\"/>\n";
    os << "</g>\n";
    for (int k = 0; k <= a.ticks; ++k) {
        const double v = a.y_min + (a.y_max - a.y_min) * k / a.ticks;
        os << "<line x1=\"" << x0 << "\" y1=\"" << num(f.py(v)) << "\" x2=\"" << x1 << "\" y2=\"" << num(f.py(v))
           << "\" stroke=\"#e4e4e4\"/>\n";
        os << "<text x=\"" << x0 - 6 << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">" << tick_label(v)
           << "</text>\n";
        if (numeric_x) {
            const double u = a.x_min + (a.x_max - a.x_min) * k / a.ticks;
            os << "<text x=\"" << num(f.px(u)) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">"
               << tick_label(u) << "</text>\n";
        }
    }
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
       << escape(a.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(a.y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& names, const std::vector<bool>& dashed) {
    const int x = kWidth - kRight + 14;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const int y = kTop + 10 + static_cast<int>(i) * 18;
        os << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + 22 << "\" y2=\"" << y << "\" stroke=\""
           << kPalette[i % 10] << "\" stroke-width=\"2.5\"" << (dashed[i] ? " stroke-dasharray=\"5,3\"" : "")
           << "/>\n";
        os << "<text x=\"" << x + 28 << "\" y=\"" << y + 4 << "\">" << escape(names[i]) << "</text>\n";
    }
}

}  // namespace

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

std::string line_chart(const Axes& a, const std::vector<Series>& series, bool markers) {
    std::ostringstream os;
    const Frame f{a};
    open(os, a);
    axes(os, f, true);
    std::vector<std::string> names;
    std::vector<bool> dashed;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        names.push_back(s.name);
        dashed.push_back(s.dashed);
        if (s.points.empty()) continue;
        os << "<polyline fill=\"none\" stroke=\"" << kPalette[i % 10] << "\" stroke-width=\"2\""
           << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        for (const auto& [x, y] : s.points) os << num(f.px(x)) << ',' << num(f.py(y)) << ' ';
        os << "\"/>\n";
        if (markers)
            for (const auto& [x, y] : s.points)
                os << "<circle cx=\"" << num(f.px(x)) << "\" cy=\"" << num(f.py(y)) << "\" r=\"3\" fill=\""
                   << kPalette[i % 10] << "\"/>\n";
    }
    legend(os, names, dashed);
    os << "</svg>\n";
    return os.str();
}

std::string bar_chart(const Axes& a, const std::vector<std::string>& names, const std::vector<BarGroup>& groups) {
    std::ostringstream os;
    const Frame f{a};
    open(os, a);
    axes(os, f, false);
    const double plot_w = kWidth - kLeft - kRight;
    const double group_w = groups.empty() ? plot_w : plot_w / static_cast<double>(groups.size());
    const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(names.size(), 1));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double gx = kLeft + g * group_w + group_w * 0.1;
        for (std::size_t i = 0; i < groups[g].values.size() && i < names.size(); ++i) {
            const double v = std::clamp(groups[g].values[i], a.y_min, a.y_max);
            const double top = f.py(v);
            os << "<rect x=\"" << num(gx + i * bar_w) << "\" y=\"" << num(top) << "\" width=\"" << num(bar_w * 0.92)
               << "\" height=\"" << num(f.py(a.y_min) - top) << "\" fill=\"" << kPalette[i % 10] << "\"/>\n";
        }
        os << "<text x=\"" << num(gx + group_w * 0.4) << "\" y=\"" << kHeight - kBottom + 18
           << "\" text-anchor=\"middle\">" << escape(groups[g].label) << "</text>\n";
    }
    legend(os, names, std::vector<bool>(names.size(), false));
    os << "</svg>\n";
    return os.str();
}

}  // namespace stvs::svg
