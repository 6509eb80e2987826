#include "stablevel/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "stablevel/errors.hpp"

namespace svl {

namespace {

constexpr double width = 640, height = 400;
constexpr double left = 70, right = 20, top = 40, bottom = 50;
const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string coord(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s)
    {
        switch (c)
        {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string line_chart(const std::string& title,
                       const std::string& x_label,
                       const std::string& y_label,
                       const std::vector<SvgSeries>& series)
{
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
    double y0 = x0, y1 = -x0;
    for (const auto& s : series)
    {
        if (s.x.size() != s.y.size())
            throw ShapeError("line_chart: x and y differ in length");
        if (!s.lo.empty() && (s.lo.size() != s.x.size() || s.hi.size() != s.x.size()))
            throw ShapeError("line_chart: band must match x");
        for (std::size_t i = 0; i < s.x.size(); ++i)
        {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.lo.empty() ? s.y[i] : s.lo[i]);
            y1 = std::max(y1, s.hi.empty() ? s.y[i] : s.hi[i]);
        }
    }
    if (!std::isfinite(x0))
        x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0)
        x1 = x0 + 1;
    if (y1 == y0)
        y1 = y0 + 1;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + coord(width) + "\" height=\""
                      + coord(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + coord(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title)
           + "</text>\n";
    svg += "<line x1=\"" + coord(left) + "\" y1=\"" + coord(top + ph) + "\" x2=\"" + coord(left + pw) + "\" y2=\""
           + coord(top + ph) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + coord(left) + "\" y1=\"" + coord(top) + "\" x2=\"" + coord(left) + "\" y2=\""
           + coord(top + ph) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i)
    {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        const double yv = y0 + (y1 - y0) * i / 4.0;
        svg += "<text x=\"" + coord(px(xv)) + "\" y=\"" + coord(top + ph + 16) + "\" text-anchor=\"middle\">"
               + num(xv) + "</text>\n";
        svg += "<text x=\"" + coord(left - 6) + "\" y=\"" + coord(py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv)
               + "</text>\n";
    }
    svg += "<text x=\"" + coord(left + pw / 2) + "\" y=\"" + coord(height - 10) + "\" text-anchor=\"middle\">"
           + escape(x_label) + "</text>\n";
    svg += "<text x=\"16\" y=\"" + coord(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
           + coord(top + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k)
    {
        const auto& s = series[k];
        const char* color = palette[k % 5];
        if (!s.lo.empty() && !s.x.empty())
        {
            std::string pts;
            for (std::size_t i = 0; i < s.x.size(); ++i)
                pts += coord(px(s.x[i])) + "," + coord(py(s.hi[i])) + " ";
            for (std::size_t i = s.x.size(); i-- > 0;)
                pts += coord(px(s.x[i])) + "," + coord(py(s.lo[i])) + " ";
            svg += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        }
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i)
            pts += coord(px(s.x[i])) + "," + coord(py(s.y[i])) + " ";
        svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
        svg += "<text x=\"" + coord(left + pw - 4) + "\" y=\"" + coord(top + 14 + 14 * static_cast<double>(k))
               + "\" text-anchor=\"end\" fill=\"" + color + "\">" + escape(s.label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace svl
