#include "cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tailaug::cli {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string signed_fixed(double v, int digits) {
    std::string s = fixed(v, digits);
    return v >= 0.0 ? "+" + s : s;
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

}  // namespace

std::string markdown_f1_table(const trainer::EvalReport& baseline, const trainer::EvalReport& treated,
                              const std::string& baseline_name, const std::string& treated_name) {
    const auto delta = trainer::compare_reports(baseline, treated);
    std::ostringstream out;
    out << "| Method | F1 Score |";
    for (std::size_t k = 0; k < baseline.class_names.size(); ++k) {
        out << ' ' << baseline.class_names[k] << (baseline.tail.count(static_cast<core::ClassIndex>(k)) ? "*" : "")
            << " |";
    }
    out << "\n|---|---|";
    for (std::size_t k = 0; k < baseline.class_names.size(); ++k) out << "---|";
    out << "\n| " << baseline_name << " | " << fixed(100.0 * baseline.macro_f1, 2) << " |";
    for (const auto& m : baseline.per_class) out << ' ' << fixed(100.0 * m.f1, 2) << " |";
    out << "\n| " << treated_name << " | " << fixed(100.0 * treated.macro_f1, 2) << '('
        << signed_fixed(100.0 * delta.macro_f1_delta, 2) << ") |";
    for (std::size_t k = 0; k < treated.per_class.size(); ++k) {
        out << ' ' << fixed(100.0 * treated.per_class[k].f1, 2) << '(' << signed_fixed(100.0 * delta.f1_delta[k], 2)
            << ") |";
    }
    out << "\n\n* tail class. Head macro F1: " << fixed(100.0 * baseline.head_macro_f1, 2) << " -> "
        << fixed(100.0 * treated.head_macro_f1, 2) << "; tail macro F1: " << fixed(100.0 * baseline.tail_macro_f1, 2)
        << " -> " << fixed(100.0 * treated.tail_macro_f1, 2) << ".\n";
    return out.str();
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const core::ClassSet& highlight) {
    const int bar_w = 36, gap = 12, left = 50, top = 40, plot_h = 200, bottom = 60;
    const int width = left + static_cast<int>(labels.size()) * (bar_w + gap) + gap;
    const int height = top + plot_h + bottom;
    double hi = 0.0, lo = 0.0;
    for (double v : values) {
        hi = std::max(hi, v);
        lo = std::min(lo, v);
    }
    if (hi - lo <= 0.0) hi = lo + 1.0;
    const auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };
    const double zero = y_of(0.0);

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title)
        << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << fixed(zero, 1) << "\" x2=\"" << width - gap << "\" y2=\""
        << fixed(zero, 1) << "\" stroke=\"#333\"/>\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int x = left + gap + static_cast<int>(i) * (bar_w + gap);
        const double y = y_of(values[i]);
        const double y0 = std::min(y, zero);
        const double h = std::abs(zero - y);
        const bool accent = highlight.count(static_cast<core::ClassIndex>(i)) != 0;
        out << "<rect x=\"" << x << "\" y=\"" << fixed(y0, 1) << "\" width=\"" << bar_w << "\" height=\""
            << fixed(h, 1) << "\" fill=\"" << (accent ? "#c0392b" : "#5b7db1") << "\"/>\n";
        out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << fixed(values[i] >= 0 ? y0 - 4 : y0 + h + 12, 1)
            << "\" text-anchor=\"middle\">" << fixed(values[i], std::abs(values[i]) >= 10 ? 0 : 3) << "</text>\n";
        out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 20
            << "\" text-anchor=\"middle\">" << escape_xml(labels[i]) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string class_distribution_svg(const stats::ClassStats& stats, const core::ClassRegistry& registry,
                                   const stats::HeadTailPartition& partition) {
    std::vector<double> counts(stats.counts.begin(), stats.counts.end());
    return bar_chart_svg("Training samples per class (tail in red)", registry.names(), counts, partition.tail);
}

std::string f1_delta_svg(const trainer::DeltaReport& delta, const core::ClassSet& tail) {
    return bar_chart_svg("Per-class F1 change (tail in red)", delta.class_names, delta.f1_delta, tail);
}

}  // namespace tailaug::cli
