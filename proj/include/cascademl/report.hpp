#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/format.hpp"
#include "cascademl/train.hpp"

namespace cml {

/// Class-by-class tally; rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts;
    std::vector<std::string> class_names;

    std::size_t n_classes() const { return class_names.size(); }
    std::size_t total() const {
        std::size_t sum = 0;
        for (const auto& row : counts)
            for (std::size_t c : row) sum += c;
        return sum;
    }
    std::size_t trace() const {
        std::size_t sum = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) sum += counts[i][i];
        return sum;
    }
    double accuracy() const { return double(trace()) / double(total()); }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                        const std::vector<int>& predicted,
                                        std::vector<std::string> class_names) {
    if (truth.size() != predicted.size())
        throw validation_error("label vectors differ in length");
    if (truth.empty()) throw validation_error("no samples to tally");
    if (class_names.empty()) throw validation_error("class names must be nonempty");
    const std::size_t k = class_names.size();
    ConfusionMatrix cm;
    cm.class_names = std::move(class_names);
    cm.counts.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || std::size_t(truth[i]) >= k)
            throw validation_error("true label out of range: " + std::to_string(truth[i]));
        if (predicted[i] < 0 || std::size_t(predicted[i]) >= k)
            throw validation_error("predicted label out of range: " +
                                   std::to_string(predicted[i]));
        ++cm.counts[std::size_t(truth[i])][std::size_t(predicted[i])];
    }
    return cm;
}

namespace detail {

/// "5 (100.0%)"; rows with no samples render "0 (—)".
inline std::string confusion_cell(std::size_t count, std::size_t row_total) {
    if (row_total == 0) return std::to_string(count) + " (—)";
    const double pct = 100.0 * double(count) / double(row_total);
    return std::to_string(count) + " (" + format_fixed(pct, 1) + "%)";
}

inline std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

} // namespace detail

/// Fixed-width text rendering; same numbers as the SVG grid.
inline std::string confusion_text_table(const ConfusionMatrix& cm) {
    const std::size_t k = cm.n_classes();
    std::vector<std::size_t> row_totals(k, 0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) row_totals[i] += cm.counts[i][j];

    std::vector<std::vector<std::string>> cells(k, std::vector<std::string>(k));
    std::size_t cell_width = 0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            cells[i][j] = detail::confusion_cell(cm.counts[i][j], row_totals[i]);
            cell_width = std::max(cell_width, cells[i][j].size());
        }
    std::size_t name_width = 4; // "true"
    for (const std::string& name : cm.class_names)
        name_width = std::max(name_width, name.size());
    cell_width = std::max(cell_width + 2, name_width + 2);

    auto pad_left = [](const std::string& s, std::size_t w) {
        return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
    };
    std::string out = "rows: true class, columns: predicted class\n";
    out += pad_left("", name_width);
    for (const std::string& name : cm.class_names) out += pad_left(name, cell_width);
    out += "\n";
    for (std::size_t i = 0; i < k; ++i) {
        out += pad_left(cm.class_names[i], name_width);
        for (std::size_t j = 0; j < k; ++j) out += pad_left(cells[i][j], cell_width);
        out += "\n";
    }
    return out;
}

/// Confusion grid as a self-contained SVG document: per-cell count with
/// row-normalized percentage, class names on both axes, diagonal-intensity
/// shading. Pure function of its inputs.
inline std::string render_confusion(const ConfusionMatrix& cm,
                                    const std::string& title = "Confusion matrix") {
    const std::size_t k = cm.n_classes();
    const int cell_w = 96, cell_h = 56;
    const int left = 120, top = 70;
    const int width = left + int(k) * cell_w + 30;
    const int height = top + int(k) * cell_h + 50;

    std::vector<std::size_t> row_totals(k, 0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) row_totals[i] += cm.counts[i][j];

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"monospace\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-size=\"16\">" + detail::xml_escape(title) + "</text>\n";
    svg += "<text x=\"" + std::to_string(left + int(k) * cell_w / 2) +
           "\" y=\"46\" text-anchor=\"middle\" font-size=\"12\">predicted</text>\n";

    for (std::size_t j = 0; j < k; ++j) {
        const int x = left + int(j) * cell_w + cell_w / 2;
        svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top - 8) +
               "\" text-anchor=\"middle\" font-size=\"12\">" +
               detail::xml_escape(cm.class_names[j]) + "</text>\n";
    }
    for (std::size_t i = 0; i < k; ++i) {
        const int y = top + int(i) * cell_h + cell_h / 2;
        svg += "<text x=\"" + std::to_string(left - 10) + "\" y=\"" + std::to_string(y + 4) +
               "\" text-anchor=\"end\" font-size=\"12\">" +
               detail::xml_escape(cm.class_names[i]) + "</text>\n";
    }

    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const int x = left + int(j) * cell_w;
            const int y = top + int(i) * cell_h;
            int shade = 255;
            if (row_totals[i] > 0) {
                const double pct = double(cm.counts[i][j]) / double(row_totals[i]);
                shade = 255 - int(pct * 120.0);
            }
            svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell_w) + "\" height=\"" +
                   std::to_string(cell_h) + "\" fill=\"rgb(" + std::to_string(shade) + "," +
                   std::to_string(shade) + ",255)\" stroke=\"#444444\"/>\n";
            svg += "<text x=\"" + std::to_string(x + cell_w / 2) + "\" y=\"" +
                   std::to_string(y + cell_h / 2 + 4) +
                   "\" text-anchor=\"middle\" font-size=\"12\">" +
                   detail::confusion_cell(cm.counts[i][j], row_totals[i]) + "</text>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

/// What to draw for a training run.
struct PlotSpec {
    bool show_min_max = true;
    std::string user_metric; // empty: loss panel only
    std::string title = "Training history";
    std::string output_path; // optional; used by render_history_to_file
};

namespace detail {

struct Series {
    std::string label;
    std::string color;
    const std::vector<double>* values;
};

inline void render_panel(std::string& svg, int panel_top, int panel_w, int panel_h,
                         const std::string& y_label, const std::vector<Series>& series,
                         bool annotate, bool annotate_max, const std::string& annotate_label,
                         const std::vector<double>* annotate_series) {
    const int left = 70, right = 20, top_pad = 28, bottom = 40;
    const int plot_w = panel_w - left - right;
    const int plot_h = panel_h - top_pad - bottom;

    std::size_t n = 0;
    double y_min = 0.0, y_max = 0.0;
    bool first = true;
    for (const Series& s : series) {
        n = std::max(n, s.values->size());
        for (double v : *s.values) {
            y_min = first ? v : std::min(y_min, v);
            y_max = first ? v : std::max(y_max, v);
            first = false;
        }
    }
    if (y_min == y_max) { y_min -= 0.5; y_max += 0.5; }
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;
    const double x_min = 1.0, x_max = n > 1 ? double(n) : 2.0;

    auto sx = [&](double epoch) {
        return double(left) + (epoch - x_min) / (x_max - x_min) * double(plot_w);
    };
    auto sy = [&](double v) {
        return double(panel_top + top_pad) +
               (1.0 - (v - y_min) / (y_max - y_min)) * double(plot_h);
    };

    svg += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(panel_top + top_pad) +
           "\" width=\"" + std::to_string(plot_w) + "\" height=\"" + std::to_string(plot_h) +
           "\" fill=\"none\" stroke=\"#888888\"/>\n";
    svg += "<text x=\"16\" y=\"" + std::to_string(panel_top + top_pad + plot_h / 2) +
           "\" font-size=\"12\" transform=\"rotate(-90 16," +
           std::to_string(panel_top + top_pad + plot_h / 2) + ")\" text-anchor=\"middle\">" +
           detail::xml_escape(y_label) + "</text>\n";

    for (int t = 0; t <= 4; ++t) {
        const double v = y_min + (y_max - y_min) * double(t) / 4.0;
        const double y = sy(v);
        svg += "<line x1=\"" + std::to_string(left - 4) + "\" y1=\"" + format_fixed(y, 2) +
               "\" x2=\"" + std::to_string(left) + "\" y2=\"" + format_fixed(y, 2) +
               "\" stroke=\"#888888\"/>\n";
        svg += "<text x=\"" + std::to_string(left - 8) + "\" y=\"" + format_fixed(y + 4, 2) +
               "\" text-anchor=\"end\" font-size=\"10\">" + format_general(v, 4) + "</text>\n";
    }
    const std::size_t x_step = std::max<std::size_t>(1, n / 8);
    for (std::size_t e = 1; e <= n; e += x_step) {
        const double x = sx(double(e));
        const int axis_y = panel_top + top_pad + plot_h;
        svg += "<line x1=\"" + format_fixed(x, 2) + "\" y1=\"" + std::to_string(axis_y) +
               "\" x2=\"" + format_fixed(x, 2) + "\" y2=\"" + std::to_string(axis_y + 4) +
               "\" stroke=\"#888888\"/>\n";
        svg += "<text x=\"" + format_fixed(x, 2) + "\" y=\"" + std::to_string(axis_y + 16) +
               "\" text-anchor=\"middle\" font-size=\"10\">" + std::to_string(e) + "</text>\n";
    }
    svg += "<text x=\"" + std::to_string(left + plot_w / 2) + "\" y=\"" +
           std::to_string(panel_top + panel_h - 6) +
           "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";

    int legend_x = left + 8;
    for (const Series& s : series) {
        std::string points;
        for (std::size_t e = 0; e < s.values->size(); ++e) {
            points += format_fixed(sx(double(e + 1)), 2) + "," +
                      format_fixed(sy((*s.values)[e]), 2);
            if (e + 1 < s.values->size()) points += " ";
        }
        if (s.values->size() > 1)
            svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + s.color +
                   "\" stroke-width=\"1.5\"/>\n";
        for (std::size_t e = 0; e < s.values->size(); ++e)
            svg += "<circle cx=\"" + format_fixed(sx(double(e + 1)), 2) + "\" cy=\"" +
                   format_fixed(sy((*s.values)[e]), 2) + "\" r=\"2\" fill=\"" + s.color +
                   "\"/>\n";
        svg += "<rect x=\"" + std::to_string(legend_x) + "\" y=\"" +
               std::to_string(panel_top + 10) + "\" width=\"10\" height=\"10\" fill=\"" +
               s.color + "\"/>\n";
        svg += "<text x=\"" + std::to_string(legend_x + 14) + "\" y=\"" +
               std::to_string(panel_top + 19) + "\" font-size=\"11\">" +
               detail::xml_escape(s.label) + "</text>\n";
        legend_x += 14 + 8 * int(s.label.size()) + 18;
    }

    if (annotate && annotate_series && !annotate_series->empty()) {
        std::size_t best = 0;
        for (std::size_t e = 1; e < annotate_series->size(); ++e) {
            const bool better = annotate_max ? (*annotate_series)[e] > (*annotate_series)[best]
                                             : (*annotate_series)[e] < (*annotate_series)[best];
            if (better) best = e; // first occurrence wins on ties
        }
        const double bx = sx(double(best + 1));
        const double by = sy((*annotate_series)[best]);
        svg += "<circle cx=\"" + format_fixed(bx, 2) + "\" cy=\"" + format_fixed(by, 2) +
               "\" r=\"5\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
        svg += "<text x=\"" + format_fixed(bx + 8, 2) + "\" y=\"" + format_fixed(by - 8, 2) +
               "\" font-size=\"11\" fill=\"#d62728\">" + (annotate_max ? "max " : "min ") +
               detail::xml_escape(annotate_label) + " " +
               format_general((*annotate_series)[best], 6) + " @ epoch " +
               std::to_string(best + 1) + "</text>\n";
    }
}

} // namespace detail

/// Training-history chart: a loss panel, plus a metric panel when
/// `spec.user_metric` is set. Each panel draws the train and validation
/// series over epochs; `show_min_max` marks the best validation value
/// (argmin for loss, argmax for the metric; first occurrence on ties).
/// Output bytes are a pure function of the inputs.
inline std::string render_history(const TrainingHistory& history, const PlotSpec& spec) {
    if (history.epochs() == 0) throw validation_error("history has no epochs");
    if (!spec.user_metric.empty() && !history.has(spec.user_metric))
        throw validation_error("unknown metric: " + spec.user_metric);

    const int panel_w = 720, panel_h = 300, title_h = 34;
    const bool with_metric = !spec.user_metric.empty();
    const int height = title_h + panel_h + (with_metric ? panel_h : 0) + 10;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(panel_w) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"monospace\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(panel_w / 2) +
           "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">" +
           detail::xml_escape(spec.title) + "</text>\n";

    std::vector<detail::Series> loss_series{{"loss", "#1f77b4", &history.at("loss")}};
    const bool has_val_loss = history.has("val_loss");
    if (has_val_loss) loss_series.push_back({"val_loss", "#ff7f0e", &history.at("val_loss")});
    detail::render_panel(svg, title_h, panel_w, panel_h, "loss", loss_series,
                         spec.show_min_max && has_val_loss, false, "val_loss",
                         has_val_loss ? &history.at("val_loss") : nullptr);

    if (with_metric) {
        std::vector<detail::Series> metric_series{
            {spec.user_metric, "#1f77b4", &history.at(spec.user_metric)}};
        const std::string val_name = "val_" + spec.user_metric;
        const bool has_val = history.has(val_name);
        if (has_val) metric_series.push_back({val_name, "#ff7f0e", &history.at(val_name)});
        detail::render_panel(svg, title_h + panel_h, panel_w, panel_h, spec.user_metric,
                             metric_series, spec.show_min_max && has_val, true, val_name,
                             has_val ? &history.at(val_name) : nullptr);
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_text_file(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write file: " + path);
    out << text;
    if (!out) throw io_error("failed writing file: " + path);
}

inline void render_history_to_file(const TrainingHistory& history, const PlotSpec& spec) {
    if (spec.output_path.empty()) throw validation_error("plot spec has no output path");
    write_text_file(render_history(history, spec), spec.output_path);
}

} // namespace cml
