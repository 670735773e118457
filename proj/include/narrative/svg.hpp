#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "narrative/ca.hpp"
#include "narrative/clustering.hpp"
#include "narrative/error.hpp"

namespace narrative {

struct PointSelection {
  enum class Kind { top_k, near_origin, labels };
  Kind kind = Kind::top_k;
  std::size_t k = 40;
  double window = 0.25;  // fraction of the plane's largest |coordinate|
  std::vector<std::string> labels;

  static PointSelection top(std::size_t k) { return {Kind::top_k, k, 0.25, {}}; }
  static PointSelection near_origin(double window = 0.25) { return {Kind::near_origin, 0, window, {}}; }
  static PointSelection explicit_labels(std::vector<std::string> l) {
    return {Kind::labels, 0, 0.25, std::move(l)};
  }
};

struct PlaneOptions {
  Side side = Side::col;
  PointSelection selection;
  bool trajectory = false;  // all row points, joined by arrows in row order
  std::string title;
  double width = 800;
  double height = 800;
};

struct DendrogramPlotOptions {
  std::optional<int> cut_k;
  std::vector<int> leaf_order;  // empty: chronological or seriation default
  bool leaf_labels = true;
  std::string title;
  double height = 600;
};

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string f2(double x) {
  if (std::abs(x) < 0.005) x = 0.0;  // avoid "-0.00"
  return fmt::format("{:.2f}", x);
}

inline std::string svg_open(double w, double h) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      f2(w), f2(h));
}

struct LabelBox {
  double x0, y0, x1, y1;
  bool overlaps(const LabelBox& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
};

}  // namespace detail

inline std::vector<std::size_t> select_points(const CAModel& model, int axis_x, int axis_y,
                                              const PlaneOptions& opt) {
  const auto& labels = model.labels(opt.side);
  const auto& x = model.coords(opt.side);
  std::vector<std::size_t> idx;
  switch (opt.selection.kind) {
    case PointSelection::Kind::top_k: {
      const auto k = std::min(opt.selection.k, labels.size());
      for (const auto& c : top_contributors(model, {axis_x, axis_y}, k, opt.side)) {
        idx.push_back(static_cast<std::size_t>(
            std::find(labels.begin(), labels.end(), c.label) - labels.begin()));
      }
      std::sort(idx.begin(), idx.end());
      break;
    }
    case PointSelection::Kind::near_origin: {
      if (!(opt.selection.window > 0)) throw ValidationError("near-origin window must be positive");
      double mx = 0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        mx = std::max({mx, std::abs(x(i, axis_x)), std::abs(x(i, axis_y))});
      }
      const double r = opt.selection.window * mx;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (std::abs(x(i, axis_x)) <= r && std::abs(x(i, axis_y)) <= r) {
          idx.push_back(static_cast<std::size_t>(i));
        }
      }
      break;
    }
    case PointSelection::Kind::labels: {
      std::set<std::size_t> chosen;
      for (const auto& l : opt.selection.labels) {
        auto it = std::find(labels.begin(), labels.end(), l);
        if (it == labels.end()) throw ValidationError("label '" + l + "' is not in the model");
        chosen.insert(static_cast<std::size_t>(it - labels.begin()));
      }
      idx.assign(chosen.begin(), chosen.end());
      break;
    }
  }
  return idx;
}

// Scatter of selected points on factors (axis_x, axis_y), 0-based. Equal
// scale on both axes so distances read correctly.
inline std::string render_factor_plane(const CAModel& model, int axis_x, int axis_y,
                                       const PlaneOptions& opt) {
  check_axes(model, {axis_x, axis_y});
  const auto idx = select_points(model, axis_x, axis_y, opt);
  if (idx.empty() && !opt.trajectory) throw ValidationError("no points selected for the plot");

  struct Pt {
    double x, y;
    std::string label;
    bool row;
  };
  std::vector<Pt> pts;
  const auto& xs = model.coords(opt.side);
  for (auto i : idx) {
    const auto ii = static_cast<Eigen::Index>(i);
    pts.push_back({xs(ii, axis_x), xs(ii, axis_y), model.labels(opt.side)[i], opt.side == Side::row});
  }
  std::vector<Pt> traj;
  if (opt.trajectory) {
    for (std::size_t i = 0; i < model.row_labels.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      traj.push_back({model.row_coords(ii, axis_x), model.row_coords(ii, axis_y), model.row_labels[i], true});
    }
  }

  double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
  for (const auto* set : {&pts, &traj}) {
    for (const auto& p : *set) {
      lo_x = std::min(lo_x, p.x);
      hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_y = std::max(hi_y, p.y);
    }
  }
  const double margin = 60;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12}) * 1.1;
  const double scale = std::min(opt.width, opt.height) - 2 * margin;
  const double cx = (lo_x + hi_x) / 2, cy = (lo_y + hi_y) / 2;
  auto sx = [&](double v) { return opt.width / 2 + (v - cx) / span * scale; };
  auto sy = [&](double v) { return opt.height / 2 - (v - cy) / span * scale; };

  const auto pct = percent_inertia(model);
  std::string out = detail::svg_open(opt.width, opt.height);
  out += "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"8\" "
         "markerHeight=\"8\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#b03030\"/></marker></defs>\n";
  if (!opt.title.empty()) {
    out += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
                       detail::f2(opt.width / 2), detail::xml_escape(opt.title));
  }
  out += fmt::format(
      "<g class=\"axes\" stroke=\"#888\" stroke-dasharray=\"4,3\">"
      "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/><line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/></g>\n",
      detail::f2(margin / 2), detail::f2(sy(0)), detail::f2(opt.width - margin / 2), detail::f2(sy(0)),
      detail::f2(sx(0)), detail::f2(margin / 2), detail::f2(sx(0)), detail::f2(opt.height - margin / 2));
  out += fmt::format("<text class=\"axis-label\" x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"13\">Factor {} ({:.1f}%)</text>\n",
                     detail::f2(opt.width - margin / 2), detail::f2(opt.height - 10), axis_x + 1,
                     pct[static_cast<std::size_t>(axis_x)]);
  out += fmt::format("<text class=\"axis-label\" x=\"14\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 14 {})\">Factor {} ({:.1f}%)</text>\n",
                     detail::f2(margin), detail::f2(margin), axis_y + 1, pct[static_cast<std::size_t>(axis_y)]);

  if (!traj.empty()) {
    out += "<g class=\"trajectory\" stroke=\"#b03030\" stroke-width=\"1.5\" fill=\"none\">\n";
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
      const double x1 = sx(traj[i].x), y1 = sy(traj[i].y), x2 = sx(traj[i + 1].x), y2 = sy(traj[i + 1].y);
      // stop short of the target marker
      const double len = std::hypot(x2 - x1, y2 - y1);
      const double t = len > 8 ? (len - 5) / len : 1.0;
      out += fmt::format("<line class=\"arrow\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" marker-end=\"url(#arrow)\"/>\n",
                         detail::f2(x1), detail::f2(y1), detail::f2(x1 + t * (x2 - x1)), detail::f2(y1 + t * (y2 - y1)));
    }
    out += "</g>\n";
  }

  // Labels are placed top to bottom; a label that would overlap one already
  // placed is pushed down until it fits.
  std::vector<Pt> all = traj;
  if (!opt.trajectory || opt.side == Side::col) all.insert(all.end(), pts.begin(), pts.end());
  std::vector<std::size_t> by_y(all.size());
  std::iota(by_y.begin(), by_y.end(), 0);
  std::stable_sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) {
    return sy(all[a].y) < sy(all[b].y);
  });
  std::vector<detail::LabelBox> placed;
  const double fs = 12, line_h = 13;
  out += "<g class=\"points\" font-size=\"12\">\n";
  for (auto i : by_y) {
    const auto& p = all[i];
    const double px = sx(p.x), py = sy(p.y);
    const double w = 7.0 * static_cast<double>(detail::codepoint_count(p.label));
    detail::LabelBox box{px + 4, py - fs + 3, px + 4 + w, py + 3};
    while (std::any_of(placed.begin(), placed.end(), [&](const auto& b) { return b.overlaps(box); })) {
      box.y0 += line_h;
      box.y1 += line_h;
    }
    placed.push_back(box);
    const char* color = p.row ? "#b03030" : "#1f4e9c";
    out += fmt::format("<circle class=\"{}\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>", p.row ? "row" : "col",
                       detail::f2(px), detail::f2(py), color);
    out += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", detail::f2(box.x0),
                       detail::f2(box.y1 - 3), color, detail::xml_escape(p.label));
  }
  out += "</g>\n</svg>\n";
  return out;
}

// Inverted-U per merge; leaves left to right in `leaf_order`.
inline std::string render_dendrogram(const Dendrogram& d, const DendrogramPlotOptions& opt = {}) {
  const int n = d.leaf_count();
  if (n < 1 || static_cast<int>(d.merges.size()) != n - 1) throw ValidationError("malformed dendrogram");
  std::vector<int> order = opt.leaf_order.empty() ? display_order(d) : opt.leaf_order;
  {
    auto s = order;
    std::sort(s.begin(), s.end());
    if (s != detail::identity_order(n)) throw ValidationError("leaf order is not a permutation");
  }
  if (opt.cut_k && (*opt.cut_k < 1 || *opt.cut_k > n)) {
    throw ValidationError("cut k outside 1.." + std::to_string(n));
  }
  const double step = std::clamp(900.0 / n, 4.0, 24.0);
  const double margin_l = 60, margin_r = 20, margin_t = 40;
  const double label_band = opt.leaf_labels ? 60 : 10;
  const double width = margin_l + margin_r + step * n;
  const double plot_h = opt.height - margin_t - label_band;
  double hmax = 0;
  for (const auto& m : d.merges) hmax = std::max(hmax, m.height);
  if (!(hmax > 0)) hmax = 1;
  auto y_of = [&](double h) { return margin_t + plot_h * (1 - h / hmax); };

  std::vector<double> nx(static_cast<std::size_t>(2 * n - 1)), nh(static_cast<std::size_t>(2 * n - 1), 0.0);
  for (int p = 0; p < n; ++p) nx[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = margin_l + step * (p + 0.5);

  std::string out = detail::svg_open(width, opt.height);
  if (!opt.title.empty()) {
    out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                       detail::f2(width / 2), detail::xml_escape(opt.title));
  }
  out += fmt::format("<line class=\"height-axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444\"/>\n",
                     detail::f2(margin_l - 10), detail::f2(y_of(hmax)), detail::f2(y_of(0)));
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.3g}</text>\n",
                     detail::f2(margin_l - 12), detail::f2(y_of(hmax) + 4), hmax);
  out += "<g class=\"merges\" stroke=\"#222\" fill=\"none\" stroke-width=\"1\">\n";
  for (int t = 0; t < n - 1; ++t) {
    const auto& m = d.merges[static_cast<std::size_t>(t)];
    const auto l = static_cast<std::size_t>(m.left), r = static_cast<std::size_t>(m.right);
    const auto me = static_cast<std::size_t>(n + t);
    out += fmt::format("<path d=\"M{} {} V{} H{} V{}\"/>\n", detail::f2(nx[l]), detail::f2(y_of(nh[l])),
                       detail::f2(y_of(m.height)), detail::f2(nx[r]), detail::f2(y_of(nh[r])));
    nx[me] = (nx[l] + nx[r]) / 2;
    nh[me] = m.height;
  }
  out += "</g>\n";
  if (opt.cut_k) {
    const int k = *opt.cut_k;
    // between the last kept merge and the first undone one
    const double below = n - k - 1 >= 0 ? d.merges[static_cast<std::size_t>(n - k - 1)].height : 0.0;
    const double above = k > 1 ? d.merges[static_cast<std::size_t>(n - k)].height : hmax * 1.05;
    const double yc = y_of((below + above) / 2);
    out += fmt::format("<line class=\"cut\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#b03030\" stroke-dasharray=\"6,4\"/>\n",
                       detail::f2(margin_l - 10), detail::f2(yc), detail::f2(width - margin_r), detail::f2(yc));
  }
  if (opt.leaf_labels) {
    const double fs = std::min(11.0, step * 0.9);
    out += fmt::format("<g class=\"leaves\" font-size=\"{}\">\n", detail::f2(fs));
    for (int p = 0; p < n; ++p) {
      const int leaf = order[static_cast<std::size_t>(p)];
      const double x = nx[static_cast<std::size_t>(leaf)] + fs / 3, y = y_of(0) + 6;
      out += fmt::format("<text x=\"{0}\" y=\"{1}\" transform=\"rotate(90 {0} {1})\">{2}</text>\n",
                         detail::f2(x), detail::f2(y), detail::xml_escape(d.labels[static_cast<std::size_t>(leaf)]));
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace narrative
