#include "coordfree/render.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <string>

namespace coordfree {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::size_t parse_index(std::string_view s, const std::string& what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad " + what + " '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Red for layer 0 (coordinate now) through blue for the deepest colored layer.
std::string ramp(std::size_t k, std::size_t top) {
  const double t = top == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(top);
  const int r = static_cast<int>(215 + t * (43 - 215) + 0.5);
  const int g = static_cast<int>(48 + t * (140 - 48) + 0.5);
  const int b = static_cast<int>(31 + t * (190 - 31) + 0.5);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

void open_svg(std::string& out, std::size_t w, std::size_t h) {
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) + "\">\n";
  out += "<rect class=\"canvas\" x=\"0\" y=\"0\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) +
         "\" fill=\"#f4f4f4\"/>\n";
}

void text(std::string& out, std::size_t x, std::size_t y, const std::string& s) {
  out += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
         "\" font-family=\"monospace\" font-size=\"12\">" + s + "</text>\n";
}

void swatch(std::string& out, std::size_t x, std::size_t y, const std::string& fill, const std::string& label) {
  out += "<rect class=\"legend\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
         "\" width=\"12\" height=\"12\" fill=\"" + fill + "\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
  text(out, x + 16, y + 10, label);
}

constexpr std::size_t kMargin = 10;
constexpr std::size_t kLegendHeight = 56;

}  // namespace

SliceSpec parse_slice(std::string_view dims, std::string_view fixed) {
  SliceSpec s;
  auto d = split(dims, ',');
  if (d.size() != 2) throw ParseError("slice needs exactly two dimensions, e.g. 0,1");
  s.dim_x = parse_index(d[0], "slice dimension");
  s.dim_y = parse_index(d[1], "slice dimension");
  for (auto item : split(fixed, ',')) {
    auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ParseError("fixed value needs the form dim=value");
    const std::size_t dim = parse_index(item.substr(0, eq), "fixed dimension");
    const std::string v(item.substr(eq + 1));
    std::size_t used = 0;
    double value = 0;
    try {
      value = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw ParseError("bad fixed value '" + v + "'");
    s.fixed.emplace_back(dim, value);
  }
  return s;
}

SliceCells slice_cells(const UniformGrid& grid, const SliceSpec& slice) {
  const std::size_t n = grid.dim();
  if (n < 2 && !(n == 1 && slice.dim_x == 0 && slice.dim_y == 0))
    throw DomainError("slices need a grid of dimension >= 2");
  if (slice.dim_x >= n || slice.dim_y >= n)
    throw DomainError("slice dimension outside the grid's " + std::to_string(n) + " dimensions");
  if (n >= 2 && slice.dim_x == slice.dim_y) throw DomainError("slice dimensions must differ");
  std::vector<std::int64_t> base(n, 0);
  std::vector<bool> set(n, false);
  set[slice.dim_x] = set[slice.dim_y] = true;
  for (auto [d, v] : slice.fixed) {
    if (d >= n) throw DomainError("fixed dimension " + std::to_string(d) + " outside the grid");
    if (set[d]) throw DomainError("dimension " + std::to_string(d) + " is free or fixed twice");
    base[d] = static_cast<std::int64_t>(grid.axis_index_of(d, v));
    set[d] = true;
  }
  for (std::size_t d = 0; d < n; ++d)
    if (!set[d]) throw DomainError("dimension " + std::to_string(d) + " needs a fixed value");
  SliceCells out;
  out.nx = grid.count(slice.dim_x);
  out.ny = n == 1 ? 1 : grid.count(slice.dim_y);
  out.cells.reserve(out.nx * out.ny);
  for (std::size_t j = 0; j < out.ny; ++j)
    for (std::size_t i = 0; i < out.nx; ++i) {
      auto m = base;
      m[slice.dim_x] = static_cast<std::int64_t>(i);
      if (n > 1) m[slice.dim_y] = static_cast<std::int64_t>(j);
      out.cells.push_back(static_cast<StateIndex>(grid.flat_index(m)));
    }
  return out;
}

std::string render_layers_svg(const UniformGrid& grid, const LayerMap& layers, double tau, const SliceSpec& slice,
                              const RenderOptions& options) {
  const std::size_t f = layers.fixed_point();
  std::string legend = "F = " + std::to_string(f) + "  tau = " + fmt("%g", tau) + " s  F*tau = " +
                       fmt("%g", static_cast<double>(f) * tau) + " s";
  if (options.depth) legend += "  d = " + std::to_string(*options.depth);

  SliceCells cells;
  std::size_t px = 0;
  if (layers.num_states() > 0) {
    if (layers.num_states() != grid.size()) throw DomainError("layer map is not over the given grid");
    if (options.depth && *options.depth > f)
      throw DomainError("depth " + std::to_string(*options.depth) + " exceeds F = " + std::to_string(f));
    cells = slice_cells(grid, slice);
    px = std::max<std::size_t>(1, options.canvas_px / std::max(cells.nx, cells.ny));
  }
  const std::size_t plot_w = cells.nx * px, plot_h = cells.ny * px;
  const std::size_t width = std::max<std::size_t>(plot_w, 420) + 2 * kMargin;
  const std::size_t height = plot_h + (plot_h ? kMargin : 0) + kLegendHeight + kMargin;

  std::string out;
  open_svg(out, width, height);
  if (plot_h) {
    out += "<g class=\"cells\" shape-rendering=\"crispEdges\">\n";
    const std::size_t top = options.depth ? (*options.depth > 0 ? *options.depth - 1 : 0) : (f > 0 ? f - 1 : 0);
    for (std::size_t j = 0; j < cells.ny; ++j)
      for (std::size_t i = 0; i < cells.nx; ++i) {
        const auto label = layers.label(cells.cells[j * cells.nx + i]);
        std::string fill;
        if (label == LayerMap::kOutside)
          fill = kOutsideFill;
        else if (options.depth ? static_cast<std::size_t>(label) >= *options.depth : static_cast<std::size_t>(label) == f)
          fill = kInsideFill;
        else
          fill = ramp(static_cast<std::size_t>(label), top);
        out += "<rect class=\"cell\" x=\"" + std::to_string(kMargin + i * px) + "\" y=\"" +
               std::to_string(kMargin + (cells.ny - 1 - j) * px) + "\" width=\"" + std::to_string(px) +
               "\" height=\"" + std::to_string(px) + "\" fill=\"" + fill + "\"/>\n";
      }
    out += "</g>\n";
  }
  const std::size_t ly = plot_h ? plot_h + 2 * kMargin : kMargin;
  text(out, kMargin, ly + 12, legend);
  swatch(out, kMargin, ly + 22, std::string(kOutsideFill), "outside W");
  swatch(out, kMargin + 100, ly + 22, ramp(0, 1), "T(0)");
  if (options.depth)
    swatch(out, kMargin + 170, ly + 22, std::string(kInsideFill), "S_" + std::to_string(*options.depth));
  else
    swatch(out, kMargin + 170, ly + 22, std::string(kInsideFill), "T(F)");
  if (plot_h)
    text(out, kMargin + 250, ly + 32,
         "x: dim " + std::to_string(slice.dim_x) + "  y: dim " + std::to_string(slice.dim_y));
  out += "</svg>\n";
  return out;
}

std::string render_trace_svg(const TraceFile& traces, const SliceSpec& slice, std::size_t run) {
  const TraceRun* tr = nullptr;
  for (const auto& r : traces.runs)
    if (r.run == run) tr = &r;
  if (!tr) throw DomainError("trace file has no run " + std::to_string(run));
  const UniformGrid& grid = traces.header.grid;
  const std::size_t n = grid.dim();
  if (slice.dim_x >= n || slice.dim_y >= n || (n > 1 && slice.dim_x == slice.dim_y))
    throw DomainError("slice dimensions do not fit the trace grid");

  constexpr std::size_t kPanel = 400;
  const std::size_t width = 2 * kPanel + 3 * kMargin, height = kPanel + 2 * kMargin + kLegendHeight;
  std::string out;
  open_svg(out, width, height);

  // Trajectory panel in grid bounds.
  const double x0 = grid.lower()[slice.dim_x], x1 = grid.upper()[slice.dim_x];
  const double y0 = grid.lower()[slice.dim_y], y1 = grid.upper()[slice.dim_y];
  auto sx = [&](double v) { return kMargin + (x1 > x0 ? (v - x0) / (x1 - x0) : 0.5) * kPanel; };
  auto sy = [&](double v) { return kMargin + kPanel - (y1 > y0 ? (v - y0) / (y1 - y0) : 0.5) * kPanel; };
  out += "<rect class=\"panel\" x=\"" + std::to_string(kMargin) + "\" y=\"" + std::to_string(kMargin) +
         "\" width=\"" + std::to_string(kPanel) + "\" height=\"" + std::to_string(kPanel) +
         "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
  std::string path;
  for (const auto& r : tr->trace.records) {
    const Vector p = grid.point_of(r.state);
    path += fmt("%.2f", sx(p(static_cast<Eigen::Index>(slice.dim_x)))) + "," +
            fmt("%.2f", sy(p(static_cast<Eigen::Index>(slice.dim_y)))) + " ";
  }
  if (!path.empty()) path.pop_back();
  out += "<polyline class=\"trajectory\" points=\"" + path + "\" fill=\"none\" stroke=\"#2b8cbe\" stroke-width=\"1\"/>\n";
  for (const auto& r : tr->trace.records) {
    if (!r.coordinated || !r.input) continue;
    const Vector p = grid.point_of(r.state);
    out += "<circle class=\"sync\" cx=\"" + fmt("%.2f", sx(p(static_cast<Eigen::Index>(slice.dim_x)))) +
           "\" cy=\"" + fmt("%.2f", sy(p(static_cast<Eigen::Index>(slice.dim_y)))) +
           "\" r=\"2\" fill=\"#d7301f\"/>\n";
  }

  // Countdown panel.
  const std::size_t ox = 2 * kMargin + kPanel;
  out += "<rect class=\"panel\" x=\"" + std::to_string(ox) + "\" y=\"" + std::to_string(kMargin) + "\" width=\"" +
         std::to_string(kPanel) + "\" height=\"" + std::to_string(kPanel) + "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
  std::size_t kmax = 1, cmax = 1;
  for (const auto& r : tr->trace.records) {
    kmax = std::max(kmax, r.time);
    if (r.countdown) cmax = std::max(cmax, *r.countdown);
  }
  std::string steps;
  for (const auto& r : tr->trace.records) {
    if (!r.countdown) continue;
    const double cx = static_cast<double>(ox) + static_cast<double>(r.time) / static_cast<double>(kmax) * kPanel;
    const double cy = kMargin + kPanel - static_cast<double>(*r.countdown) / static_cast<double>(cmax) * kPanel;
    steps += fmt("%.2f", cx) + "," + fmt("%.2f", cy) + " ";
  }
  if (!steps.empty()) {
    steps.pop_back();
    out += "<polyline class=\"countdown\" points=\"" + steps + "\" fill=\"none\" stroke=\"#d7301f\" stroke-width=\"1\"/>\n";
  }

  std::string legend = traces.header.scenario + "  mode " + traces.header.mode + "  run " + std::to_string(run) +
                       "  verdict " + tr->verdict + "  tau = " + fmt("%g", traces.header.tau) + " s";
  if (traces.header.fixed_point) legend += "  F = " + std::to_string(*traces.header.fixed_point);
  text(out, kMargin, kPanel + 2 * kMargin + 12, legend);
  text(out, kMargin, kPanel + 2 * kMargin + 30,
       "left: dims " + std::to_string(slice.dim_x) + "," + std::to_string(slice.dim_y) +
           " (dots: coordination)  right: countdown (max " + std::to_string(cmax) + ") over " +
           std::to_string(kmax) + " steps");
  out += "</svg>\n";
  return out;
}

}  // namespace coordfree
