#include "qdsc/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "qdsc/harness/config.hpp"

namespace qdsc::harness {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 160, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
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

double nice_step(double range) {
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    } else if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double step = nice_step(hi - lo);
    lo = std::floor(lo / step) * step;
    hi = std::ceil(hi / step) * step;
  }
};

}  // namespace

std::string render_svg(const Figure& fig) {
  Range xr, yr;
  for (const auto& s : fig.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
    for (double v : s.lo) yr.add(v);
    for (double v : s.hi) yr.add(v);
  }
  xr.finish();
  yr.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(fig.title) << "</text>\n";

  // Grid and ticks.
  const double xs = nice_step(xr.hi - xr.lo), ys = nice_step(yr.hi - yr.lo);
  for (int k = 0; xr.lo + k * xs <= xr.hi + 1e-9 * xs; ++k) {
    const double v = xr.lo + k * xs, x = px(v);
    o << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(x) << "\" y2=\"" << num(kTop + ph)
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">" << tick_label(v)
      << "</text>\n";
  }
  for (int k = 0; yr.lo + k * ys <= yr.hi + 1e-9 * ys; ++k) {
    const double v = yr.lo + k * ys, y = py(v);
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\"" << num(y)
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick_label(v)
      << "</text>\n";
  }
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 16) << "\" text-anchor=\"middle\">"
    << escape(fig.x_label) << "</text>\n";
  o << "<text transform=\"translate(20 " << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(fig.y_label) << "</text>\n";

  for (std::size_t i = 0; i < fig.series.size(); ++i) {
    const auto& s = fig.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (!s.lo.empty() && s.lo.size() == n && s.hi.size() == n && n > 0) {
      o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t k = 0; k < n; ++k) o << num(px(s.x[k])) << ',' << num(py(s.hi[k])) << ' ';
      for (std::size_t k = n; k-- > 0;) o << num(px(s.x[k])) << ',' << num(py(s.lo[k])) << ' ';
      o << "\"/>\n";
    }
    if (n > 0) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < n; ++k) {
        if (std::isfinite(s.y[k])) o << num(px(s.x[k])) << ',' << num(py(s.y[k])) << ' ';
      }
      o << "\"/>\n";
    }
    const double ly = kTop + 14 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(kLeft + pw + 32)
      << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    o << "<text x=\"" << num(kLeft + pw + 38) << "\" y=\"" << num(ly) << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::pair<std::vector<double>, std::vector<double>> rolling_mean_std(const std::vector<double>& y, int window) {
  std::vector<double> mean(y.size()), sd(y.size());
  const std::size_t w = static_cast<std::size_t>(std::max(window, 1));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t start = i + 1 >= w ? i + 1 - w : 0;
    const double n = static_cast<double>(i + 1 - start);
    double m = 0.0;
    for (std::size_t k = start; k <= i; ++k) m += y[k];
    m /= n;
    double v = 0.0;
    for (std::size_t k = start; k <= i; ++k) v += (y[k] - m) * (y[k] - m);
    mean[i] = m;
    sd[i] = std::sqrt(v / n);
  }
  return {mean, sd};
}

Figure figure_from_tables(const std::vector<std::pair<std::string, CsvTable>>& inputs, int window) {
  if (inputs.empty()) throw Error("csv", "no input tables");
  const auto& first = inputs.front().second;
  auto need = [](const std::string& label, const CsvTable& t, const char* col) {
    const int c = t.column(col);
    if (c < 0) throw Error("csv", label + ": missing column '" + col + "'");
    return c;
  };
  Figure fig;
  if (first.column("episode") >= 0) {
    fig = {"Training return", "episode", "return (moving average, ±1 std)", {}};
    for (const auto& [label, t] : inputs) {
      const auto ret = t.values(need(label, t, "return"));
      auto [m, sd] = rolling_mean_std(ret, window);
      Series s{label, t.values(need(label, t, "episode")), m, {}, {}};
      for (std::size_t i = 0; i < m.size(); ++i) {
        s.lo.push_back(m[i] - sd[i]);
        s.hi.push_back(m[i] + sd[i]);
      }
      fig.series.push_back(std::move(s));
    }
  } else if (first.column("delta_max") >= 0) {
    fig = {"Rotor angle separation", "t (s)", "angle (deg)", {}};
    for (const auto& [label, t] : inputs) {
      const auto time = t.values(need(label, t, "t"));
      fig.series.push_back({label + " delta_max", time, t.values(need(label, t, "delta_max")), {}, {}});
      if (inputs.size() == 1) {
        const auto coi = t.values(need(label, t, "delta_coi"));
        for (int i = 0; t.column("delta_" + std::to_string(i)) >= 0; ++i) {
          auto d = t.values(t.column("delta_" + std::to_string(i)));
          for (std::size_t k = 0; k < d.size(); ++k) d[k] -= coi[k];
          fig.series.push_back({"delta_" + std::to_string(i) + " - coi", time, d, {}, {}});
        }
      }
    }
  } else if (first.column("mean_return") >= 0) {
    fig = {"Return under depolarizing noise", "p", "return (mean ± std)", {}};
    for (const auto& [label, t] : inputs) {
      const auto m = t.values(need(label, t, "mean_return"));
      const auto sd = t.values(need(label, t, "std_return"));
      Series s{label, t.values(need(label, t, "p")), m, {}, {}};
      for (std::size_t i = 0; i < m.size(); ++i) {
        s.lo.push_back(m[i] - sd[i]);
        s.hi.push_back(m[i] + sd[i]);
      }
      fig.series.push_back(std::move(s));
    }
  } else {
    throw Error("csv", inputs.front().first + ": unrecognised header");
  }
  return fig;
}

}  // namespace qdsc::harness
