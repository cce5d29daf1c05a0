#include "lieflow/plot.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

#include "lieflow/errors.hpp"
#include "lieflow/image.hpp"

namespace lieflow {

using nlohmann::json;

namespace {

// 3x5 digit/symbol glyphs, enough for axis labels
const std::map<char, std::array<std::uint8_t, 5>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 5>> g = {
      {'0', {0b111, 0b101, 0b101, 0b101, 0b111}}, {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
      {'2', {0b111, 0b001, 0b111, 0b100, 0b111}}, {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
      {'4', {0b101, 0b101, 0b111, 0b001, 0b001}}, {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
      {'6', {0b111, 0b100, 0b111, 0b101, 0b111}}, {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
      {'8', {0b111, 0b101, 0b111, 0b101, 0b111}}, {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
      {'-', {0b000, 0b000, 0b111, 0b000, 0b000}}, {'.', {0b000, 0b000, 0b000, 0b000, 0b010}},
      {'e', {0b000, 0b111, 0b111, 0b100, 0b111}}, {'+', {0b000, 0b010, 0b111, 0b010, 0b000}},
  };
  return g;
}

void draw_text(Image& img, int x, int y, const std::string& text, const Eigen::Vector3d& rgb) {
  for (char ch : text) {
    auto it = glyphs().find(ch);
    if (it != glyphs().end()) {
      for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 3; ++c) {
          if ((it->second[r] >> (2 - c)) & 1) {
            const int px = x + c, py = y + r;
            if (px >= 0 && px < img.width && py >= 0 && py < img.height) {
              for (int k = 0; k < 3; ++k) img.at(py, px, k) = rgb[k];
            }
          }
        }
      }
    }
    x += 4;
  }
}

void draw_line(Image& img, double x0, double y0, double x1, double y1,
               const Eigen::Vector3d& rgb) {
  const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (x >= 0 && x < img.width && y >= 0 && y < img.height) {
      for (int k = 0; k < 3; ++k) img.at(y, x, k) = rgb[k];
    }
  }
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, const Eigen::Vector3d& rgb) {
  for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y) {
    for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) {
      for (int k = 0; k < 3; ++k) img.at(y, x, k) = rgb[k];
    }
  }
}

std::string short_number(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 1e-2 || std::abs(v) >= 1e4)) {
    std::snprintf(buf, sizeof(buf), "%.0e", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  }
  return buf;
}

const Eigen::Vector3d kSeriesColors[] = {
    {0.85, 0.25, 0.25}, {0.20, 0.45, 0.85}, {0.20, 0.65, 0.30},
    {0.80, 0.55, 0.15}, {0.55, 0.30, 0.70}, {0.15, 0.65, 0.65},
};

}  // namespace

void plot_metrics(const std::string& metrics_path, const std::string& out_png) {
  std::ifstream f(metrics_path);
  if (!f) throw IoFailure("plot: cannot open '" + metrics_path + "'");

  const std::vector<std::string> keys = {"loss_pho", "loss_div", "loss_mom", "loss_trans",
                                         "total"};
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("plot: bad metrics line " + std::to_string(line_no) + ": " + e.what());
    }
    const double it = j.value("iteration", line_no);
    for (const auto& key : keys) {
      if (j.contains(key)) {
        const double v = j[key].get<double>();
        if (v > 0.0) series[key].push_back({it, v});
      }
    }
  }
  if (series.empty()) throw ParseError("plot: no plottable series in '" + metrics_path + "'");

  const int width = 860, height = 520, margin = 50;
  Image img(width, height);
  std::fill(img.data.begin(), img.data.end(), 1.0);

  double x_max = 1, y_min = 1e300, y_max = -1e300;
  for (const auto& [key, pts] : series) {
    for (const auto& [x, y] : pts) {
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  const double ly_min = std::log10(y_min), ly_max = std::log10(std::max(y_max, y_min * 10));

  auto px = [&](double x) { return margin + (width - 2 * margin) * x / x_max; };
  auto py = [&](double y) {
    return height - margin -
           (height - 2 * margin) * (std::log10(y) - ly_min) / (ly_max - ly_min);
  };

  const Eigen::Vector3d axis_color(0.2, 0.2, 0.2);
  draw_line(img, margin, height - margin, width - margin, height - margin, axis_color);
  draw_line(img, margin, margin, margin, height - margin, axis_color);
  for (int tick = 0; tick <= 4; ++tick) {
    const double x = x_max * tick / 4.0;
    draw_line(img, px(x), height - margin, px(x), height - margin + 4, axis_color);
    draw_text(img, static_cast<int>(px(x)) - 8, height - margin + 7, short_number(x),
              axis_color);
    const double ly = ly_min + (ly_max - ly_min) * tick / 4.0;
    draw_line(img, margin - 4, py(std::pow(10, ly)), margin, py(std::pow(10, ly)), axis_color);
    draw_text(img, 4, static_cast<int>(py(std::pow(10, ly))) - 2, short_number(std::pow(10, ly)),
              axis_color);
  }

  int series_idx = 0;
  for (const auto& key : keys) {
    auto it = series.find(key);
    if (it == series.end()) continue;
    const auto& color = kSeriesColors[series_idx % 6];
    const auto& pts = it->second;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      draw_line(img, px(pts[i - 1].first), py(pts[i - 1].second), px(pts[i].first),
                py(pts[i].second), color);
    }
    fill_rect(img, width - margin - 120, margin + 14 * series_idx,
              width - margin - 110, margin + 14 * series_idx + 8, color);
    ++series_idx;
  }
  write_png(out_png, img);
}

void plot_eval_report(const std::string& report_path, const std::string& out_png) {
  std::ifstream f(report_path);
  if (!f) throw IoFailure("plot: cannot open '" + report_path + "'");
  json j;
  try {
    j = json::parse(std::string((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>()));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("plot: ") + e.what());
  }
  const auto& rows = j.at("rows");
  if (rows.empty()) throw ParseError("plot: report has no rows");

  const int width = 860, height = 400, margin = 50;
  Image img(width, height);
  std::fill(img.data.begin(), img.data.end(), 1.0);

  double max_psnr = 1.0;
  for (const auto& r : rows) max_psnr = std::max(max_psnr, r.at("psnr").get<double>());

  const Eigen::Vector3d axis_color(0.2, 0.2, 0.2);
  draw_line(img, margin, height - margin, width - margin, height - margin, axis_color);
  draw_line(img, margin, margin, margin, height - margin, axis_color);

  const int n = static_cast<int>(rows.size());
  const double band = static_cast<double>(width - 2 * margin) / n;
  for (int i = 0; i < n; ++i) {
    const double v = rows[i].at("psnr").get<double>();
    const int x0 = margin + static_cast<int>(band * i + band * 0.15);
    const int x1 = margin + static_cast<int>(band * i + band * 0.85);
    const int y0 = height - margin -
                   static_cast<int>((height - 2 * margin) * v / (1.1 * max_psnr));
    fill_rect(img, x0, y0, x1, height - margin - 1, kSeriesColors[1]);
  }
  draw_text(img, 4, margin - 10, short_number(max_psnr), axis_color);
  draw_text(img, 4, height - margin - 2, "0", axis_color);
  write_png(out_png, img);
}

void plot_file(const std::string& input_path, const std::string& out_png) {
  std::ifstream f(input_path);
  if (!f) throw IoFailure("plot: cannot open '" + input_path + "'");
  std::string first_line;
  std::getline(f, first_line);
  f.close();
  try {
    const json j = json::parse(first_line);
    if (j.contains("iteration")) {
      plot_metrics(input_path, out_png);
      return;
    }
  } catch (const json::parse_error&) {
    // fall through: whole-file JSON report
  }
  plot_eval_report(input_path, out_png);
}

}  // namespace lieflow
