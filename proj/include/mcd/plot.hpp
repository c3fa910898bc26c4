#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd::plot {

// 8-bit grayscale PNG; values are mapped linearly from [lo, hi] and clipped.
void write_png_gray(const std::filesystem::path& path, const Image& image, double lo, double hi);
// 8-bit RGB PNG from interleaved rows.
void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb);
// Label image with a fixed categorical palette, each pixel scaled up by `zoom`.
void write_png_labels(const std::filesystem::path& path, const NdArray<std::uint16_t>& labels, std::size_t zoom);

// Images of equal height side by side with `gap` columns of `fill` between.
Image hstack(const std::vector<Image>& images, std::size_t gap, double fill);
// Nearest-neighbour enlargement.
Image zoom(const Image& image, std::size_t factor);

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
  bool markers = false;
};

struct LineChart {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  std::vector<double> vertical_markers;  // drawn as thin grey lines
};

void write_line_chart_svg(const std::filesystem::path& path, const LineChart& chart);

// Heatmap with cell annotations; `values` is rows x cols, colour scaled on [0, 1].
void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<std::string>& row_labels, const std::vector<std::string>& col_labels,
                       const std::vector<std::vector<double>>& values);

void write_table_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace mcd::plot
