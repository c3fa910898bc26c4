#include "mcd/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mcd/error.hpp"
#include "mcd/store.hpp"

namespace mcd::plot {

namespace fs = std::filesystem;

namespace {

void write_png(const fs::path& path, std::size_t width, std::size_t height, int color_type,
               const std::vector<std::uint8_t>& pixels) {
  const std::size_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  if (pixels.size() != width * height * channels) throw DataError("png: pixel buffer size mismatch");
  const fs::path tmp = path.string() + ".tmp";
  FILE* fp = std::fopen(tmp.c_str(), "wb");
  if (!fp) throw IoError("cannot open '" + tmp.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + r * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("error closing '" + tmp.string() + "'");
  fs::rename(tmp, path);
}

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

std::string num(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const std::uint8_t kPalette[][3] = {{0, 0, 0},     {31, 119, 180}, {214, 39, 40},  {44, 160, 44},
                                    {255, 127, 14}, {148, 103, 189}, {140, 86, 75}, {227, 119, 194},
                                    {188, 189, 34}, {23, 190, 207}};

// Roughly 5 round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace

void write_png_gray(const fs::path& path, const Image& image, double lo, double hi) {
  require_rank(image.shape(), 2, "write_png_gray");
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<std::uint8_t> px(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::isfinite(image[i]) ? (image[i] - lo) / span : 0.0;
    px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  }
  write_png(path, image.dim(1), image.dim(0), PNG_COLOR_TYPE_GRAY, px);
}

void write_png_rgb(const fs::path& path, std::size_t width, std::size_t height, const std::vector<std::uint8_t>& rgb) {
  write_png(path, width, height, PNG_COLOR_TYPE_RGB, rgb);
}

void write_png_labels(const fs::path& path, const NdArray<std::uint16_t>& labels, std::size_t zoom_factor) {
  require_rank(labels.shape(), 2, "write_png_labels");
  const std::size_t h = labels.dim(0), w = labels.dim(1), z = std::max<std::size_t>(zoom_factor, 1);
  std::vector<std::uint8_t> rgb(h * z * w * z * 3);
  for (std::size_t r = 0; r < h * z; ++r)
    for (std::size_t c = 0; c < w * z; ++c) {
      const auto* col = kPalette[labels(r / z, c / z) % 10];
      std::copy_n(col, 3, rgb.data() + (r * w * z + c) * 3);
    }
  write_png(path, w * z, h * z, PNG_COLOR_TYPE_RGB, rgb);
}

Image hstack(const std::vector<Image>& images, std::size_t gap, double fill) {
  if (images.empty()) return {};
  const std::size_t h = images.front().dim(0);
  std::size_t w = 0;
  for (const auto& im : images) {
    if (im.rank() != 2 || im.dim(0) != h) throw DataError("hstack: images need equal heights");
    w += im.dim(1);
  }
  w += gap * (images.size() - 1);
  Image out({h, w}, fill);
  std::size_t x0 = 0;
  for (const auto& im : images) {
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < im.dim(1); ++c) out(r, x0 + c) = im(r, c);
    x0 += im.dim(1) + gap;
  }
  return out;
}

Image zoom(const Image& image, std::size_t factor) {
  require_rank(image.shape(), 2, "zoom");
  const std::size_t f = std::max<std::size_t>(factor, 1);
  Image out({image.dim(0) * f, image.dim(1) * f});
  for (std::size_t r = 0; r < out.dim(0); ++r)
    for (std::size_t c = 0; c < out.dim(1); ++c) out(r, c) = image(r / f, c / f);
  return out;
}

void write_line_chart_svg(const fs::path& path, const LineChart& chart) {
  const double W = 720, H = 440, L = 70, R = 180, T = 40, B = 55;
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]), xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]), yhi = std::max(yhi, s.y[i]);
    }
  if (!(xhi >= xlo)) xlo = 0, xhi = 1;
  if (!(yhi >= ylo)) ylo = 0, yhi = 1;
  if (xhi == xlo) xhi = xlo + 1;
  if (yhi == ylo) yhi = ylo + 1;
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad, yhi += pad;
  auto px = [&](double x) { return L + (x - xlo) / (xhi - xlo) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ylo) / (yhi - ylo) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(chart.title) << "</text>\n";
  for (double t : ticks(xlo, xhi))
    o << "<line x1=\"" << px(t) << "\" x2=\"" << px(t) << "\" y1=\"" << H - B << "\" y2=\"" << H - B + 5
      << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
      << num(t, 4) << "</text>\n";
  for (double t : ticks(ylo, yhi))
    o << "<line x1=\"" << L - 5 << "\" x2=\"" << W - R << "\" y1=\"" << py(t) << "\" y2=\"" << py(t)
      << "\" stroke=\"#e0e0e0\"/><text x=\"" << L - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
      << num(t, 4) << "</text>\n";
  for (double m : chart.vertical_markers)
    if (m >= xlo && m <= xhi)
      o << "<line x1=\"" << px(m) << "\" x2=\"" << px(m) << "\" y1=\"" << T << "\" y2=\"" << H - B
        << "\" stroke=\"#b0b0b0\" stroke-dasharray=\"2,3\"/>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << esc(chart.x_label)
    << "</text>\n";
  o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << esc(chart.y_label) << "</text>\n";
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* col = kColors[k % 10];
    std::ostringstream pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (std::isfinite(s.y[i])) pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.6\""
      << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"" << pts.str() << "\"/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
        if (std::isfinite(s.y[i]))
          o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << W - R + 12 << "\" x2=\"" << W - R + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << col << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>";
    o << "<text x=\"" << W - R + 42 << "\" y=\"" << ly + 4 << "\">" << esc(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  store::write_text_atomic(path, o.str());
}

void write_heatmap_svg(const fs::path& path, const std::string& title, const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels, const std::vector<std::vector<double>>& values) {
  const double cell = 48, L = 90, T = 70;
  const double W = L + cell * static_cast<double>(col_labels.size()) + 20;
  const double H = T + cell * static_cast<double>(row_labels.size()) + 40;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
  o << "<text x=\"" << L + cell * static_cast<double>(col_labels.size()) / 2 << "\" y=\"40\" text-anchor=\"middle\">predicted</text>\n";
  for (std::size_t c = 0; c < col_labels.size(); ++c)
    o << "<text x=\"" << L + cell * (static_cast<double>(c) + 0.5) << "\" y=\"" << T - 8
      << "\" text-anchor=\"middle\">" << esc(col_labels[c]) << "</text>\n";
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    o << "<text x=\"" << L - 8 << "\" y=\"" << T + cell * (static_cast<double>(r) + 0.5) + 4
      << "\" text-anchor=\"end\">" << esc(row_labels[r]) << "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      const double v = r < values.size() && c < values[r].size() ? values[r][c] : 0.0;
      const double t = std::clamp(v, 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255 * (1 - t)));
      o << "<rect x=\"" << L + cell * static_cast<double>(c) << "\" y=\"" << T + cell * static_cast<double>(r)
        << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#999\"/>";
      o << "<text x=\"" << L + cell * (static_cast<double>(c) + 0.5) << "\" y=\"" << T + cell * (static_cast<double>(r) + 0.5) + 4
        << "\" text-anchor=\"middle\" fill=\"" << (t > 0.55 ? "white" : "black") << "\">" << num(v, 2) << "</text>\n";
    }
  }
  o << "<text x=\"12\" y=\"" << T + cell * static_cast<double>(row_labels.size()) / 2
    << "\" transform=\"rotate(-90 12 " << T + cell * static_cast<double>(row_labels.size()) / 2
    << ")\" text-anchor=\"middle\">true</text>\n</svg>\n";
  store::write_text_atomic(path, o.str());
}

void write_table_svg(const fs::path& path, const std::string& title, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  const double colw = 130, rowh = 24, T = 44;
  const double W = 20 + colw * static_cast<double>(header.size());
  const double H = T + rowh * static_cast<double>(rows.size() + 1) + 16;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
  auto row = [&](const std::vector<std::string>& cells, double y, bool bold) {
    for (std::size_t c = 0; c < cells.size(); ++c)
      o << "<text x=\"" << 10 + colw * static_cast<double>(c) + 6 << "\" y=\"" << y + 16 << "\""
        << (bold ? " font-weight=\"bold\"" : "") << ">" << esc(cells[c]) << "</text>";
    o << "<line x1=\"10\" x2=\"" << W - 10 << "\" y1=\"" << y + rowh << "\" y2=\"" << y + rowh
      << "\" stroke=\"#ccc\"/>\n";
  };
  row(header, T, true);
  for (std::size_t r = 0; r < rows.size(); ++r) row(rows[r], T + rowh * static_cast<double>(r + 1), false);
  o << "</svg>\n";
  store::write_text_atomic(path, o.str());
}

}  // namespace mcd::plot
