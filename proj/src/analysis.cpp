#include "nanowb/analysis.hpp"

#include "nanowb/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

namespace nanowb {

void FieldFrame::validate() const {
  if (nx < 1 || ny < 1) throw InvalidArgument("field '" + name + "': nx and ny must be >= 1");
  if (values.size() != static_cast<std::size_t>(nx) * ny)
    throw InvalidArgument("field '" + name + "': value count does not match nx*ny");
  if (!(xmax > xmin) || !(ymax > ymin)) throw InvalidArgument("field '" + name + "': empty bounds");
}

double plastic_strain_intensity(const Deviator& e) {
  return std::sqrt(2.0 / 3.0 * (e.xx * e.xx + e.yy * e.yy + 2.0 * e.xy * e.xy + e.zz * e.zz));
}

FieldFrame eq_plastic_intensity(std::span<const Deviator> eps_p, int nx, int ny, double xmin, double xmax,
                                double ymin, double ymax, double time) {
  FieldFrame f;
  f.name = "eq_plastic";
  f.time = time;
  f.nx = nx;
  f.ny = ny;
  f.xmin = xmin;
  f.xmax = xmax;
  f.ymin = ymin;
  f.ymax = ymax;
  f.values.reserve(eps_p.size());
  for (const auto& e : eps_p) f.values.push_back(plastic_strain_intensity(e));
  f.validate();
  return f;
}

double mean_value(const FieldFrame& frame) {
  double s = 0.0;
  std::size_t n = 0;
  for (double v : frame.values) {
    if (FieldFrame::is_missing(v)) continue;
    s += v;
    ++n;
  }
  return n ? s / static_cast<double>(n) : FieldFrame::missing();
}

double max_value(const FieldFrame& frame) {
  double m = FieldFrame::missing();
  for (double v : frame.values)
    if (!FieldFrame::is_missing(v) && (std::isnan(m) || v > m)) m = v;
  return m;
}

// ---------------------------------------------------------------------------
// Band detection

namespace {

constexpr int kAngles = 36;  // 5 degree bins over [0, 180)

struct Component {
  std::vector<int> cells;
};

std::vector<Component> connected_components(const std::vector<char>& mask, int nx, int ny) {
  std::vector<int> label(mask.size(), -1);
  std::vector<Component> comps;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    if (!mask[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    comps.emplace_back();
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      comps[id].cells.push_back(c);
      const int i = c % nx, j = c / nx;
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di, jj = j + dj;
          if ((di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
          const int n = jj * nx + ii;
          if (mask[n] && label[n] < 0) {
            label[n] = id;
            stack.push_back(n);
          }
        }
      }
    }
    std::sort(comps[id].cells.begin(), comps[id].cells.end());
  }
  return comps;
}

// Fraction of samples along a segment through cell c (direction theta, physical
// half-length `half`) that land in cells flagged in `member`.
double line_support(const FieldFrame& f, const std::vector<char>& member, int c, double theta, double half) {
  const double dx = f.dx(), dy = f.dy();
  const Vec2 p = f.center(c % f.nx, c / f.nx);
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double step = 0.5 * std::min(dx, dy);
  const int n = std::max(1, static_cast<int>(std::lround(half / step)));
  int hit = 0, total = 0;
  for (int k = -n; k <= n; ++k) {
    const double x = p.x + k * step * ux, y = p.y + k * step * uy;
    const int i = static_cast<int>(std::floor((x - f.xmin) / dx));
    const int j = static_cast<int>(std::floor((y - f.ymin) / dy));
    ++total;
    if (i < 0 || j < 0 || i >= f.nx || j >= f.ny) continue;
    if (member[j * f.nx + i]) ++hit;
  }
  return static_cast<double>(hit) / total;
}

Band describe_band(const FieldFrame& f, std::vector<int> cells, double load_axis_deg) {
  Band b;
  std::sort(cells.begin(), cells.end());
  b.cells = std::move(cells);
  double sx = 0.0, sy = 0.0, sum = 0.0;
  b.peak = -std::numeric_limits<double>::infinity();
  for (int c : b.cells) {
    const Vec2 p = f.center(c % f.nx, c / f.nx);
    sx += p.x;
    sy += p.y;
    sum += f.values[c];
    b.peak = std::max(b.peak, f.values[c]);
  }
  const double n = static_cast<double>(b.cells.size());
  b.centroid = {sx / n, sy / n};
  b.mean = sum / n;
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (int c : b.cells) {
    const Vec2 p = f.center(c % f.nx, c / f.nx);
    const double ax = p.x - b.centroid.x, ay = p.y - b.centroid.y;
    cxx += ax * ax;
    cyy += ay * ay;
    cxy += ax * ay;
  }
  double phi = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  if (phi < 0.0) phi += std::numbers::pi;
  b.axis_deg = phi * 180.0 / std::numbers::pi;
  if (b.axis_deg >= 180.0) b.axis_deg -= 180.0;
  double d = std::fmod(std::abs(b.axis_deg - load_axis_deg), 180.0);
  b.angle_deg = std::min(d, 180.0 - d);

  const double ux = std::cos(phi), uy = std::sin(phi);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int c : b.cells) {
    const Vec2 p = f.center(c % f.nx, c / f.nx);
    const double s = (p.x - b.centroid.x) * ux + (p.y - b.centroid.y) * uy;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  b.length = (hi - lo) + std::abs(ux) * f.dx() + std::abs(uy) * f.dy();
  b.width = n * f.dx() * f.dy() / b.length;
  return b;
}

// Dominant directions of a component. Each cell votes for the circular mean of its
// best-supported directions (support saturates over a range of angles inside a band);
// peaks are local maxima of the vote count summed over +-1 bin.
std::vector<int> dominant_directions(const std::vector<std::array<double, kAngles>>& support) {
  std::array<double, kAngles> hist{};
  for (const auto& s : support) {
    const double best = *std::max_element(s.begin(), s.end());
    double c = 0.0, sn = 0.0;
    for (int k = 0; k < kAngles; ++k) {
      if (s[k] < best - 1e-12) continue;
      const double t = 2.0 * k * std::numbers::pi / kAngles;
      c += std::cos(t);
      sn += std::sin(t);
    }
    double deg = std::atan2(sn, c) * 90.0 / std::numbers::pi;
    if (deg < 0.0) deg += 180.0;
    hist[static_cast<int>(std::lround(deg / 5.0)) % kAngles] += 1.0;
  }
  std::array<double, kAngles> win{};
  for (int k = 0; k < kAngles; ++k)
    win[k] = hist[(k + kAngles - 1) % kAngles] + hist[k] + hist[(k + 1) % kAngles];

  std::vector<int> order(kAngles);
  for (int k = 0; k < kAngles; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return win[a] > win[b]; });
  const double total = static_cast<double>(support.size());
  std::vector<int> peaks;
  for (int k : order) {
    if (win[k] < 0.15 * total) break;
    const bool local_max = win[k] >= win[(k + 1) % kAngles] && win[k] >= win[(k + kAngles - 1) % kAngles];
    if (!local_max) continue;
    bool far = true;
    for (int p : peaks) {
      const int d = std::abs(p - k);
      if (std::min(d, kAngles - d) * 5 < 30) far = false;
    }
    if (far) peaks.push_back(k);
  }
  if (peaks.empty()) peaks.push_back(order[0]);
  return peaks;
}

}  // namespace

std::vector<Band> detect_bands(const FieldFrame& f, const BandOptions& opt) {
  f.validate();
  if (!(opt.threshold_factor > 0.0)) throw InvalidArgument("detect_bands: threshold_factor must be positive");
  if (opt.min_cells < 1) throw InvalidArgument("detect_bands: min_cells must be >= 1");
  std::vector<Band> bands;
  const double mean = mean_value(f);
  if (!(mean > 0.0)) return bands;
  const double threshold = opt.threshold_factor * mean;

  std::vector<char> mask(f.values.size(), 0);
  for (std::size_t c = 0; c < mask.size(); ++c) mask[c] = !FieldFrame::is_missing(f.values[c]) && f.values[c] > threshold;

  const double half = 10.0 * std::max(f.dx(), f.dy());
  std::vector<char> member(mask.size(), 0);
  for (const auto& comp : connected_components(mask, f.nx, f.ny)) {
    if (static_cast<int>(comp.cells.size()) < opt.min_cells) continue;
    for (int c : comp.cells) member[c] = 1;

    std::vector<std::array<double, kAngles>> support(comp.cells.size());
    for (std::size_t m = 0; m < comp.cells.size(); ++m)
      for (int k = 0; k < kAngles; ++k)
        support[m][k] = line_support(f, member, comp.cells[m], k * std::numbers::pi / kAngles, half);

    const auto peaks = dominant_directions(support);
    if (peaks.size() == 1) {
      bands.push_back(describe_band(f, comp.cells, opt.load_axis_deg));
    } else {
      for (int k : peaks) {
        std::vector<char> cls(mask.size(), 0);
        for (std::size_t m = 0; m < comp.cells.size(); ++m) {
          const double best = *std::max_element(support[m].begin(), support[m].end());
          if (support[m][k] >= 0.7 * best) cls[comp.cells[m]] = 1;
        }
        for (const auto& part : connected_components(cls, f.nx, f.ny))
          if (static_cast<int>(part.cells.size()) >= opt.min_cells)
            bands.push_back(describe_band(f, part.cells, opt.load_axis_deg));
      }
    }
    for (int c : comp.cells) member[c] = 0;
  }
  std::stable_sort(bands.begin(), bands.end(), [](const Band& a, const Band& b) {
    if (a.cells.size() != b.cells.size()) return a.cells.size() > b.cells.size();
    return a.cells.front() < b.cells.front();
  });
  return bands;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_sci9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  std::string s(buf);
  const auto e = s.find('e');
  std::string mant = s.substr(0, e);
  const char sign = s[e + 1];
  std::string digits = s.substr(e + 2);
  const auto nz = digits.find_first_not_of('0');
  digits = nz == std::string::npos ? "0" : digits.substr(nz);
  return mant + "e" + (sign == '-' ? "-" : "") + digits;
}

namespace {
constexpr const char* kCsvHeader = "name,time,nx,ny,xmin,xmax,ymin,ymax";

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const char* what) {
  if (s.empty()) throw InvalidArgument(std::string("field csv: empty ") + what);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw InvalidArgument(std::string("field csv: bad ") + what + " '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const char* what) {
  const double v = parse_number(s, what);
  if (v != std::floor(v) || v < 1 || v > 1e8) throw InvalidArgument(std::string("field csv: bad ") + what);
  return static_cast<int>(v);
}
}  // namespace

std::string field_to_csv(const FieldFrame& f) {
  f.validate();
  if (f.name.find_first_of(",\n\r") != std::string::npos)
    throw InvalidArgument("field name may not contain commas or newlines");
  std::string out = kCsvHeader;
  out += '\n';
  out += f.name + "," + format_sci9(f.time) + "," + std::to_string(f.nx) + "," + std::to_string(f.ny) + "," +
         format_sci9(f.xmin) + "," + format_sci9(f.xmax) + "," + format_sci9(f.ymin) + "," + format_sci9(f.ymax) +
         "\n";
  for (int j = 0; j < f.ny; ++j) {
    for (int i = 0; i < f.nx; ++i) {
      if (i) out += ',';
      out += format_sci9(f.at(i, j));
    }
    out += '\n';
  }
  return out;
}

FieldFrame field_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InvalidArgument("field csv: missing header line");
  if (!std::getline(in, line)) throw InvalidArgument("field csv: missing metadata line");
  const auto meta = split_commas(line);
  if (meta.size() != 8) throw InvalidArgument("field csv: metadata line needs 8 values");
  FieldFrame f;
  f.name = meta[0];
  f.time = parse_number(meta[1], "time");
  f.nx = parse_int(meta[2], "nx");
  f.ny = parse_int(meta[3], "ny");
  f.xmin = parse_number(meta[4], "xmin");
  f.xmax = parse_number(meta[5], "xmax");
  f.ymin = parse_number(meta[6], "ymin");
  f.ymax = parse_number(meta[7], "ymax");
  f.values.reserve(static_cast<std::size_t>(f.nx) * f.ny);
  for (int j = 0; j < f.ny; ++j) {
    if (!std::getline(in, line)) throw InvalidArgument("field csv: expected " + std::to_string(f.ny) + " rows");
    const auto row = split_commas(line);
    if (static_cast<int>(row.size()) != f.nx)
      throw InvalidArgument("field csv: row " + std::to_string(j) + " has " + std::to_string(row.size()) +
                            " values, expected " + std::to_string(f.nx));
    for (const auto& v : row) f.values.push_back(parse_number(v, "value"));
  }
  while (std::getline(in, line))
    if (!line.empty()) throw InvalidArgument("field csv: trailing data after the last row");
  f.validate();
  return f;
}

void export_field_csv(const FieldFrame& frame, const std::string& path) {
  const std::string text = field_to_csv(frame);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError(path, "cannot open for writing");
  out << text;
  if (!out) throw FileError(path, "write failed");
}

FieldFrame read_field_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return field_from_csv(ss.str());
}

// ---------------------------------------------------------------------------
// PNG

std::array<unsigned char, 3> viridis(double t) {
  static constexpr unsigned char kAnchors[17][3] = {
      {68, 1, 84},    {72, 24, 106},  {71, 45, 123},  {66, 64, 134},  {59, 82, 139},   {51, 99, 141},
      {44, 114, 142}, {38, 130, 142}, {33, 145, 140}, {31, 160, 136}, {40, 174, 128},  {63, 188, 115},
      {94, 201, 98},  {132, 212, 75}, {173, 220, 48}, {216, 226, 25}, {253, 231, 37}};
  if (!(t > 0.0)) t = 0.0;
  if (t > 1.0) t = 1.0;
  const double pos = t * 16.0;
  const int k = std::min(15, static_cast<int>(pos));
  const double w = pos - k;
  std::array<unsigned char, 3> c;
  for (int ch = 0; ch < 3; ++ch)
    c[ch] = static_cast<unsigned char>(std::lround(kAnchors[k][ch] * (1.0 - w) + kAnchors[k + 1][ch] * w));
  return c;
}

RgbImage render_field(const FieldFrame& f, int scale) {
  f.validate();
  if (scale < 1) throw InvalidArgument("render_field: scale must be >= 1");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : f.values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 0.0;
  RgbImage img;
  img.width = f.nx * scale;
  img.height = f.ny * scale;
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int r = 0; r < img.height; ++r) {
    const int j = f.ny - 1 - r / scale;
    for (int col = 0; col < img.width; ++col) {
      const double v = f.at(col / scale, j);
      std::array<unsigned char, 3> px{128, 128, 128};
      if (std::isfinite(v)) px = viridis(span > 0.0 ? (v - lo) / span : 0.0);
      std::copy(px.begin(), px.end(), img.rgb.begin() + (static_cast<std::size_t>(r) * img.width + col) * 3);
    }
  }
  return img;
}

void export_field_png(const FieldFrame& f, const std::string& path, int scale) {
  if (scale <= 0) scale = std::max(1, 600 / std::max(f.nx, f.ny));
  const RgbImage img = render_field(f, scale);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : f.values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw FileError(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    throw FileError(path, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw FileError(path, "PNG encoding failed");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  const std::string smin = format_sci9(lo), smax = format_sci9(hi);
  png_text text[3] = {};
  text[0].compression = PNG_TEXT_COMPRESSION_NONE;
  text[0].key = const_cast<char*>("field");
  text[0].text = const_cast<char*>(f.name.c_str());
  text[1].compression = PNG_TEXT_COMPRESSION_NONE;
  text[1].key = const_cast<char*>("min");
  text[1].text = const_cast<char*>(smin.c_str());
  text[2].compression = PNG_TEXT_COMPRESSION_NONE;
  text[2].key = const_cast<char*>("max");
  text[2].text = const_cast<char*>(smax.c_str());
  png_set_text(png, info, text, 3);
  png_write_info(png, info);
  for (int r = 0; r < img.height; ++r)
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(r) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw FileError(path, "close failed");
}

}  // namespace nanowb
