#include "nanowb/analysis.hpp"
#include "nanowb/errors.hpp"
#include "support.hpp"

#include <doctest.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

using namespace nanowb;

namespace {

FieldFrame blank(int nx, int ny, double value = 0.0, double size = 0.1) {
  FieldFrame f;
  f.name = "eq_plastic";
  f.nx = nx;
  f.ny = ny;
  f.xmax = nx * size;
  f.ymax = ny * size;
  f.values.assign(static_cast<std::size_t>(nx) * ny, value);
  return f;
}

// Paints cells whose centers lie within half_width of the line through p at angle deg.
void stripe(FieldFrame& f, Vec2 p, double deg, double half_width, double value) {
  const double t = deg * std::numbers::pi / 180.0;
  const double nx = -std::sin(t), ny = std::cos(t);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      const Vec2 c = f.center(i, j);
      if (std::abs((c.x - p.x) * nx + (c.y - p.y) * ny) <= half_width) f.at(i, j) = value;
    }
}

std::map<std::string, std::string> read_png_text(const std::string& path) {
  std::map<std::string, std::string> out;
  FILE* fp = std::fopen(path.c_str(), "rb");
  REQUIRE(fp);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_read_info(png, info);
  png_textp text = nullptr;
  int n = 0;
  png_get_text(png, info, &text, &n);
  for (int k = 0; k < n; ++k) out[text[k].key] = text[k].text;
  out["_width"] = std::to_string(png_get_image_width(png, info));
  out["_height"] = std::to_string(png_get_image_height(png, info));
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

}  // namespace

TEST_CASE("plastic strain intensity") {
  CHECK(plastic_strain_intensity({}) == 0.0);
  const double e = 0.02;
  CHECK(plastic_strain_intensity({e, -e / 2, 0, -e / 2}) == doctest::Approx(e).epsilon(1e-14));
  const double g = 0.03;
  CHECK(plastic_strain_intensity({0, 0, g / 2, 0}) == doctest::Approx(g / std::sqrt(3.0)).epsilon(1e-14));
}

TEST_CASE("intensity is invariant under in-plane rotation") {
  testing::Gen gen(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Deviator e{gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const double t = gen.uniform(0, 2 * std::numbers::pi);
    const double c = std::cos(t), s = std::sin(t);
    const Deviator r{c * c * e.xx + 2 * c * s * e.xy + s * s * e.yy, s * s * e.xx - 2 * c * s * e.xy + c * c * e.yy,
                     (c * c - s * s) * e.xy + c * s * (e.yy - e.xx), e.zz};
    CHECK(std::abs(plastic_strain_intensity(r) - plastic_strain_intensity(e)) <= 1e-10);
  }
}

TEST_CASE("intensity frame from tensor components") {
  std::vector<Deviator> eps(6, Deviator{0.01, -0.005, 0.0, -0.005});
  const auto f = eq_plastic_intensity(eps, 3, 2, 0, 3, 0, 2, 1.5);
  CHECK(f.values.size() == 6);
  CHECK(f.time == 1.5);
  for (double v : f.values) CHECK(v == doctest::Approx(0.01));
  CHECK_THROWS_AS(eq_plastic_intensity(eps, 4, 2, 0, 3, 0, 2), InvalidArgument);
}

TEST_CASE("band detection: empty cases") {
  CHECK(detect_bands(blank(30, 30)).empty());
  CHECK(detect_bands(blank(30, 30, 2.5)).empty());
}

TEST_CASE("band detection: a single 45 degree stripe") {
  auto f = blank(80, 80);
  stripe(f, {4.0, 4.0}, 45.0, 0.15, 10.0);
  const auto bands = detect_bands(f);
  REQUIRE(bands.size() == 1);
  CHECK(bands[0].angle_deg == doctest::Approx(45.0).epsilon(2.0 / 45.0));
  CHECK(bands[0].width == doctest::Approx(0.3).epsilon(0.35));
  CHECK(bands[0].peak == 10.0);
  CHECK(bands[0].length > 8.0);
}

TEST_CASE("band detection: stripe orientation is recovered over angles") {
  for (double deg : {20.0, 35.0, 60.0, 75.0, 110.0, 150.0}) {
    CAPTURE(deg);
    auto f = blank(80, 80);
    stripe(f, {4.0, 4.0}, deg, 0.2, 10.0);
    const auto bands = detect_bands(f);
    REQUIRE(bands.size() == 1);
    const double axis = std::fmod(deg, 180.0);
    CHECK(std::abs(bands[0].axis_deg - axis) <= 2.0);
    CHECK(std::abs(bands[0].angle_deg - std::abs(90.0 - axis)) <= 2.0);
  }
}

TEST_CASE("band detection: crossing stripes split into two bands") {
  auto f = blank(80, 80);
  stripe(f, {4.0, 4.0}, 45.0, 0.15, 10.0);
  stripe(f, {4.0, 4.0}, 135.0, 0.15, 10.0);
  const auto bands = detect_bands(f);
  REQUIRE(bands.size() == 2);
  CHECK(bands[0].angle_deg == doctest::Approx(45.0).epsilon(5.0 / 45.0));
  CHECK(bands[1].angle_deg == doctest::Approx(45.0).epsilon(5.0 / 45.0));
  const double axes[2] = {std::min(bands[0].axis_deg, bands[1].axis_deg),
                          std::max(bands[0].axis_deg, bands[1].axis_deg)};
  CHECK(axes[0] == doctest::Approx(45.0).epsilon(5.0 / 45.0));
  CHECK(axes[1] == doctest::Approx(135.0).epsilon(5.0 / 135.0));
}

TEST_CASE("band detection: small blobs are ignored and options apply") {
  auto f = blank(40, 40);
  for (int j = 10; j < 12; ++j)
    for (int i = 10; i < 13; ++i) f.at(i, j) = 10.0;  // 6 cells
  CHECK(detect_bands(f).empty());
  BandOptions o;
  o.min_cells = 5;
  CHECK(detect_bands(f, o).size() == 1);
  o.threshold_factor = 1000.0;
  CHECK(detect_bands(f, o).empty());
}

TEST_CASE("band detection is deterministic and scale invariant") {
  testing::Gen gen(9);
  auto f = blank(60, 60);
  for (auto& v : f.values) v = gen.uniform(0, 1);
  stripe(f, {3.0, 3.0}, 50.0, 0.12, 20.0);
  stripe(f, {1.0, 4.0}, 140.0, 0.12, 15.0);
  const auto a = detect_bands(f);
  const auto b = detect_bands(f);
  auto scaled = f;
  for (auto& v : scaled.values) v *= 7.0;
  const auto c = detect_bands(scaled);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].cells == b[k].cells);
    CHECK(a[k].cells == c[k].cells);
    CHECK(a[k].angle_deg == b[k].angle_deg);
  }
}

TEST_CASE("band invariants on random fields") {
  testing::Gen gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = blank(gen.integer(10, 50), gen.integer(10, 50));
    for (auto& v : f.values) v = std::pow(gen.uniform(0, 1), 8.0);
    BandOptions o;
    o.min_cells = gen.integer(1, 10);
    o.threshold_factor = gen.uniform(1.5, 4.0);
    for (const auto& b : detect_bands(f, o)) {
      CHECK(static_cast<int>(b.cells.size()) >= o.min_cells);
      CHECK(b.angle_deg >= 0.0);
      CHECK(b.angle_deg <= 90.0);
      CHECK(std::is_sorted(b.cells.begin(), b.cells.end()));
      CHECK(b.width > 0.0);
    }
  }
}

TEST_CASE("mean and max skip missing values") {
  auto f = blank(2, 2, 1.0);
  f.values[3] = FieldFrame::missing();
  f.values[1] = 4.0;
  CHECK(mean_value(f) == doctest::Approx(2.0));
  CHECK(max_value(f) == 4.0);
}

TEST_CASE("compact scientific format") {
  CHECK(format_sci9(0.0) == "0.000000000e0");
  CHECK(format_sci9(1.25e-3) == "1.250000000e-3");
  CHECK(format_sci9(-31.4) == "-3.140000000e1");
  CHECK(format_sci9(FieldFrame::missing()) == "nan");
}

TEST_CASE("field csv layout") {
  auto f = blank(1, 1);
  f.name = "z";
  f.xmax = 1.0;
  f.ymax = 1.0;
  const std::string csv = field_to_csv(f);
  CHECK(csv ==
        "name,time,nx,ny,xmin,xmax,ymin,ymax\n"
        "z,0.000000000e0,1,1,0.000000000e0,1.000000000e0,0.000000000e0,1.000000000e0\n"
        "0.000000000e0\n");
  CHECK(csv.find('\r') == std::string::npos);
}

TEST_CASE("field csv round trip") {
  testing::Gen gen(1);
  auto f = blank(7, 5);
  f.time = 3.25;
  for (auto& v : f.values) v = gen.uniform(-1e3, 1e3);
  f.values[4] = FieldFrame::missing();
  const auto g = field_from_csv(field_to_csv(f));
  CHECK(g.name == f.name);
  CHECK(g.nx == 7);
  CHECK(g.ny == 5);
  CHECK(g.time == f.time);
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    if (k == 4) {
      CHECK(FieldFrame::is_missing(g.values[k]));
      continue;
    }
    CHECK(std::abs(g.values[k] - f.values[k]) <= 5e-10 * std::abs(f.values[k]));
  }
  // Values already at the written precision survive exactly.
  CHECK(field_to_csv(field_from_csv(field_to_csv(g))) == field_to_csv(g));

  testing::TempDir dir("csv");
  const auto p = (dir.path() / "f.csv").string();
  export_field_csv(g, p);
  CHECK(field_to_csv(read_field_csv(p)) == field_to_csv(g));
}

TEST_CASE("field csv rejects malformed input") {
  CHECK_THROWS_AS(field_from_csv("bad\n"), InvalidArgument);
  CHECK_THROWS_AS(field_from_csv("name,time,nx,ny,xmin,xmax,ymin,ymax\nz,0,2,1,0,1,0,1\n1\n"), InvalidArgument);
  CHECK_THROWS_AS(read_field_csv("/nonexistent/dir/f.csv"), FileError);
  CHECK_THROWS_AS(export_field_csv(blank(1, 1), "/nonexistent/dir/f.csv"), FileError);
}

TEST_CASE("png rendering") {
  auto f = blank(3, 2, 0.7);
  const auto img = render_field(f, 4);
  CHECK(img.width == 12);
  CHECK(img.height == 8);
  for (std::size_t k = 3; k < img.rgb.size(); k += 3) {
    CHECK(img.rgb[k] == img.rgb[0]);
    CHECK(img.rgb[k + 1] == img.rgb[1]);
    CHECK(img.rgb[k + 2] == img.rgb[2]);
  }

  // Row 0 of the image is the top of the domain.
  f.at(0, 1) = 1.0;
  f.at(0, 0) = 0.0;
  const auto g = render_field(f, 1);
  const auto hi = viridis(1.0), lo = viridis(0.0);
  CHECK(g.rgb[0] == hi[0]);
  CHECK(g.rgb[1] == hi[1]);
  CHECK(g.rgb[3 * 3 + 0] == lo[0]);
  CHECK(g.rgb[3 * 3 + 2] == lo[2]);

  testing::TempDir dir("png");
  const auto p = (dir.path() / "f.png").string();
  export_field_png(f, p, 5);
  const auto text = read_png_text(p);
  CHECK(text.at("_width") == "15");
  CHECK(text.at("_height") == "10");
  CHECK(text.at("field") == "eq_plastic");
  CHECK(std::stod(text.at("min")) == doctest::Approx(0.0));
  CHECK(std::stod(text.at("max")) == doctest::Approx(1.0));
  CHECK_THROWS_AS(export_field_png(f, "/nonexistent/dir/f.png"), FileError);
}

TEST_CASE("viridis endpoints") {
  const auto a = viridis(0.0), b = viridis(1.0);
  CHECK(a[0] == 68);
  CHECK(a[1] == 1);
  CHECK(a[2] == 84);
  CHECK(b[0] == 253);
  CHECK(b[1] == 231);
  CHECK(b[2] == 37);
}
