#include "probemap/shape_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <tuple>

#ifdef PROBEMAP_HAS_PNG
#include <png.h>
#endif

namespace probemap::field {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Logistic soft threshold with midpoint 0.5, rescaled so the output spans
// exactly [0, 1): S~(0) = 0 and S~(z) -> 1 as z -> inf. The rescaling keeps
// field values in range even when several tip Gaussians stack (z > 1).
struct SoftThreshold {
  double steepness;
  double s0;      // raw sigmoid at 0
  double inv_span;

  explicit SoftThreshold(double k)
      : steepness(k), s0(1.0 / (1.0 + std::exp(0.5 * k))), inv_span(1.0 / (1.0 - s0)) {}

  double raw(double z) const { return 1.0 / (1.0 + std::exp(-steepness * (z - 0.5))); }
  double value(double z) const { return (raw(z) - s0) * inv_span; }
  double deriv(double z) const {
    const double s = raw(z);
    return steepness * s * (1.0 - s) * inv_span;
  }
};

// Signed tip offsets along the canonical (theta = 0) contact line, centered
// on the pose so the layout is symmetric under 180-degree rotation.
std::vector<double> tip_offsets(const ProbeFootprint& fp) {
  std::vector<double> offs(static_cast<size_t>(fp.tip_count));
  const double mid = 0.5 * (fp.tip_count - 1);
  for (int m = 0; m < fp.tip_count; ++m) {
    offs[static_cast<size_t>(m)] = (m - mid) * fp.tip_spacing_px;
  }
  return offs;
}

void validate_footprint(const ProbeFootprint& fp) {
  if (fp.tip_count < 1) throw std::invalid_argument("footprint: tip_count must be >= 1");
  if (fp.tip_spacing_px < 0.0) throw std::invalid_argument("footprint: tip_spacing_px must be >= 0");
  if (fp.tip_radius_px <= 0.0) throw std::invalid_argument("footprint: tip_radius_px must be > 0");
}

int skip_pgm_whitespace(std::istream& in) {
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
    }
    c = in.get();
  }
  return c;
}

int read_pgm_int(std::istream& in) {
  int c = skip_pgm_whitespace(in);
  if (c == EOF || !std::isdigit(c)) throw std::runtime_error("pgm: malformed header");
  int v = 0;
  while (std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

SegmentMask load_pgm(std::ifstream& in, const std::string& path) {
  char magic[2];
  in.read(magic, 2);
  const bool binary = magic[1] == '5';
  const int w = read_pgm_int(in);
  const int h = read_pgm_int(in);
  const int maxval = read_pgm_int(in);
  if (w <= 0 || h <= 0) throw std::runtime_error("pgm: bad dimensions in " + path);
  if (maxval <= 0 || maxval > 255) {
    throw std::runtime_error("pgm: only 8-bit grayscale supported: " + path);
  }
  SegmentMask mask;
  mask.width = w;
  mask.height = h;
  mask.data.resize(static_cast<size_t>(w) * h);
  if (binary) {
    std::vector<uint8_t> row(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), w);
      if (!in) throw std::runtime_error("pgm: truncated pixel data in " + path);
      for (int x = 0; x < w; ++x) {
        mask.data[static_cast<size_t>(y) * w + x] = row[static_cast<size_t>(x)] != 0 ? 1 : 0;
      }
    }
  } else {
    for (size_t i = 0; i < mask.data.size(); ++i) {
      mask.data[i] = read_pgm_int(in) != 0 ? 1 : 0;
    }
  }
  return mask;
}

#ifdef PROBEMAP_HAS_PNG
SegmentMask load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open mask file: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png: initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png: corrupt file: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth > 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png: non-grayscale or non-8-bit input: " + path);
  }
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  SegmentMask mask;
  mask.width = static_cast<int>(png_get_image_width(png, info));
  mask.height = static_cast<int>(png_get_image_height(png, info));
  mask.data.resize(static_cast<size_t>(mask.width) * mask.height);
  std::vector<uint8_t> row(static_cast<size_t>(mask.width));
  for (int y = 0; y < mask.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < mask.width; ++x) {
      mask.data[static_cast<size_t>(y) * mask.width + x] = row[static_cast<size_t>(x)] != 0 ? 1 : 0;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return mask;
}
#endif

}  // namespace

bool png_supported() {
#ifdef PROBEMAP_HAS_PNG
  return true;
#else
  return false;
#endif
}

size_t SegmentMask::set_count() const {
  size_t n = 0;
  for (uint8_t v : data) n += v != 0;
  return n;
}

double ScalarField::sample(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(x), width - 2 >= 0 ? width - 2 : 0);
  const int y0 = std::min(static_cast<int>(y), height - 2 >= 0 ? height - 2 : 0);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = at(x0, y0), v10 = at(x1, y0), v01 = at(x0, y1), v11 = at(x1, y1);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

double normalize_theta(double theta) {
  double t = std::fmod(theta, kPi);
  if (t < 0.0) t += kPi;
  if (t >= kPi) t = 0.0;  // fmod rounding can land exactly on pi
  return t;
}

SegmentMask load_mask(const std::string& path, double scale_mm_per_px) {
  if (scale_mm_per_px <= 0.0) throw std::invalid_argument("load_mask: scale_mm_per_px must be > 0");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mask file: " + path);
  char head[2] = {0, 0};
  in.read(head, 2);
  in.seekg(0);

  SegmentMask mask;
  if (head[0] == 'P' && (head[1] == '5' || head[1] == '2')) {
    mask = load_pgm(in, path);
  } else if (static_cast<unsigned char>(head[0]) == 0x89 && head[1] == 'P') {
#ifdef PROBEMAP_HAS_PNG
    in.close();
    mask = load_png(path);
#else
    throw std::runtime_error("png support not built in: " + path);
#endif
  } else {
    throw std::runtime_error("unsupported mask format (want PGM P5/P2 or PNG): " + path);
  }
  if (mask.set_count() == 0) throw std::runtime_error("empty mask: " + path);

  // Segment id defaults to the file stem.
  size_t slash = path.find_last_of("/\\");
  size_t start = slash == std::string::npos ? 0 : slash + 1;
  size_t dot = path.find_last_of('.');
  mask.id = path.substr(start, dot != std::string::npos && dot > start ? dot - start : std::string::npos);
  mask.scale_mm_per_px = scale_mm_per_px;
  return mask;
}

ScalarField smooth(const SegmentMask& mask, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("smooth: sigma must be > 0");
  const int w = mask.width, h = mask.height;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));

  // Separable kernel, renormalized after the +/-4 sigma truncation.
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    ksum += k[static_cast<size_t>(i + radius)];
  }
  for (double& v : k) v /= ksum;

  std::vector<double> tmp(static_cast<size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const int lo = std::max(-radius, -x), hi = std::min(radius, w - 1 - x);
      double* row = tmp.data() + static_cast<size_t>(y) * w;
      for (int i = lo; i <= hi; ++i) row[x + i] += k[static_cast<size_t>(i + radius)];
    }
  }
  ScalarField out;
  out.width = w;
  out.height = h;
  out.sigma = sigma;
  out.values.assign(static_cast<size_t>(w) * h, 0.0);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      const double v = tmp[static_cast<size_t>(y) * w + x];
      if (v == 0.0) continue;
      const int lo = std::max(-radius, -y), hi = std::min(radius, h - 1 - y);
      for (int j = lo; j <= hi; ++j) {
        out.values[static_cast<size_t>(y + j) * w + x] += v * k[static_cast<size_t>(j + radius)];
      }
    }
  }
  double mx = 0.0;
  for (double v : out.values) mx = std::max(mx, v);
  out.raw_max = mx;
  if (mx > 0.0) {
    for (double& v : out.values) v /= mx;
  }
  return out;
}

std::vector<std::array<double, 2>> tip_positions(const Pose& pose) {
  validate_footprint(pose.footprint);
  const auto offs = tip_offsets(pose.footprint);
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  std::vector<std::array<double, 2>> tips;
  tips.reserve(offs.size());
  for (double o : offs) {
    tips.push_back({pose.x + o * c, pose.y + o * s});
  }
  return tips;
}

FootprintSample footprint_at(const Pose& pose, double px, double py,
                             double sigma, double steepness) {
  validate_footprint(pose.footprint);
  const SoftThreshold soft(steepness);
  const auto offs = tip_offsets(pose.footprint);
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const double inv_s2 = 1.0 / (sigma * sigma);

  double g = 0.0, gx = 0.0, gy = 0.0, gt = 0.0;
  for (double o : offs) {
    const double tx = pose.x + o * c, ty = pose.y + o * s;
    const double dx = px - tx, dy = py - ty;
    const double e = std::exp(-0.5 * (dx * dx + dy * dy) * inv_s2);
    g += e;
    gx += e * dx * inv_s2;
    gy += e * dy * inv_s2;
    // d(tip)/dtheta = o * (-sin, cos)
    gt += e * inv_s2 * (dx * (-o * s) + dy * (o * c));
  }
  FootprintSample out;
  const double d = soft.deriv(g);
  out.value = soft.value(g);
  out.dx = d * gx;
  out.dy = d * gy;
  out.dtheta = d * gt;
  return out;
}

double footprint_cutoff_radius(const ProbeFootprint& fp, double sigma) {
  const double mid = 0.5 * (fp.tip_count - 1);
  return mid * fp.tip_spacing_px + 8.5 * sigma;
}

double footprint_reference_mass(const ProbeFootprint& fp, double sigma,
                                double steepness) {
  validate_footprint(fp);
  using Key = std::tuple<int, double, double, double>;
  static std::map<Key, double> cache;
  static std::mutex mtx;
  const Key key{fp.tip_count, fp.tip_spacing_px, fp.tip_radius_px, steepness};
  {
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  Pose p;
  p.footprint = fp;
  const int r = static_cast<int>(std::ceil(footprint_cutoff_radius(fp, sigma))) + 1;
  double mass = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      mass += footprint_at(p, x, y, sigma, steepness).value;
    }
  }
  std::lock_guard<std::mutex> lock(mtx);
  cache.emplace(key, mass);
  return mass;
}

ScalarField render_footprint(const Pose& pose, int width, int height,
                             double sigma, double steepness) {
  ScalarField out;
  out.width = width;
  out.height = height;
  out.sigma = sigma;
  out.raw_max = 1.0;
  out.values.assign(static_cast<size_t>(width) * height, 0.0);
  const double r = footprint_cutoff_radius(pose.footprint, sigma);
  const int x0 = std::max(0, static_cast<int>(std::floor(pose.x - r)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(pose.x + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(pose.y - r)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(pose.y + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      out.values[static_cast<size_t>(y) * width + x] =
          footprint_at(pose, x, y, sigma, steepness).value;
    }
  }
  return out;
}

void write_sfld(const std::string& path, const ScalarField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write field raster: " + path);
  const char magic[4] = {'S', 'F', 'L', 'D'};
  const uint32_t w = static_cast<uint32_t>(f.width), h = static_cast<uint32_t>(f.height);
  const float sg = static_cast<float>(f.sigma);
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(&sg), 4);
  std::vector<float> buf(f.values.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(f.values[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

ScalarField read_sfld(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open field raster: " + path);
  char magic[4];
  uint32_t w = 0, h = 0;
  float sg = 0.0f;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&sg), 4);
  if (!in || std::memcmp(magic, "SFLD", 4) != 0) {
    throw std::runtime_error("bad SFLD header: " + path);
  }
  ScalarField f;
  f.width = static_cast<int>(w);
  f.height = static_cast<int>(h);
  f.sigma = sg;
  std::vector<float> buf(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated SFLD raster: " + path);
  f.values.assign(buf.begin(), buf.end());
  return f;
}

}  // namespace probemap::field
