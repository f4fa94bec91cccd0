#pragma once

// Synthetic masks and small statistics helpers shared by the unit and
// acceptance suites.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "probemap/rng.hpp"
#include "probemap/shape_field.hpp"

namespace testsupport {

inline probemap::field::SegmentMask make_disk_mask(int size, double cx, double cy,
                                                   double radius,
                                                   const std::string& id = "disk") {
  probemap::field::SegmentMask m;
  m.width = size;
  m.height = size;
  m.id = id;
  m.data.assign(static_cast<size_t>(size) * size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius) {
        m.data[static_cast<size_t>(y) * size + x] = 1;
      }
    }
  }
  return m;
}

inline probemap::field::SegmentMask make_ellipse_mask(int size, double cx, double cy,
                                                      double a, double b, double phi,
                                                      const std::string& id = "ellipse") {
  probemap::field::SegmentMask m;
  m.width = size;
  m.height = size;
  m.id = id;
  m.data.assign(static_cast<size_t>(size) * size, 0);
  const double c = std::cos(phi), s = std::sin(phi);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * c + dy * s) / a;
      const double v = (-dx * s + dy * c) / b;
      if (u * u + v * v <= 1.0) m.data[static_cast<size_t>(y) * size + x] = 1;
    }
  }
  return m;
}

/// Random convex segment (rotated ellipse) roughly centered in the canvas.
inline probemap::field::SegmentMask random_convex_mask(int size, uint64_t seed,
                                                       const std::string& id = "seg") {
  probemap::Rng rng(seed);
  const double a = rng.uniform(0.22, 0.34) * size;
  const double b = rng.uniform(0.22, 0.34) * size;
  const double phi = rng.uniform(0.0, M_PI);
  const double cx = 0.5 * size + rng.uniform(-0.05, 0.05) * size;
  const double cy = 0.5 * size + rng.uniform(-0.05, 0.05) * size;
  return make_ellipse_mask(size, cx, cy, a, b, phi, id);
}

inline void write_pgm(const std::string& path, const probemap::field::SegmentMask& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << m.width << " " << m.height << "\n255\n";
  for (uint8_t v : m.data) out.put(v ? static_cast<char>(255) : 0);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double sample_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return var / static_cast<double>(v.size() - 1);
}

/// Spearman rank correlation (no ties expected in our inputs).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  auto ranks = [&](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (size_t rank = 0; rank < idx.size(); ++rank) r[idx[rank]] = static_cast<double>(rank);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  double d2 = 0.0;
  for (size_t i = 0; i < n; ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (static_cast<double>(n) * (static_cast<double>(n) * n - 1.0));
}

}  // namespace testsupport
