#include "probemap/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "probemap/rng.hpp"

namespace probemap::measure {

namespace {

void validate(const IVRecord& rec) {
  const size_t n = rec.voltages.size();
  if (n < 2) throw std::invalid_argument("iv record needs >= 2 points");
  if (rec.current_light.size() != n || rec.current_dark.size() != n) {
    throw std::invalid_argument("iv record arrays must have equal length");
  }
  const bool inc = rec.voltages[1] > rec.voltages[0];
  for (size_t i = 1; i < n; ++i) {
    const bool step_inc = rec.voltages[i] > rec.voltages[i - 1];
    if (step_inc != inc || rec.voltages[i] == rec.voltages[i - 1]) {
      throw std::invalid_argument("iv record voltages must be strictly monotonic");
    }
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

PhotoFit photoconductance(const IVRecord& rec, bool zero_intercept) {
  validate(rec);
  const size_t n = rec.voltages.size();
  std::vector<double> iph(n);
  for (size_t i = 0; i < n; ++i) iph[i] = rec.current_light[i] - rec.current_dark[i];

  double slope = 0.0, intercept = 0.0;
  if (zero_intercept) {
    double svv = 0.0, svi = 0.0;
    for (size_t i = 0; i < n; ++i) {
      svv += rec.voltages[i] * rec.voltages[i];
      svi += rec.voltages[i] * iph[i];
    }
    if (svv <= 0.0) throw std::invalid_argument("photoconductance: zero voltage span");
    slope = svi / svv;
  } else {
    const double vm = std::accumulate(rec.voltages.begin(), rec.voltages.end(), 0.0) /
                      static_cast<double>(n);
    const double im = std::accumulate(iph.begin(), iph.end(), 0.0) / static_cast<double>(n);
    double svv = 0.0, svi = 0.0;
    for (size_t i = 0; i < n; ++i) {
      svv += (rec.voltages[i] - vm) * (rec.voltages[i] - vm);
      svi += (rec.voltages[i] - vm) * (iph[i] - im);
    }
    if (svv <= 0.0) throw std::invalid_argument("photoconductance: zero voltage span");
    slope = svi / svv;
    intercept = im - slope * vm;
  }

  double ss_res = 0.0, ss_tot = 0.0;
  const double im = std::accumulate(iph.begin(), iph.end(), 0.0) / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double fit = slope * rec.voltages[i] + intercept;
    ss_res += (iph[i] - fit) * (iph[i] - fit);
    ss_tot += (iph[i] - im) * (iph[i] - im);
  }
  PhotoFit out;
  out.g_ph = slope;
  out.r2 = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return out;
}

double synth_true_gph(double composition_x, double pose_quality) {
  const double nano = 1e-9;
  return pose_quality * (1.0 + 49.0 * composition_x * composition_x) * nano;
}

IVRecord synth_iv(double composition_x, double pose_quality, uint64_t seed,
                  const SynthOptions& opt) {
  if (composition_x < 0.0 || composition_x > 1.0) {
    throw std::invalid_argument("synth_iv: composition_x must be in [0,1]");
  }
  if (pose_quality < 0.0 || pose_quality > 1.0) {
    throw std::invalid_argument("synth_iv: pose_quality must be in [0,1]");
  }
  const double g_dark = 0.5e-9;  // ohmic background, cancels in the difference
  const double g_ph = synth_true_gph(composition_x, pose_quality);

  Rng rng(seed);
  IVRecord rec;
  rec.voltages.resize(static_cast<size_t>(opt.points));
  rec.current_light.resize(static_cast<size_t>(opt.points));
  rec.current_dark.resize(static_cast<size_t>(opt.points));
  const double span = opt.v_max - opt.v_min;
  const double range = g_ph * std::abs(span);  // true photocurrent range
  const double sigma = opt.noise_frac * range;
  for (int i = 0; i < opt.points; ++i) {
    const double v = opt.v_min + span * static_cast<double>(i) / (opt.points - 1);
    const double dark = g_dark * v;
    const double noise = sigma > 0.0 ? sigma * rng.normal() : 0.0;
    rec.voltages[static_cast<size_t>(i)] = v;
    rec.current_dark[static_cast<size_t>(i)] = dark;
    rec.current_light[static_cast<size_t>(i)] = dark + g_ph * v + noise;
  }
  return rec;
}

SpatialMap spatial_map(std::span<const std::pair<field::Pose, double>> samples,
                       const field::SegmentMask& mask, double bandwidth_px) {
  if (samples.empty()) throw std::invalid_argument("spatial_map: need >= 1 sample");
  if (bandwidth_px <= 0.0) throw std::invalid_argument("spatial_map: bandwidth must be > 0");
  SpatialMap out;
  out.width = mask.width;
  out.height = mask.height;
  out.bandwidth_px = bandwidth_px;
  out.grid.assign(static_cast<size_t>(mask.width) * mask.height,
                  std::numeric_limits<double>::quiet_NaN());
  const double inv2bw2 = 1.0 / (2.0 * bandwidth_px * bandwidth_px);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      double num = 0.0, den = 0.0;
      double nearest = std::numeric_limits<double>::infinity();
      double nearest_val = 0.0;
      for (const auto& [pose, g] : samples) {
        const double dx = x - pose.x, dy = y - pose.y;
        const double d2 = dx * dx + dy * dy;
        const double w = std::exp(-d2 * inv2bw2);
        num += w * g;
        den += w;
        if (d2 < nearest) {
          nearest = d2;
          nearest_val = g;
        }
      }
      // All weights can underflow far from every sample; the NW limit there
      // is the nearest sample's value.
      out.grid[static_cast<size_t>(y) * mask.width + x] = den > 1e-300 ? num / den : nearest_val;
    }
  }
  return out;
}

std::vector<CompositionStats> campaign_summary(std::span<const MeasurementRecord> records) {
  std::map<double, std::vector<double>> groups;
  for (const auto& r : records) groups[r.composition_x].push_back(r.g_ph);
  std::vector<CompositionStats> out;
  for (auto& [x, vals] : groups) {
    std::sort(vals.begin(), vals.end());
    CompositionStats s;
    s.composition_x = x;
    s.count = static_cast<int>(vals.size());
    const size_t k = vals.size();
    s.median = k % 2 ? vals[k / 2] : 0.5 * (vals[k / 2 - 1] + vals[k / 2]);
    s.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(k);
    double var = 0.0;
    for (double v : vals) var += (v - s.mean) * (v - s.mean);
    s.stddev = k > 1 ? std::sqrt(var / static_cast<double>(k - 1)) : 0.0;
    s.min = vals.front();
    s.max = vals.back();
    out.push_back(s);
  }
  return out;
}

IVRecord read_iv_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open iv file: " + path);
  IVRecord rec;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.find("voltage") != std::string::npos) continue;  // header
    std::istringstream ss(line);
    double v, il, id;
    char comma;
    if (ss >> v >> comma >> il >> comma >> id) {
      rec.voltages.push_back(v);
      rec.current_light.push_back(il);
      rec.current_dark.push_back(id);
    }
  }
  validate(rec);
  return rec;
}

void write_iv_csv(const std::string& path, const IVRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write iv file: " + path);
  out << "voltage,current_light,current_dark\n";
  for (size_t i = 0; i < rec.voltages.size(); ++i) {
    out << fmt(rec.voltages[i]) << ',' << fmt(rec.current_light[i]) << ','
        << fmt(rec.current_dark[i]) << '\n';
  }
}

void write_records_csv(const std::string& path, std::span<const MeasurementRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "segment_id,x_px,y_px,theta_rad,composition_x,g_ph_S,fit_r2\n";
  for (const auto& r : records) {
    out << r.segment_id << ',' << fmt(r.pose.x) << ',' << fmt(r.pose.y) << ','
        << fmt(r.pose.theta) << ',' << fmt(r.composition_x) << ',' << fmt(r.g_ph) << ','
        << fmt(r.fit_r2) << '\n';
  }
}

void write_summary_csv(const std::string& path, std::span<const CompositionStats> stats) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "composition_x,count,median_S,mean_S,stddev_S,min_S,max_S\n";
  for (const auto& s : stats) {
    out << fmt(s.composition_x) << ',' << s.count << ',' << fmt(s.median) << ',' << fmt(s.mean)
        << ',' << fmt(s.stddev) << ',' << fmt(s.min) << ',' << fmt(s.max) << '\n';
  }
}

}  // namespace probemap::measure
