#include "probemap/pose_loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace probemap::loss {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct TipLayout {
  std::vector<double> off;                     // signed offsets along the line
  std::vector<std::array<double, 2>> pos;      // rotated tip positions
  double cos_t, sin_t;
  double sigma;

  TipLayout(const field::Pose& p) : sigma(p.footprint.tip_radius_px) {
    cos_t = std::cos(p.theta);
    sin_t = std::sin(p.theta);
    const int n = p.footprint.tip_count;
    const double mid = 0.5 * (n - 1);
    off.resize(static_cast<size_t>(n));
    pos.resize(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) {
      off[static_cast<size_t>(m)] = (m - mid) * p.footprint.tip_spacing_px;
      pos[static_cast<size_t>(m)] = {p.x + off[static_cast<size_t>(m)] * cos_t,
                                     p.y + off[static_cast<size_t>(m)] * sin_t};
    }
  }
};

struct Soft {
  double k, s0, inv_span;
  explicit Soft(double steepness)
      : k(steepness), s0(1.0 / (1.0 + std::exp(0.5 * k))), inv_span(1.0 / (1.0 - s0)) {}
  double value(double z) const { return (1.0 / (1.0 + std::exp(-k * (z - 0.5))) - s0) * inv_span; }
  double deriv(double z) const {
    const double s = 1.0 / (1.0 + std::exp(-k * (z - 0.5)));
    return k * s * (1.0 - s) * inv_span;
  }
};

struct CoverageResult {
  double value = 0.0;  // normalized by reference mass
  PoseGrad grad;       // of the normalized value
};

// Field/footprint correlation for one pose over its cutoff window.
CoverageResult pose_coverage(const field::ScalarField& f, const field::Pose& p,
                             double steepness, bool want_grad) {
  const TipLayout tips(p);
  const Soft soft(steepness);
  const double inv_s2 = 1.0 / (tips.sigma * tips.sigma);
  const double r = field::footprint_cutoff_radius(p.footprint, tips.sigma);
  const int x0 = std::max(0, static_cast<int>(std::floor(p.x - r)));
  const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(p.x + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(p.y - r)));
  const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(p.y + r)));

  double num = 0.0, gx = 0.0, gy = 0.0, gt = 0.0;
  const size_t n = tips.pos.size();
  for (int y = y0; y <= y1; ++y) {
    const double* row = f.values.data() + static_cast<size_t>(y) * f.width;
    for (int x = x0; x <= x1; ++x) {
      const double iv = row[x];
      if (iv == 0.0) continue;  // zero-field pixels contribute nothing
      double g = 0.0, dgx = 0.0, dgy = 0.0, dgt = 0.0;
      for (size_t m = 0; m < n; ++m) {
        const double dx = x - tips.pos[m][0];
        const double dy = y - tips.pos[m][1];
        const double e = std::exp(-0.5 * (dx * dx + dy * dy) * inv_s2);
        g += e;
        if (want_grad) {
          dgx += e * dx * inv_s2;
          dgy += e * dy * inv_s2;
          dgt += e * inv_s2 * (dx * (-tips.off[m] * tips.sin_t) + dy * (tips.off[m] * tips.cos_t));
        }
      }
      num += iv * soft.value(g);
      if (want_grad) {
        const double d = iv * soft.deriv(g);
        gx += d * dgx;
        gy += d * dgy;
        gt += d * dgt;
      }
    }
  }
  const double mass = field::footprint_reference_mass(p.footprint, tips.sigma, steepness);
  CoverageResult out;
  out.value = num / mass;
  out.grad = {gx / mass, gy / mass, gt / mass};
  return out;
}

// Unnormalized Gaussian cross-correlation mass between two tip sets,
// integrated in closed form over the plane.
double raw_cross(const TipLayout& a, const TipLayout& b) {
  const double s = a.sigma * a.sigma + b.sigma * b.sigma;
  const double c = 2.0 * kPi * a.sigma * a.sigma * b.sigma * b.sigma / s;
  double sum = 0.0;
  for (const auto& pa : a.pos) {
    for (const auto& pb : b.pos) {
      const double dx = pa[0] - pb[0], dy = pa[1] - pb[1];
      sum += std::exp(-0.5 * (dx * dx + dy * dy) / s);
    }
  }
  return c * sum;
}

struct PairOverlapGrad {
  double value = 0.0;
  PoseGrad ga, gb;
};

// pair overlap with gradients; the self-correlation denominators are
// invariant under pose translation/rotation and carry no gradient.
PairOverlapGrad pair_overlap_grad(const field::Pose& pa, const field::Pose& pb) {
  const TipLayout a(pa), b(pb);
  const double s = a.sigma * a.sigma + b.sigma * b.sigma;
  const double c = 2.0 * kPi * a.sigma * a.sigma * b.sigma * b.sigma / s;
  const double denom = std::sqrt(raw_cross(a, a) * raw_cross(b, b));

  PairOverlapGrad out;
  double sum = 0.0;
  double ax = 0, ay = 0, at = 0, bx = 0, by = 0, bt = 0;
  for (size_t i = 0; i < a.pos.size(); ++i) {
    for (size_t j = 0; j < b.pos.size(); ++j) {
      const double dx = a.pos[i][0] - b.pos[j][0];
      const double dy = a.pos[i][1] - b.pos[j][1];
      const double e = std::exp(-0.5 * (dx * dx + dy * dy) / s);
      sum += e;
      const double fx = -e * dx / s, fy = -e * dy / s;  // d e / d a
      ax += fx;
      ay += fy;
      at += fx * (-a.off[i] * a.sin_t) + fy * (a.off[i] * a.cos_t);
      bx -= fx;
      by -= fy;
      bt += (-fx) * (-b.off[j] * b.sin_t) + (-fy) * (b.off[j] * b.cos_t);
    }
  }
  const double scale = c / denom;
  out.value = scale * sum;
  out.ga = {scale * ax, scale * ay, scale * at};
  out.gb = {scale * bx, scale * by, scale * bt};
  return out;
}

}  // namespace

double coverage(const field::ScalarField& f, std::span<const field::Pose> poses,
                double sigmoid_steepness) {
  if (poses.empty()) throw std::invalid_argument("coverage: poses must be nonempty");
  double total = 0.0;
  for (const auto& p : poses) total += pose_coverage(f, p, sigmoid_steepness, false).value;
  return total;
}

double angle_variance(std::span<const field::Pose> poses) {
  if (poses.empty()) throw std::invalid_argument("angle_variance: poses must be nonempty");
  const size_t k = poses.size();
  if (k == 1) return 0.0;
  double mean = 0.0;
  for (const auto& p : poses) mean += field::normalize_theta(p.theta);
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (const auto& p : poses) {
    const double d = field::normalize_theta(p.theta) - mean;
    var += d * d;
  }
  return var / static_cast<double>(k);
}

double pair_overlap(const field::Pose& a, const field::Pose& b) {
  const TipLayout la(a), lb(b);
  return raw_cross(la, lb) / std::sqrt(raw_cross(la, la) * raw_cross(lb, lb));
}

double overlap(std::span<const field::Pose> poses) {
  double total = 0.0;
  for (size_t i = 0; i < poses.size(); ++i) {
    for (size_t j = i + 1; j < poses.size(); ++j) {
      total += pair_overlap(poses[i], poses[j]);
    }
  }
  return total;
}

LossReport evaluate(const field::ScalarField& f, std::span<const field::Pose> poses,
                    const LossWeights& w) {
  if (poses.empty()) throw std::invalid_argument("evaluate: poses must be nonempty");
  const size_t k = poses.size();
  LossReport r;
  r.grad.assign(k, PoseGrad{});

  for (size_t i = 0; i < k; ++i) {
    const auto cov = pose_coverage(f, poses[i], w.sigmoid_steepness, true);
    r.coverage_term += cov.value;
    r.grad[i].dx -= w.w_coverage * cov.grad.dx;
    r.grad[i].dy -= w.w_coverage * cov.grad.dy;
    r.grad[i].dtheta -= w.w_coverage * cov.grad.dtheta;
  }

  r.angle_term = angle_variance(poses);
  if (k > 1) {
    double mean = 0.0;
    for (const auto& p : poses) mean += field::normalize_theta(p.theta);
    mean /= static_cast<double>(k);
    for (size_t i = 0; i < k; ++i) {
      const double d = 2.0 * (field::normalize_theta(poses[i].theta) - mean) / static_cast<double>(k);
      r.grad[i].dtheta -= w.w_angle * d;
    }
  }

  for (size_t i = 0; i < k; ++i) {
    for (size_t j = i + 1; j < k; ++j) {
      const auto ov = pair_overlap_grad(poses[i], poses[j]);
      r.overlap_term += ov.value;
      r.grad[i].dx += w.w_overlap * ov.ga.dx;
      r.grad[i].dy += w.w_overlap * ov.ga.dy;
      r.grad[i].dtheta += w.w_overlap * ov.ga.dtheta;
      r.grad[j].dx += w.w_overlap * ov.gb.dx;
      r.grad[j].dy += w.w_overlap * ov.gb.dy;
      r.grad[j].dtheta += w.w_overlap * ov.gb.dtheta;
    }
  }

  r.total = -w.w_coverage * r.coverage_term - w.w_angle * r.angle_term +
            w.w_overlap * r.overlap_term;

  bool finite = std::isfinite(r.total);
  for (const auto& g : r.grad) {
    finite = finite && std::isfinite(g.dx) && std::isfinite(g.dy) && std::isfinite(g.dtheta);
  }
  if (!finite) throw std::runtime_error("evaluate: non-finite loss (check sigmoid steepness)");
  return r;
}

bool is_valid(const field::ScalarField& f, const field::Pose& pose, double tau) {
  for (const auto& tip : field::tip_positions(pose)) {
    if (tip[0] < 0.0 || tip[0] > f.width - 1 || tip[1] < 0.0 || tip[1] > f.height - 1) {
      return false;
    }
    if (f.sample(tip[0], tip[1]) < tau) return false;
  }
  return true;
}

std::string report_json(const LossReport& r) {
  nlohmann::json j;
  j["total"] = r.total;
  j["coverage"] = r.coverage_term;
  j["angle_variance"] = r.angle_term;
  j["overlap"] = r.overlap_term;
  auto& g = j["grad"] = nlohmann::json::array();
  for (const auto& pg : r.grad) {
    g.push_back({{"dx", pg.dx}, {"dy", pg.dy}, {"dtheta", pg.dtheta}});
  }
  return j.dump();
}

}  // namespace probemap::loss
