#include "probemap/pose_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "probemap/rng.hpp"

namespace probemap::optim {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Descent iterates are box-projected. theta uses a clamp rather than a
// modular wrap: the plain angle variance of the objective is discontinuous
// at the wrap point, and a wrapping trial step there would be rejected at
// every backtracking scale, stalling the other parameters.
void clamp_pose(field::Pose& p, const field::ScalarField& f) {
  p.x = std::clamp(p.x, 0.0, static_cast<double>(f.width - 1));
  p.y = std::clamp(p.y, 0.0, static_cast<double>(f.height - 1));
  p.theta = std::clamp(p.theta, 0.0, std::nextafter(kPi, 0.0));
}

std::vector<field::Pose> sample_pose_set(Rng& rng, const field::ScalarField& f,
                                         int k, const field::ProbeFootprint& fp) {
  std::vector<field::Pose> poses(static_cast<size_t>(k));
  for (auto& p : poses) {
    p.x = rng.uniform(0.0, static_cast<double>(f.width - 1));
    p.y = rng.uniform(0.0, static_cast<double>(f.height - 1));
    p.theta = rng.uniform(0.0, kPi);
    p.footprint = fp;
  }
  return poses;
}

void fill_validity(PoseSet& set, const field::ScalarField& f, double tau) {
  set.pose_valid.assign(set.poses.size(), false);
  bool all = true;
  for (size_t i = 0; i < set.poses.size(); ++i) {
    const bool v = loss::is_valid(f, set.poses[i], tau);
    set.pose_valid[i] = v;
    all = all && v;
  }
  for (size_t i = 0; all && i < set.poses.size(); ++i) {
    for (size_t j = i + 1; all && j < set.poses.size(); ++j) {
      if (loss::pair_overlap(set.poses[i], set.poses[j]) >= kPairOverlapLimit) all = false;
    }
  }
  set.valid = all;
}

struct DescentResult {
  std::vector<field::Pose> poses;
  loss::LossReport report;
  std::vector<double> trace;
  bool ok = false;
};

DescentResult descend(const field::ScalarField& f, std::vector<field::Pose> poses,
                      const OptimizerConfig& cfg, const loss::LossWeights& w) {
  DescentResult out;
  try {
    loss::LossReport cur = loss::evaluate(f, poses, w);
    if (cfg.record_trace) out.trace.push_back(cur.total);
    double step = cfg.step_size;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      double eta = step;
      bool accepted = false;
      for (int half = 0; half < 20 && !accepted; ++half, eta *= 0.5) {
        std::vector<field::Pose> trial = poses;
        for (size_t i = 0; i < trial.size(); ++i) {
          trial[i].x -= eta * cur.grad[i].dx;
          trial[i].y -= eta * cur.grad[i].dy;
          trial[i].theta -= eta * cur.grad[i].dtheta;
          clamp_pose(trial[i], f);
        }
        const loss::LossReport next = loss::evaluate(f, trial, w);
        if (next.total < cur.total) {
          poses = std::move(trial);
          cur = next;
          accepted = true;
          if (cfg.record_trace) out.trace.push_back(cur.total);
        }
      }
      if (!accepted) break;  // no descent direction left at this scale
      step *= cfg.step_decay;
    }
    out.poses = std::move(poses);
    out.report = std::move(cur);
    out.ok = true;
  } catch (const std::runtime_error&) {
    out.ok = false;  // non-finite loss: discard this restart
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

PoseSet stochastic_oracle(const field::ScalarField& f, int n_samples, int k,
                          uint64_t seed, const field::ProbeFootprint& fp,
                          const loss::LossWeights& w, double tau) {
  if (n_samples < 1) throw std::invalid_argument("stochastic_oracle: N must be >= 1");
  if (k < 1) throw std::invalid_argument("stochastic_oracle: k must be >= 1");
  Rng rng(seed);
  PoseSet best;
  double best_total = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    auto poses = sample_pose_set(rng, f, k, fp);
    const auto report = loss::evaluate(f, poses, w);
    if (report.total < best_total) {
      best_total = report.total;
      best.poses = std::move(poses);
      best.final_loss = report;
    }
  }
  fill_validity(best, f, tau);
  return best;
}

PoseSet optimize(const field::ScalarField& f, const OptimizerConfig& cfg,
                 const loss::LossWeights& w) {
  if (f.values.empty()) throw std::invalid_argument("optimize: field is empty");
  if (cfg.restarts < 1) throw std::invalid_argument("optimize: restarts must be >= 1");

  PoseSet best;
  double best_total = std::numeric_limits<double>::infinity();
  int discarded = 0;
  bool have_any = false;

  for (int r = 0; r < cfg.restarts; ++r) {
    // Restart 0 reuses the paper's stochastic baseline verbatim (N=100, the
    // caller's seed) so descent can only improve on it.
    std::vector<field::Pose> init;
    if (r == 0) {
      init = stochastic_oracle(f, 100, cfg.k, cfg.seed, cfg.footprint, w, cfg.tau).poses;
    } else {
      init = stochastic_oracle(f, 5, cfg.k, mix_seed(cfg.seed, static_cast<uint64_t>(r)),
                               cfg.footprint, w, cfg.tau)
                 .poses;
    }
    DescentResult res = descend(f, std::move(init), cfg, w);
    if (!res.ok) {
      ++discarded;
      continue;
    }
    if (!have_any || res.report.total < best_total) {
      have_any = true;
      best_total = res.report.total;
      best.poses = std::move(res.poses);
      best.final_loss = std::move(res.report);
      best.loss_trace = std::move(res.trace);
    }
  }
  if (!have_any) {
    // Every restart hit a non-finite loss; fall back to the raw oracle.
    best = stochastic_oracle(f, 100, cfg.k, cfg.seed, cfg.footprint, w, cfg.tau);
  }
  best.discarded_restarts = discarded;
  fill_validity(best, f, cfg.tau);
  return best;
}

std::vector<PoseSet> batch_optimize(std::span<const field::ScalarField> fields,
                                    const OptimizerConfig& cfg,
                                    const loss::LossWeights& w) {
  std::vector<PoseSet> out;
  out.reserve(fields.size());
  for (size_t i = 0; i < fields.size(); ++i) {
    OptimizerConfig local = cfg;
    local.seed = cfg.seed ^ static_cast<uint64_t>(i);
    PoseSet set = optimize(fields[i], local, w);
    set.segment_id = std::to_string(i);
    out.push_back(std::move(set));
  }
  return out;
}

void write_pose_sets_csv(const std::string& path, std::span<const PoseSet> sets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "segment_id,pose_index,x_px,y_px,theta_rad,valid\n";
  for (const auto& set : sets) {
    for (size_t i = 0; i < set.poses.size(); ++i) {
      const auto& p = set.poses[i];
      out << set.segment_id << ',' << i << ',' << format_double(p.x) << ','
          << format_double(p.y) << ',' << format_double(p.theta) << ','
          << (set.pose_valid[i] ? 1 : 0) << '\n';
    }
  }
}

void write_pose_sets_json(const std::string& path, std::span<const PoseSet> sets) {
  nlohmann::json root = nlohmann::json::array();
  for (const auto& set : sets) {
    nlohmann::json js;
    js["segment_id"] = set.segment_id;
    js["valid"] = set.valid;
    js["origin_mm"] = {set.origin_mm_x, set.origin_mm_y};
    js["scale_mm_per_px"] = set.scale_mm_per_px;
    js["loss"] = {{"total", set.final_loss.total},
                  {"coverage", set.final_loss.coverage_term},
                  {"angle_variance", set.final_loss.angle_term},
                  {"overlap", set.final_loss.overlap_term}};
    auto& poses = js["poses"] = nlohmann::json::array();
    for (size_t i = 0; i < set.poses.size(); ++i) {
      const auto& p = set.poses[i];
      poses.push_back({{"x_px", p.x},
                       {"y_px", p.y},
                       {"theta_rad", p.theta},
                       {"valid", static_cast<bool>(set.pose_valid[i])},
                       {"footprint",
                        {{"tip_count", p.footprint.tip_count},
                         {"tip_spacing_px", p.footprint.tip_spacing_px},
                         {"tip_radius_px", p.footprint.tip_radius_px}}}});
    }
    root.push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << root.dump(2) << '\n';
}

std::vector<PoseSet> read_pose_sets_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json root;
  in >> root;
  std::vector<PoseSet> sets;
  for (const auto& js : root) {
    PoseSet set;
    set.segment_id = js.at("segment_id").get<std::string>();
    set.valid = js.at("valid").get<bool>();
    set.origin_mm_x = js.at("origin_mm")[0].get<double>();
    set.origin_mm_y = js.at("origin_mm")[1].get<double>();
    set.scale_mm_per_px = js.at("scale_mm_per_px").get<double>();
    for (const auto& jp : js.at("poses")) {
      field::Pose p;
      p.x = jp.at("x_px").get<double>();
      p.y = jp.at("y_px").get<double>();
      p.theta = jp.at("theta_rad").get<double>();
      const auto& jf = jp.at("footprint");
      p.footprint.tip_count = jf.at("tip_count").get<int>();
      p.footprint.tip_spacing_px = jf.at("tip_spacing_px").get<double>();
      p.footprint.tip_radius_px = jf.at("tip_radius_px").get<double>();
      set.poses.push_back(p);
      set.pose_valid.push_back(jp.at("valid").get<bool>());
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace probemap::optim
