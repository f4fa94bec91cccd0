#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "probemap/pose_loss.hpp"
#include "probemap/shape_field.hpp"

namespace probemap::optim {

struct OptimizerConfig {
  int k = 3;
  int restarts = 8;
  int max_iters = 150;
  double step_size = 5.0;
  double step_decay = 1.0;   // per-iteration multiplier on the trial step
  uint64_t seed = 0;
  double tau = 0.5;          // validity threshold on the normalized field
  field::ProbeFootprint footprint;
  bool record_trace = false;
};

/// Result of pose placement on one segment. `valid` requires every pose to
/// pass the per-tip measurable-area check and every pair to overlap < 1e-3.
struct PoseSet {
  std::vector<field::Pose> poses;
  std::string segment_id;
  loss::LossReport final_loss;
  std::vector<bool> pose_valid;
  bool valid = false;
  // Image-plane placement of the source mask, carried for route building.
  double origin_mm_x = 0.0;
  double origin_mm_y = 0.0;
  double scale_mm_per_px = 1.0;
  // Accepted-loss sequence of the winning restart (when record_trace).
  std::vector<double> loss_trace;
  int discarded_restarts = 0;
};

inline constexpr double kPairOverlapLimit = 1e-3;

/// Samples N candidate pose sets uniformly over the field extent (theta in
/// [0, pi)) and returns the one with the lowest Eq-2 loss. Deterministic
/// given the seed.
PoseSet stochastic_oracle(const field::ScalarField& f, int n_samples, int k,
                          uint64_t seed,
                          const field::ProbeFootprint& fp = {},
                          const loss::LossWeights& w = {}, double tau = 0.5);

/// Best-of-restarts gradient descent on the pose loss. Restart 0 starts from
/// stochastic_oracle(N=100, seed) so the result never loses to that
/// baseline; remaining restarts start from cheap N=5 oracle draws. Steps are
/// backtracked (up to 20 halvings) so accepted iterates never increase the
/// loss; x,y are clamped to the field and theta renormalized each step.
PoseSet optimize(const field::ScalarField& f, const OptimizerConfig& cfg,
                 const loss::LossWeights& w);

/// optimize() over many segments; output order = input order; per-segment
/// seed = cfg.seed XOR segment index.
std::vector<PoseSet> batch_optimize(std::span<const field::ScalarField> fields,
                                    const OptimizerConfig& cfg,
                                    const loss::LossWeights& w);

// Serialization: CSV per spec (segment_id,pose_index,x_px,y_px,theta_rad,
// valid) and JSON carrying loss reports plus mask placement metadata.
void write_pose_sets_csv(const std::string& path, std::span<const PoseSet> sets);
void write_pose_sets_json(const std::string& path, std::span<const PoseSet> sets);
std::vector<PoseSet> read_pose_sets_json(const std::string& path);

}  // namespace probemap::optim
