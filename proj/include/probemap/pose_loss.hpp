#pragma once

#include <span>
#include <vector>

#include "probemap/shape_field.hpp"

namespace probemap::loss {

/// Objective weights. w_coverage and w_angle default equal; w_overlap is the
/// smooth relaxation of the pairwise-disjointness constraint.
struct LossWeights {
  double w_coverage = 1.0;
  double w_angle = 1.0;
  double w_overlap = 1.0;
  double sigmoid_steepness = 10.0;
};

struct PoseGrad {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

/// Term-by-term loss breakdown. Terms are stored unweighted:
/// total = -w_coverage*coverage_term - w_angle*angle_term
///         + w_overlap*overlap_term.
struct LossReport {
  double total = 0.0;
  double coverage_term = 0.0;
  double angle_term = 0.0;
  double overlap_term = 0.0;
  std::vector<PoseGrad> grad;
};

/// Sum over poses of the field/footprint correlation, each pose normalized
/// by its footprint reference mass so the per-pose value lies in [0, 1].
double coverage(const field::ScalarField& f, std::span<const field::Pose> poses,
                double sigmoid_steepness = 10.0);

/// Population variance of the [0, pi)-normalized pose angles; 0 for k = 1.
double angle_variance(std::span<const field::Pose> poses);

/// Closed-form normalized product integral of the two poses' tip Gaussian
/// intensities: 1 for coincident poses, exp(-d^2/(4 sigma^2)) for two
/// single-tip poses a distance d apart.
double pair_overlap(const field::Pose& a, const field::Pose& b);

/// Sum of pair_overlap over all unordered pose pairs; 0 for k < 2.
double overlap(std::span<const field::Pose> poses);

/// Full objective with analytic gradients per pose parameter. Throws
/// std::runtime_error if any intermediate is non-finite (mis-scaled
/// steepness).
LossReport evaluate(const field::ScalarField& f, std::span<const field::Pose> poses,
                    const LossWeights& w);

/// True iff the smoothed field is >= tau at every tip of the pose and every
/// tip lies inside the field grid (the measurable area is the tau
/// super-level set of the max-normalized field).
bool is_valid(const field::ScalarField& f, const field::Pose& pose, double tau = 0.5);

/// JSON object for the CLI --trace mode.
std::string report_json(const LossReport& r);

}  // namespace probemap::loss
