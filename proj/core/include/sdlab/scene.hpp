#pragma once

#include "sdlab/gmm.hpp"

#include <string>
#include <vector>

namespace sdlab {

// Square image stored flat, index p = y * side + x. Values are intended to
// live in [0, 1] but are not clamped on write (optimizers overshoot).
struct ObjectGrid {
  int side = 0;
  Vec values;  // side * side entries

  static ObjectGrid zero(int side);
  static ObjectGrid from_flat(int side, Vec flat);
  double at(int y, int x) const { return values[y * side + x]; }
  double& at(int y, int x) { return values[y * side + x]; }
};

ObjectGrid shift_grid(const ObjectGrid& g, int dx, int dy);  // zero fill
ObjectGrid erode_grid(const ObjectGrid& g);                  // 3x3 min, zero border
ObjectGrid clamp01(const ObjectGrid& g);

// Viewing direction; angle canonicalized into [0, 2*pi).
struct Pose {
  double angle = 0.0;
  explicit Pose(double a);
  Pose() = default;
};

// Parallel-beam projection: row r integrates the bilinear interpolant of the
// grid along a line with signed offset s_r from the center. Lengths are in
// pixel units (node spacing 1, image square side-1 across), so projections of
// distinct sprites sit far apart relative to sigma_c and stay distinguishable
// under forward noising deep into the schedule.
struct ViewOperator {
  Mat m;  // d x side^2
  int side = 0;
  int rays() const { return static_cast<int>(m.rows()); }
};

// Depends only on (pose, side, rays). At pose 0 the rays run along image
// columns; offsets span the full diagonal so every pose sees the whole square.
ViewOperator view_operator(const Pose& pose, int side, int rays);

// Signed pixel-unit offset of ray r out of `rays` (linspace over the image
// diagonal of a side x side grid).
double ray_offset(int r, int rays, int side);

// Length (pixel units) of the intersection of ray (pose, offset s) with the
// image square. Row sums of view_operator equal this exactly (all-ones image).
double ray_chord_length(const Pose& pose, double s, int side);

Vec render(const ObjectGrid& g, const ViewOperator& op);

struct WorldConfig {
  int n = 32;           // grid side
  int d = 48;           // rays per view == latent dimension
  int pose_count = 16;  // evenly spaced training poses
  double input_pose = 0.0;
  double sigma_c = 0.05;     // conditional mode standard deviation
  int k_modes = 3;           // conditional mixture size
  double jitter = 2.0;       // pixel scale of the alternative-mode perturbations
  double prior_sigma = 0.2;  // unconditional mode standard deviation
  void validate() const;
};

// A synthetic scene: ground-truth sprite image, training poses with cached
// view operators, and the parameters of the view-conditioned mixtures.
struct World {
  std::uint64_t seed = 0;
  WorldConfig cfg;
  ObjectGrid gt;
  std::vector<Pose> train_poses;
  std::vector<ViewOperator> train_ops;
  Pose input_pose;
  ViewOperator input_op;

  const ViewOperator& op_at(int pose_index) const;
};

World make_world(std::uint64_t seed, const WorldConfig& cfg = {});

// Operator for an arbitrary pose, reusing the caches where possible.
ViewOperator op_for(const World& w, const Pose& pose);

Vec render_at(const World& w, const ObjectGrid& g, int pose_index);

// Deterministic perturbed copy of gt backing conditional mode `mode` (>= 2)
// at the given pose: gt blended with a copy of itself shifted at the jitter
// scale (a partial misregistration).
ObjectGrid jitter_variant(const World& w, const Pose& pose, int mode);

// What a pose-conditioned ideal model believes about the view latent: the
// true render plus plausible distractor interpretations.
// Mode 1 = N(render(gt, pose), sigma_c^2 I) with weight 0.85 (weight 1 when
// k_modes == 1); modes 2..K split the rest evenly around jittered renders.
GaussianMixture conditional_gmm(const World& w, const Pose& pose);

// Conditional components with a flat weight vector: the model knows the pose
// but has lost the preference among interpretations.
GaussianMixture pose_marginal_gmm(const World& w, const Pose& pose);

// The unconditional prior the oracles are built from: every pose's
// conditional modes (true view and jittered alternates, same weights) but
// carrying the much broader prior_sigma. The unconditional model knows the
// render distribution only coarsely; given the image and pose
// (conditional_gmm) the modes sharpen to sigma_c.
GaussianMixture prior_gmm(const World& w);

// Observed latent of the input view (tiny observation noise) and its pose.
std::pair<Vec, Pose> input_view(const World& w);

void save_world(const World& w, const std::string& path);  // flat binary
World load_world(const std::string& path);
void save_grid_csv(const ObjectGrid& g, const std::string& path, int d = 0,
                   std::uint64_t seed = 0);
ObjectGrid load_grid_csv(const std::string& path);

}  // namespace sdlab
