#include "sdlab/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sdlab {

ObjectGrid ObjectGrid::zero(int side) {
  if (side < 1) throw std::invalid_argument("grid: side must be >= 1");
  return {side, Vec::Zero(side * side)};
}

ObjectGrid ObjectGrid::from_flat(int side, Vec flat) {
  if (flat.size() != static_cast<Eigen::Index>(side) * side)
    throw std::invalid_argument("grid: flat size does not match side^2");
  return {side, std::move(flat)};
}

ObjectGrid shift_grid(const ObjectGrid& g, int dx, int dy) {
  ObjectGrid out = ObjectGrid::zero(g.side);
  for (int y = 0; y < g.side; ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= g.side) continue;
    for (int x = 0; x < g.side; ++x) {
      const int sx = x - dx;
      if (sx < 0 || sx >= g.side) continue;
      out.at(y, x) = g.at(sy, sx);
    }
  }
  return out;
}

ObjectGrid erode_grid(const ObjectGrid& g) {
  ObjectGrid out = ObjectGrid::zero(g.side);
  for (int y = 0; y < g.side; ++y)
    for (int x = 0; x < g.side; ++x) {
      double m = g.at(y, x);
      for (int oy = -1; oy <= 1; ++oy)
        for (int ox = -1; ox <= 1; ++ox) {
          const int yy = y + oy, xx = x + ox;
          const double v =
              (yy < 0 || yy >= g.side || xx < 0 || xx >= g.side) ? 0.0 : g.at(yy, xx);
          m = std::min(m, v);
        }
      out.at(y, x) = m;
    }
  return out;
}

ObjectGrid clamp01(const ObjectGrid& g) {
  ObjectGrid out = g;
  out.values = out.values.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

Pose::Pose(double a) {
  if (!std::isfinite(a)) throw std::invalid_argument("pose: angle must be finite");
  angle = std::fmod(a, 2.0 * M_PI);
  if (angle < 0.0) angle += 2.0 * M_PI;
  if (angle == -0.0) angle = 0.0;
}

namespace {

// Clip tau range of p + tau*u against [-1/2, 1/2] in one coordinate.
bool clip_axis(double p, double u, double& t0, double& t1) {
  if (std::abs(u) < 1e-15) return std::abs(p) <= 0.5;
  double ta = (-0.5 - p) / u;
  double tb = (0.5 - p) / u;
  if (ta > tb) std::swap(ta, tb);
  t0 = std::max(t0, ta);
  t1 = std::min(t1, tb);
  return true;
}

}  // namespace

double ray_offset(int r, int rays, int side) {
  const double s_max = (side - 1) * std::sqrt(2.0) / 2.0;
  return (rays == 1) ? 0.0 : -s_max + 2.0 * s_max * r / (rays - 1);
}

double ray_chord_length(const Pose& pose, double s, int side) {
  const double scale = side - 1;
  const double ux = -std::sin(pose.angle), uy = std::cos(pose.angle);
  const double vx = std::cos(pose.angle), vy = std::sin(pose.angle);
  const double su = s / scale;  // unit-square offset
  double t0 = -1e30, t1 = 1e30;
  if (!clip_axis(su * vx, ux, t0, t1) || !clip_axis(su * vy, uy, t0, t1)) return 0.0;
  return scale * std::max(0.0, t1 - t0);
}

ViewOperator view_operator(const Pose& pose, int side, int rays) {
  if (side < 2) throw std::invalid_argument("view_operator: side must be >= 2");
  if (rays < 1) throw std::invalid_argument("view_operator: rays must be >= 1");

  const int n = side;
  const double h = 1.0 / (n - 1);
  const double ux = -std::sin(pose.angle), uy = std::cos(pose.angle);
  const double vx = std::cos(pose.angle), vy = std::sin(pose.angle);

  ViewOperator op;
  op.side = n;
  op.m = Mat::Zero(rays, static_cast<Eigen::Index>(n) * n);

  std::vector<double> cuts;
  for (int r = 0; r < rays; ++r) {
    const double s = ray_offset(r, rays, n) / (n - 1);  // unit-square offset
    const double px = s * vx, py = s * vy;

    double t0 = -1e30, t1 = 1e30;
    if (!clip_axis(px, ux, t0, t1) || !clip_axis(py, uy, t0, t1)) continue;
    if (!(t1 - t0 > 1e-13)) continue;

    // Cell-boundary crossings inside the clip window, then exact integration
    // of each bilinear patch with Simpson's rule (the weights are quadratic
    // in tau along a straight segment, so this is exact).
    cuts.clear();
    cuts.push_back(t0);
    for (int k = 1; k < n - 1; ++k) {
      const double gk = -0.5 + k * h;
      if (std::abs(ux) > 1e-15) {
        const double tc = (gk - px) / ux;
        if (tc > t0 + 1e-13 && tc < t1 - 1e-13) cuts.push_back(tc);
      }
      if (std::abs(uy) > 1e-15) {
        const double tc = (gk - py) / uy;
        if (tc > t0 + 1e-13 && tc < t1 - 1e-13) cuts.push_back(tc);
      }
    }
    cuts.push_back(t1);
    std::sort(cuts.begin(), cuts.end());

    auto row = op.m.row(r);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = cuts[i], b = cuts[i + 1];
      const double len = b - a;
      if (len < 1e-13) continue;
      const double tm = 0.5 * (a + b);
      const int ix = std::clamp(static_cast<int>(std::floor((px + tm * ux + 0.5) / h)), 0, n - 2);
      const int iy = std::clamp(static_cast<int>(std::floor((py + tm * uy + 0.5) / h)), 0, n - 2);
      const double x0 = -0.5 + ix * h, y0 = -0.5 + iy * h;

      double acc00 = 0.0, acc10 = 0.0, acc01 = 0.0, acc11 = 0.0;
      const double simpson[3] = {len / 6.0, 4.0 * len / 6.0, len / 6.0};
      const double taus[3] = {a, tm, b};
      for (int q = 0; q < 3; ++q) {
        const double xi = (px + taus[q] * ux - x0) / h;
        const double et = (py + taus[q] * uy - y0) / h;
        acc00 += simpson[q] * (1.0 - xi) * (1.0 - et);
        acc10 += simpson[q] * xi * (1.0 - et);
        acc01 += simpson[q] * (1.0 - xi) * et;
        acc11 += simpson[q] * xi * et;
      }
      row(iy * n + ix) += acc00;
      row(iy * n + ix + 1) += acc10;
      row((iy + 1) * n + ix) += acc01;
      row((iy + 1) * n + ix + 1) += acc11;
    }
  }
  op.m *= static_cast<double>(n - 1);  // unit-square lengths -> pixel units
  return op;
}

Vec render(const ObjectGrid& g, const ViewOperator& op) {
  if (op.side != g.side) throw std::invalid_argument("render: operator/grid side mismatch");
  return op.m * g.values;
}

void WorldConfig::validate() const {
  if (n < 8) throw std::invalid_argument("world: n must be >= 8");
  if (d < n) throw std::invalid_argument("world: d must be >= n");
  if (pose_count < 1) throw std::invalid_argument("world: pose_count must be >= 1");
  if (!(sigma_c > 0.0)) throw std::invalid_argument("world: sigma_c must be > 0");
  if (!(prior_sigma > 0.0)) throw std::invalid_argument("world: prior_sigma must be > 0");
  if (k_modes < 1) throw std::invalid_argument("world: k_modes must be >= 1");
  if (!(jitter >= 0.0)) throw std::invalid_argument("world: jitter must be >= 0");
  if (!std::isfinite(input_pose)) throw std::invalid_argument("world: input_pose must be finite");
}

namespace {

ObjectGrid draw_sprites(int n, Rng& rng) {
  // A dim compact core plus bright satellites at fixed, deliberately uneven
  // angles (rotated as a whole per draw). Off-centre mass makes neighbouring
  // projection angles decorrelate quickly, which keeps distinct poses well
  // separated in render space; the skewed angular skeleton has no mirror or
  // antipodal coincidences, so no pose pair collapses by symmetry.
  ObjectGrid g = ObjectGrid::zero(n);
  const double c = (n - 1) / 2.0;

  const double core_v = rng.uniform(0.25, 0.40);
  const double core_hw = rng.uniform(0.05, 0.08) * n;
  const double core_hh = rng.uniform(0.05, 0.08) * n;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (std::abs(x - c) <= core_hw && std::abs(y - c) <= core_hh)
        g.at(y, x) = std::max(g.at(y, x), core_v);

  static const double skeleton[5] = {0.0, 0.646, 1.414, 2.688, 4.590};
  const double base = rng.uniform(0.0, 2.0 * M_PI);
  for (int i = 0; i < 5; ++i) {
    const double ang = base + skeleton[i] + rng.uniform(-0.05, 0.05);
    const double rho = rng.uniform(0.30, 0.42) * n;
    const double v = rng.uniform(0.8, 1.0);
    const double cx = c + rho * std::cos(ang);
    const double cy = c + rho * std::sin(ang);
    const double rad = rng.uniform(0.09, 0.13) * n;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rad * rad)
          g.at(y, x) = std::max(g.at(y, x), v);
  }
  return g;
}

double occupancy(const ObjectGrid& g) {
  int lit = 0;
  for (int p = 0; p < g.values.size(); ++p)
    if (g.values[p] > 0.5) ++lit;
  return static_cast<double>(lit) / g.values.size();
}

}  // namespace

World make_world(std::uint64_t seed, const WorldConfig& cfg) {
  cfg.validate();
  World w;
  w.seed = seed;
  w.cfg = cfg;

  w.train_poses.reserve(static_cast<std::size_t>(cfg.pose_count));
  w.train_ops.reserve(static_cast<std::size_t>(cfg.pose_count));
  for (int j = 0; j < cfg.pose_count; ++j) {
    const Pose p(2.0 * M_PI * j / cfg.pose_count);
    w.train_poses.push_back(p);
    w.train_ops.push_back(view_operator(p, cfg.n, cfg.d));
  }
  w.input_pose = Pose(cfg.input_pose);
  w.input_op = view_operator(w.input_pose, cfg.n, cfg.d);

  // Redraw until the sprite coverage is usable; the attempt index keeps the
  // retry deterministic.
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 64) throw std::runtime_error("world: sprite drawing failed to converge");
    Rng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(attempt)));
    w.gt = draw_sprites(cfg.n, rng);
    const double occ = occupancy(w.gt);
    if (occ >= 0.05 && occ <= 0.6) break;
  }
  return w;
}

const ViewOperator& World::op_at(int pose_index) const {
  return train_ops.at(static_cast<std::size_t>(pose_index));
}

ViewOperator op_for(const World& w, const Pose& pose) {
  for (std::size_t j = 0; j < w.train_poses.size(); ++j)
    if (std::abs(w.train_poses[j].angle - pose.angle) < 1e-12) return w.train_ops[j];
  if (std::abs(w.input_pose.angle - pose.angle) < 1e-12) return w.input_op;
  return view_operator(pose, w.cfg.n, w.cfg.d);
}

Vec render_at(const World& w, const ObjectGrid& g, int pose_index) {
  return render(g, w.op_at(pose_index));
}

ObjectGrid jitter_variant(const World& w, const Pose& pose, int mode) {
  if (mode < 2 || mode > w.cfg.k_modes)
    throw std::invalid_argument("jitter_variant: mode outside [2, k_modes]");
  std::uint64_t pose_bits = 0;
  std::memcpy(&pose_bits, &pose.angle, sizeof(pose_bits));
  // Variants come in +/- pairs sharing one shift vector (modes 2,3 form pair
  // 0, modes 4,5 pair 1, ...), with the minus side at half strength. The
  // near-opposed pair keeps the mixture mean close to the true render while
  // leaving a deliberate residual offset for mode-seeking to exploit.
  const int pair = (mode - 2) / 2;
  const double strength = (mode % 2 == 0) ? 0.3 : -0.15;
  Rng rng(mix_seed(mix_seed(w.seed, 0x7A57E5),
                   mix_seed(pose_bits, static_cast<std::uint64_t>(pair))));
  const int jm = std::max(1, static_cast<int>(std::lround(w.cfg.jitter)));
  // Shift mostly along this pose's bin axis (cos a, sin a): a shift along
  // the ray direction (-sin a, cos a) is invisible to the projection, which
  // would collapse the variant onto the true render.
  const double side = rng.uniform() < 0.5 ? 0.0 : M_PI;
  const double phi = pose.angle + side + rng.uniform(-0.6, 0.6);
  const int sgn = strength < 0 ? -1 : 1;
  const int dx = sgn * static_cast<int>(std::lround(jm * std::cos(phi)));
  const int dy = sgn * static_cast<int>(std::lround(jm * std::sin(phi)));
  // Partial misregistration: the true sprite overlaid with a ghost of itself.
  // Keeps the distractor much nearer the true render than any other pose, as
  // a believable near-miss interpretation should be.
  const double b = std::abs(strength);
  ObjectGrid g = shift_grid(w.gt, dx, dy);
  g.values = b * g.values + (1.0 - b) * w.gt.values;
  return g;
}

GaussianMixture conditional_gmm(const World& w, const Pose& pose) {
  const ViewOperator op = op_for(w, pose);
  const double var = w.cfg.sigma_c * w.cfg.sigma_c;
  const int K = w.cfg.k_modes;

  std::vector<double> weights;
  std::vector<IsotropicGaussian> comps;
  comps.push_back({render(w.gt, op), var});
  if (K == 1) {
    weights.push_back(1.0);
  } else {
    weights.push_back(0.5);
    for (int m = 2; m <= K; ++m) {
      comps.push_back({render(jitter_variant(w, pose, m), op), var});
      weights.push_back(0.5 / (K - 1));
    }
  }
  return GaussianMixture(std::move(weights), std::move(comps));
}

GaussianMixture pose_marginal_gmm(const World& w, const Pose& pose) {
  const GaussianMixture cond = conditional_gmm(w, pose);
  std::vector<double> weights(static_cast<std::size_t>(cond.size()),
                              1.0 / cond.size());
  return GaussianMixture(std::move(weights), cond.components());
}

GaussianMixture prior_gmm(const World& w) {
  const double var = w.cfg.prior_sigma * w.cfg.prior_sigma;
  std::vector<double> weights;
  std::vector<IsotropicGaussian> comps;
  for (const auto& pose : w.train_poses) {
    GaussianMixture cond = conditional_gmm(w, pose);
    for (int k = 0; k < cond.size(); ++k) {
      weights.push_back(cond.weights()[static_cast<std::size_t>(k)] / w.train_poses.size());
      comps.push_back({cond.components()[static_cast<std::size_t>(k)].mean, var});
    }
  }
  return GaussianMixture(std::move(weights), std::move(comps));
}

std::pair<Vec, Pose> input_view(const World& w) {
  Rng rng(mix_seed(w.seed, 0x1CAFE));
  Vec y = render(w.gt, w.input_op);
  y += (w.cfg.sigma_c / 4.0) * rng.normal_vec(static_cast<int>(y.size()));
  return {y, w.input_pose};
}

namespace {
constexpr std::uint32_t kWorldMagic = 0x53444c57;  // "SDLW"

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void save_world(const World& w, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_world: cannot open " + path);
  put<std::uint32_t>(os, kWorldMagic);
  put<std::uint32_t>(os, 2);  // version
  put<std::uint32_t>(os, static_cast<std::uint32_t>(w.cfg.n));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(w.cfg.d));
  put<std::uint64_t>(os, w.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(w.cfg.pose_count));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(w.cfg.k_modes));
  put<double>(os, w.cfg.sigma_c);
  put<double>(os, w.cfg.jitter);
  put<double>(os, w.cfg.prior_sigma);
  put<double>(os, w.cfg.input_pose);
  for (int p = 0; p < w.gt.values.size(); ++p) put<double>(os, w.gt.values[p]);
  if (!os) throw std::runtime_error("save_world: write failed for " + path);
}

World load_world(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_world: cannot open " + path);
  if (get<std::uint32_t>(is) != kWorldMagic) throw std::runtime_error("load_world: bad magic");
  if (get<std::uint32_t>(is) != 2) throw std::runtime_error("load_world: unknown version");
  WorldConfig cfg;
  cfg.n = static_cast<int>(get<std::uint32_t>(is));
  cfg.d = static_cast<int>(get<std::uint32_t>(is));
  const std::uint64_t seed = get<std::uint64_t>(is);
  cfg.pose_count = static_cast<int>(get<std::uint32_t>(is));
  cfg.k_modes = static_cast<int>(get<std::uint32_t>(is));
  cfg.sigma_c = get<double>(is);
  cfg.jitter = get<double>(is);
  cfg.prior_sigma = get<double>(is);
  cfg.input_pose = get<double>(is);
  Vec flat(static_cast<Eigen::Index>(cfg.n) * cfg.n);
  for (int p = 0; p < flat.size(); ++p) flat[p] = get<double>(is);
  if (!is) throw std::runtime_error("load_world: truncated file " + path);

  World w = make_world(seed, cfg);
  w.gt = ObjectGrid::from_flat(cfg.n, std::move(flat));  // stored image wins
  return w;
}

void save_grid_csv(const ObjectGrid& g, const std::string& path, int d, std::uint64_t seed) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_grid_csv: cannot open " + path);
  os << g.side << "," << d << "," << seed << "\n";
  char buf[40];
  for (int y = 0; y < g.side; ++y) {
    for (int x = 0; x < g.side; ++x) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.at(y, x));
      os << buf << (x + 1 == g.side ? "\n" : ",");
    }
  }
}

ObjectGrid load_grid_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_grid_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_grid_csv: empty file");
  const int side = std::stoi(line.substr(0, line.find(',')));
  ObjectGrid g = ObjectGrid::zero(side);
  for (int y = 0; y < side; ++y) {
    if (!std::getline(is, line)) throw std::runtime_error("load_grid_csv: truncated grid");
    std::stringstream ss(line);
    std::string cell;
    for (int x = 0; x < side; ++x) {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("load_grid_csv: short row");
      g.at(y, x) = std::stod(cell);
    }
  }
  return g;
}

}  // namespace sdlab
