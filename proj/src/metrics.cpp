#include "craft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "craft/errors.hpp"

namespace craft {

Normalization normalization_of(const Aabb& box) {
  const double diag = box.size().norm();
  if (!(diag > 0.0) || !std::isfinite(diag)) throw DegenerateExtent("mesh has a zero-size bounding box");
  return {box.center(), 1.0 / diag};
}

TriangleMesh normalize_mesh(const TriangleMesh& mesh) {
  if (mesh.empty()) throw EmptyMesh("cannot normalize an empty mesh");
  const Normalization n = normalization_of(mesh.bounds());
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = n.apply(v);
  return out;
}

std::pair<TriangleMesh, TriangleMesh> normalize_pair(const TriangleMesh& a, const TriangleMesh& b) {
  return {normalize_mesh(a), normalize_mesh(b)};
}

namespace {

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class TriangleSampler {
 public:
  explicit TriangleSampler(const TriangleMesh& mesh) : mesh_(mesh) {
    cumulative_.reserve(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      total += mesh.triangle_area(t);
      cumulative_.push_back(total);
    }
    if (!(total > 0.0)) throw EmptyMesh("mesh has no surface area");
  }

  // Returns the triangle index and the point.
  std::pair<std::size_t, Vec3> draw(std::mt19937_64& rng) const {
    const double pick = unit(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), pick);
    const std::size_t t = std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
    const auto& f = mesh_.triangles[t];
    const double s = std::sqrt(unit(rng));
    const double r = unit(rng);
    const Vec3 p = (1.0 - s) * mesh_.vertices[f[0]] + s * (1.0 - r) * mesh_.vertices[f[1]] +
                   s * r * mesh_.vertices[f[2]];
    return {t, p};
  }

 private:
  const TriangleMesh& mesh_;
  std::vector<double> cumulative_;
};

}  // namespace

PointSample sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("sample count must be at least 1");
  TriangleSampler sampler(mesh);
  std::mt19937_64 rng(seed);
  PointSample out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.points.push_back(sampler.draw(rng).second);
  return out;
}

PointSample sample_exterior(const Assembly& assembly, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("sample count must be at least 1");
  const std::vector<NamedMesh> parts = assembly_meshes(assembly);
  TriangleMesh all;
  std::vector<std::size_t> owner;  // part of each triangle
  for (std::size_t i = 0; i < parts.size(); ++i) {
    all.append(parts[i].mesh);
    owner.resize(all.triangles.size(), i);
  }
  std::vector<Solid> solids;
  std::vector<Aabb> boxes;
  for (const PlacedPart& p : assembly.parts) {
    solids.push_back(p.solid());
    boxes.push_back(p.aabb());
  }
  TriangleSampler sampler(all);
  std::mt19937_64 rng(seed);
  PointSample out;
  out.points.reserve(n);
  const std::size_t cap = 50 * n;
  for (std::size_t draws = 0; draws < cap && out.points.size() < n; ++draws) {
    const auto [t, p] = sampler.draw(rng);
    bool inside = false;
    for (std::size_t j = 0; j < solids.size() && !inside; ++j) {
      if (j == owner[t] || !boxes[j].contains({p, p})) continue;
      inside = solids[j].sdf(p) < -1e-12;
    }
    if (!inside) out.points.push_back(p);
  }
  if (out.points.empty()) throw CannotReachCount("no exterior surface points found");
  return out;
}

// ---------------------------------------------------------------- k-d tree

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) build(0, static_cast<int>(points_.size()));
}

int KdTree::build(int lo, int hi) {
  constexpr int kLeaf = 8;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({lo, hi});
  if (hi - lo <= kLeaf) return id;
  Vec3 mn = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 mx = -mn;
  for (int i = lo; i < hi; ++i) {
    mn = mn.cwiseMin(points_[order_[i]]);
    mx = mx.cwiseMax(points_[order_[i]]);
  }
  int dim = 0;
  (mx - mn).maxCoeff(&dim);
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                   [&](std::size_t a, std::size_t b) { return points_[a][dim] < points_[b][dim]; });
  const double split = points_[order_[mid]][dim];
  const int left = build(lo, mid);
  const int right = build(mid, hi);
  Node& node = nodes_[id];
  node.dim = dim;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search(int id, const Vec3& q, std::size_t& best, double& best_d2) const {
  const Node& node = nodes_[id];
  if (node.dim < 0) {
    for (int i = node.lo; i < node.hi; ++i) {
      const double d2 = (points_[order_[i]] - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = order_[i];
      }
    }
    return;
  }
  const double diff = q[node.dim] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best, best_d2);
  if (diff * diff < best_d2) search(far, q, best, best_d2);
}

std::pair<std::size_t, double> KdTree::nearest(const Vec3& q) const {
  if (points_.empty()) throw Error("nearest neighbour query on an empty set");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, q, best, best_d2);
  return {best, std::sqrt(best_d2)};
}

// ---------------------------------------------------------------- metrics

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.empty() || to.empty()) throw Error("distance between empty point sets");
  std::vector<double> out(from.size());
  if (to.size() < kBruteForceBelow) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& p : to) best = std::min(best, (p - from[i]).squaredNorm());
      out[i] = std::sqrt(best);
    }
    return out;
  }
  const KdTree tree(to);
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = tree.nearest(from[i]).second;
  return out;
}

namespace {

struct Directed {
  double mean = 0.0;
  double max = 0.0;
  std::size_t within = 0;
};

Directed directed(const std::vector<double>& d, double threshold) {
  Directed out;
  double sum = 0.0;
  for (double x : d) {
    sum += x;
    out.max = std::max(out.max, x);
    if (x <= threshold) ++out.within;
  }
  // The mean never exceeds the maximum; the clamp only absorbs rounding.
  out.mean = std::min(sum / static_cast<double>(d.size()), out.max);
  return out;
}

double f_measure(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  const Directed ab = directed(nearest_distances(a, b), 0.0);
  const Directed ba = directed(nearest_distances(b, a), 0.0);
  return 0.5 * (ab.mean + ba.mean);
}

double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
  return std::max(directed(nearest_distances(a, b), 0.0).max, directed(nearest_distances(b, a), 0.0).max);
}

double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double threshold) {
  const Directed ab = directed(nearest_distances(a, b), threshold);
  const Directed ba = directed(nearest_distances(b, a), threshold);
  return f_measure(static_cast<double>(ab.within) / static_cast<double>(a.size()),
                   static_cast<double>(ba.within) / static_cast<double>(b.size()));
}

MetricsReport compare_samples(const PointSample& reference, const PointSample& generated, double threshold) {
  const Directed gr = directed(nearest_distances(generated.points, reference.points), threshold);
  const Directed rg = directed(nearest_distances(reference.points, generated.points), threshold);
  MetricsReport r;
  r.chamfer = 0.5 * (gr.mean + rg.mean);
  r.hausdorff = std::max(gr.max, rg.max);
  r.precision = static_cast<double>(gr.within) / static_cast<double>(generated.points.size());
  r.recall = static_cast<double>(rg.within) / static_cast<double>(reference.points.size());
  r.fscore = f_measure(r.precision, r.recall);
  r.threshold = threshold;
  r.n_reference = reference.points.size();
  r.n_generated = generated.points.size();
  return r;
}

MetricsReport compare_meshes(const TriangleMesh& reference, const TriangleMesh& generated,
                             const MetricsOptions& options) {
  const auto [ref, gen] = normalize_pair(reference, generated);
  PointSample a = sample_surface(ref, options.samples, options.seed);
  PointSample b = sample_surface(gen, options.samples, options.seed + 1);
  MetricsReport r = compare_samples(a, b, options.threshold);
  r.seed = options.seed;
  return r;
}

MetricsReport compare_to_assembly(const TriangleMesh& reference, const Assembly& generated,
                                  const MetricsOptions& options) {
  const TriangleMesh ref = normalize_mesh(reference);
  PointSample a = sample_surface(ref, options.samples, options.seed);
  PointSample b = sample_exterior(generated, options.samples, options.seed + 1);
  const Normalization n = normalization_of(combined_mesh(assembly_meshes(generated)).bounds());
  for (Vec3& p : b.points) p = n.apply(p);
  MetricsReport r = compare_samples(a, b, options.threshold);
  r.seed = options.seed;
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {
      {"chamfer", r.chamfer},
      {"hausdorff", r.hausdorff},
      {"fscore", r.fscore},
      {"precision", r.precision},
      {"recall", r.recall},
      {"threshold", r.threshold},
      {"n_reference", r.n_reference},
      {"n_generated", r.n_generated},
      {"seed", r.seed},
      {"chamfer_variant", "0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|), euclidean, not squared"},
      {"normalization", "per mesh: AABB centre at origin, AABB diagonal 1"},
      {"sampling", "area-weighted uniform, mt19937_64; reference seed, generated seed + 1"},
  };
}

}  // namespace craft
