#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "craft/assembler.hpp"
#include "craft/mesh.hpp"

namespace craft {

inline constexpr std::size_t kDefaultSampleCount = 100000;
inline constexpr double kDefaultFscoreThreshold = 0.1;
inline constexpr std::uint64_t kDefaultSeed = 7;
inline constexpr std::size_t kBruteForceBelow = 2000;

struct PointSample {
  std::vector<Vec3> points;
  std::string source;
};

// p' = scale * (p - center): AABB centre to the origin, AABB diagonal to 1.
struct Normalization {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return scale * (p - center); }
};

Normalization normalization_of(const Aabb& box);  // throws DegenerateExtent
TriangleMesh normalize_mesh(const TriangleMesh& mesh);
std::pair<TriangleMesh, TriangleMesh> normalize_pair(const TriangleMesh& a, const TriangleMesh& b);

// Area-weighted uniform sampling with a seeded 64-bit Mersenne Twister.
PointSample sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

// Samples the exported part meshes and rejects points strictly inside any
// other part's solid (holes respected). Gives up after 50 * n draws and
// returns the points found so far; throws CannotReachCount when there are
// none.
PointSample sample_exterior(const Assembly& assembly, std::size_t n, std::uint64_t seed);

class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  // Index of and Euclidean distance to the nearest stored point.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;

 private:
  struct Node {
    int lo = 0;
    int hi = 0;
    int dim = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int lo, int hi);
  void search(int node, const Vec3& q, std::size_t& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

// Distance from every point of `from` to its nearest neighbour in `to`:
// k-d tree, or brute force when `to` has fewer than 2,000 points.
std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to);

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);
double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b);
double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double threshold = kDefaultFscoreThreshold);

struct MetricsReport {
  double chamfer = 0.0;
  double hausdorff = 0.0;
  double fscore = 0.0;
  double precision = 0.0;  // generated points near the reference
  double recall = 0.0;     // reference points near the generated surface
  double threshold = kDefaultFscoreThreshold;
  std::size_t n_reference = 0;
  std::size_t n_generated = 0;
  std::uint64_t seed = kDefaultSeed;
};

MetricsReport compare_samples(const PointSample& reference, const PointSample& generated,
                              double threshold = kDefaultFscoreThreshold);

struct MetricsOptions {
  std::size_t samples = kDefaultSampleCount;
  double threshold = kDefaultFscoreThreshold;
  std::uint64_t seed = kDefaultSeed;
};

// Both sides normalized independently, then sampled: the reference with
// `seed`, the generated side with `seed + 1`.
MetricsReport compare_meshes(const TriangleMesh& reference, const TriangleMesh& generated,
                             const MetricsOptions& options = {});
MetricsReport compare_to_assembly(const TriangleMesh& reference, const Assembly& generated,
                                  const MetricsOptions& options = {});

nlohmann::json to_json(const MetricsReport& report);

}  // namespace craft
