#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace agenther {

// -sum p ln p with 0 ln 0 = 0. std::invalid_argument on negative mass or a
// total other than 1 (+-1e-9).
double entropy_nats(const std::vector<double>& p);

// 1/2 KL(p||m) + 1/2 KL(q||m), m = (p + q) / 2, natural log.
double js_divergence_nats(const std::vector<double>& p, const std::vector<double>& q);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

// Hashed bag of lower-cased alphanumeric words, signed buckets, unit length.
class HashedBowEmbedder final : public Embedder {
 public:
  explicit HashedBowEmbedder(std::size_t dim = 256, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
  std::vector<double> embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

inline constexpr std::size_t kDefaultClusters = 18;
inline constexpr int kKMeansIterations = 100;
inline constexpr int kKMeansRestarts = 10;

struct GoalDistribution {
  std::vector<std::size_t> assignments;  // goal index -> cluster
  std::vector<double> probabilities;     // per cluster, sums to 1
  double entropy_nats = 0.0;
  std::size_t coverage = 0;              // clusters holding at least one goal
};

// k-means over unit vectors: 10 k-means++ starts derived from `seed`, at most 100
// Lloyd iterations each, lowest inertia kept, ties to the lowest cluster index.
// Fewer than k distinct points leave the remaining clusters empty.
std::vector<std::size_t> kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed);

GoalDistribution distribution_from(const std::vector<std::size_t>& assignments, std::size_t k);

// std::invalid_argument on an empty goal list or k = 0.
GoalDistribution cluster_goals(const std::vector<std::string>& goals, std::size_t k, const Embedder& embedder,
                               std::uint64_t seed);

struct GoalSetComparison {
  GoalDistribution a;
  GoalDistribution b;
  double jsd_nats = 0.0;
};

// Clusters both sets together so the two distributions share a support.
GoalSetComparison compare_goal_sets(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                    std::size_t k, const Embedder& embedder, std::uint64_t seed);

// items x categories vote counts; every row sums to the same n >= 2. When
// all votes fall in one category the chance term is 1 and kappa is reported
// as 1.
double fleiss_kappa(const std::vector<std::vector<int>>& counts);

struct NoiseBound {
  double lower_bound = 0.0;     // p * delta - (1 - p) * epsilon
  double max_harm_multiplier = 0.0;  // p / (1 - p)
  bool positive = false;        // epsilon < multiplier * delta
};

// std::invalid_argument unless 0 < p < 1.
NoiseBound noise_bound(double precision, double delta_perfect, double epsilon);

struct ReviewItem {
  std::string trajectory_id;
  std::string trajectory;  // rendered text
  std::string hindsight_prompt;
};

nlohmann::json to_json(const ReviewItem& r);

// Uniform sample without replacement, deterministic in `seed`. The export
// carries only the trajectory and hindsight prompt. std::invalid_argument
// when n exceeds the pool.
std::vector<ReviewItem> sample_for_review(const std::vector<ReviewItem>& accepted, std::size_t n,
                                          std::uint64_t seed);

}  // namespace agenther
