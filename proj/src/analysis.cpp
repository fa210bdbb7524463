#include "agenther/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "agenther/simd.hpp"
#include "agenther/text.hpp"

namespace agenther {

namespace {

void check_distribution(const std::vector<double>& p, const char* what) {
  double sum = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0) throw std::invalid_argument(std::string(what) + ": negative or non-finite mass");
    sum += x;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": probabilities must sum to 1");
}

double kl_to_mixture(const std::vector<double>& p, const std::vector<double>& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / m[i]);
  }
  return s;
}

}  // namespace

double entropy_nats(const std::vector<double>& p) {
  check_distribution(p, "entropy");
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double js_divergence_nats(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("jsd: dimension mismatch");
  check_distribution(p, "jsd");
  check_distribution(q, "jsd");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  const double d = 0.5 * kl_to_mixture(p, m) + 0.5 * kl_to_mixture(q, m);
  return std::clamp(d, 0.0, std::log(2.0));
}

std::vector<double> HashedBowEmbedder::embed(std::string_view s) const {
  std::vector<double> v(dim_, 0.0);
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    const std::uint64_t h = text::fnv1a64(word, text::splitmix64(seed_) ^ 0xcbf29ce484222325ULL);
    v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    word.clear();
  };
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  const auto& k = simd::active_kernels();
  const double norm2 = k.dot(v.data(), v.data(), dim_);
  if (norm2 > 0.0) {
    std::vector<double> scaled(dim_, 0.0);
    k.axpy(1.0 / std::sqrt(norm2), v.data(), scaled.data(), dim_);
    return scaled;
  }
  return v;
}

namespace {

struct KMeansRun {
  std::vector<std::size_t> assign;
  double inertia = 0.0;
};

KMeansRun kmeans_once(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  const auto& ker = simd::active_kernels();
  std::mt19937_64 rng(text::splitmix64(seed));

  // k-means++ seeding. Once every point coincides with a center, no further
  // centers are drawn.
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng() % n]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = ker.squared_l2(points[i].data(), centers[0].data(), dim);
  while (centers.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    if (!(total > 0.0)) break;
    const double target = text::unit_interval(rng()) * total;
    double acc = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (d2[i] > 0.0 && acc > target) {
        pick = i;
        break;
      }
    }
    while (d2[pick] == 0.0) --pick;  // rounding at the tail
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], ker.squared_l2(points[i].data(), centers.back().data(), dim));
    }
  }

  std::vector<std::size_t> assign(n, std::numeric_limits<std::size_t>::max());
  for (int iter = 0; iter < kKMeansIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = ker.squared_l2(points[i].data(), centers[0].data(), dim);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = ker.squared_l2(points[i].data(), centers[c].data(), dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ker.axpy(1.0, points[i].data(), sums[assign[i]].data(), dim);
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) continue;  // keep the old center
      std::fill(centers[c].begin(), centers[c].end(), 0.0);
      ker.axpy(1.0 / static_cast<double>(counts[c]), sums[c].data(), centers[c].data(), dim);
    }
  }
  KMeansRun run{std::move(assign), 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    run.inertia += ker.squared_l2(points[i].data(), centers[run.assign[i]].data(), dim);
  }
  return run;
}

}  // namespace

// Lloyd's algorithm from several k-means++ starts; the lowest inertia wins,
// earliest start on ties.
std::vector<std::size_t> kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (points.empty()) throw std::invalid_argument("kmeans: no points");
  KMeansRun best;
  for (int r = 0; r < kKMeansRestarts; ++r) {
    KMeansRun run = kmeans_once(points, k, seed + static_cast<std::uint64_t>(r) * 0x9e3779b97f4a7c15ULL);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best.assign;
}

GoalDistribution distribution_from(const std::vector<std::size_t>& assignments, std::size_t k) {
  GoalDistribution d;
  d.assignments = assignments;
  d.probabilities.assign(k, 0.0);
  if (assignments.empty()) return d;
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t a : assignments) ++counts.at(a);
  for (std::size_t c = 0; c < k; ++c) {
    d.probabilities[c] = static_cast<double>(counts[c]) / static_cast<double>(assignments.size());
    if (counts[c]) ++d.coverage;
  }
  d.entropy_nats = entropy_nats(d.probabilities);
  return d;
}

GoalDistribution cluster_goals(const std::vector<std::string>& goals, std::size_t k, const Embedder& embedder,
                               std::uint64_t seed) {
  if (goals.empty()) throw std::invalid_argument("cluster_goals: empty goal list");
  if (k == 0) throw std::invalid_argument("cluster_goals: k must be >= 1");
  std::vector<std::vector<double>> points;
  points.reserve(goals.size());
  for (const auto& g : goals) points.push_back(embedder.embed(g));
  return distribution_from(kmeans(points, k, seed), k);
}

GoalSetComparison compare_goal_sets(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                    std::size_t k, const Embedder& embedder, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw std::invalid_argument("compare_goal_sets: empty goal list");
  std::vector<std::string> all(a);
  all.insert(all.end(), b.begin(), b.end());
  const GoalDistribution joint = cluster_goals(all, k, embedder, seed);
  GoalSetComparison out;
  out.a = distribution_from({joint.assignments.begin(), joint.assignments.begin() + static_cast<std::ptrdiff_t>(a.size())}, k);
  out.b = distribution_from({joint.assignments.begin() + static_cast<std::ptrdiff_t>(a.size()), joint.assignments.end()}, k);
  out.jsd_nats = js_divergence_nats(out.a.probabilities, out.b.probabilities);
  return out;
}

double fleiss_kappa(const std::vector<std::vector<int>>& counts) {
  if (counts.empty()) throw std::invalid_argument("fleiss_kappa: no items");
  const std::size_t cats = counts.front().size();
  if (cats == 0) throw std::invalid_argument("fleiss_kappa: no categories");
  long long n = -1;
  for (const auto& row : counts) {
    if (row.size() != cats) throw std::invalid_argument("fleiss_kappa: ragged matrix");
    long long s = 0;
    for (int c : row) {
      if (c < 0) throw std::invalid_argument("fleiss_kappa: negative count");
      s += c;
    }
    if (n < 0) n = s;
    if (s != n) throw std::invalid_argument("fleiss_kappa: rows must have the same number of raters");
  }
  if (n < 2) throw std::invalid_argument("fleiss_kappa: need at least 2 raters per item");
  const double N = static_cast<double>(counts.size());
  const double nn = static_cast<double>(n);
  double p_bar = 0.0;
  std::vector<double> col(cats, 0.0);
  for (const auto& row : counts) {
    double sq = 0.0;
    for (std::size_t j = 0; j < cats; ++j) {
      sq += static_cast<double>(row[j]) * row[j];
      col[j] += row[j];
    }
    p_bar += (sq - nn) / (nn * (nn - 1.0));
  }
  p_bar /= N;
  double pe = 0.0;
  for (double c : col) {
    const double pj = c / (N * nn);
    pe += pj * pj;
  }
  if (pe >= 1.0) return 1.0;  // every vote in one category
  return (p_bar - pe) / (1.0 - pe);
}

NoiseBound noise_bound(double p, double delta_perfect, double epsilon) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("precision must be in (0, 1)");
  if (!std::isfinite(delta_perfect) || !std::isfinite(epsilon)) throw std::invalid_argument("non-finite input");
  NoiseBound b;
  b.lower_bound = p * delta_perfect - (1.0 - p) * epsilon;
  b.max_harm_multiplier = p / (1.0 - p);
  b.positive = epsilon < b.max_harm_multiplier * delta_perfect;
  return b;
}

nlohmann::json to_json(const ReviewItem& r) {
  return {{"trajectory_id", r.trajectory_id}, {"trajectory", r.trajectory}, {"hindsight_prompt", r.hindsight_prompt}};
}

std::vector<ReviewItem> sample_for_review(const std::vector<ReviewItem>& accepted, std::size_t n,
                                          std::uint64_t seed) {
  if (n > accepted.size()) {
    throw std::invalid_argument("cannot sample " + std::to_string(n) + " of " + std::to_string(accepted.size()) +
                                " accepted relabelings");
  }
  std::vector<std::size_t> idx(accepted.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(text::splitmix64(seed));
  // Partial Fisher-Yates with our own index draw, so the sample does not
  // depend on the standard library's distribution code.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<ReviewItem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(accepted[idx[i]]);
  return out;
}

}  // namespace agenther
