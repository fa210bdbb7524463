#include "doctest.h"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <random>
#include <set>

#include "agenther/analysis.hpp"
#include "agenther/synthetic.hpp"

using namespace agenther;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

double reference_jsd(const std::vector<double>& p, const std::vector<double>& q) {
  big total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const big m = (big(p[i]) + big(q[i])) / 2;
    if (p[i] > 0) total += big(p[i]) * log(big(p[i]) / m) / 2;
    if (q[i] > 0) total += big(q[i]) * log(big(q[i]) / m) / 2;
  }
  return static_cast<double>(total);
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(k);
  double s = 0;
  for (auto& x : p) s += (x = u(rng));
  for (auto& x : p) x /= s;
  return p;
}

}  // namespace

TEST_CASE("entropy") {
  CHECK(entropy_nats({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(entropy_nats({1.0, 0.0, 0.0}) == 0.0);
  const double hand = -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25));
  CHECK(entropy_nats({0.5, 0.25, 0.25}) == doctest::Approx(hand).epsilon(1e-14));
  CHECK(entropy_nats({0.5, 0.25, 0.25}) == doctest::Approx(1.039721).epsilon(1e-6));
  for (int k = 2; k <= 32; ++k) {
    CHECK(std::abs(entropy_nats(std::vector<double>(k, 1.0 / k)) - std::log(static_cast<double>(k))) <= 1e-12);
  }
  CHECK_THROWS_AS(entropy_nats({0.5, -0.1, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(entropy_nats({0.5, 0.4}), std::invalid_argument);
}

TEST_CASE("entropy is at most ln of the support") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 2 + rng() % 20;
    CHECK(entropy_nats(random_distribution(rng, k)) <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("jensen shannon divergence") {
  CHECK(js_divergence_nats({0.3, 0.7}, {0.3, 0.7}) == 0.0);
  CHECK(std::abs(js_divergence_nats({1, 0}, {0, 1}) - std::log(2.0)) <= 1e-12);
  CHECK(std::abs(js_divergence_nats({0.5, 0.5, 0, 0}, {0, 0, 0.5, 0.5}) - std::log(2.0)) <= 1e-12);
  const double ref = reference_jsd({0.8, 0.2}, {0.2, 0.8});
  CHECK(std::abs(js_divergence_nats({0.8, 0.2}, {0.2, 0.8}) - ref) <= 1e-14);
  CHECK(ref == doctest::Approx(0.192745).epsilon(1e-6));
  CHECK_THROWS_AS(js_divergence_nats({1.0}, {0.5, 0.5}), std::invalid_argument);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_distribution(rng, 6);
    const auto q = random_distribution(rng, 6);
    const double d = js_divergence_nats(p, q);
    CHECK(d == js_divergence_nats(q, p));
    CHECK(d > 0.0);
    CHECK(d <= std::log(2.0));
    CHECK(std::abs(d - reference_jsd(p, q)) <= 1e-13);
  }
}

TEST_CASE("hashed embedder") {
  HashedBowEmbedder e(64, 3);
  const auto v = e.embed("Find the cheapest hotel in Lisbon");
  CHECK(v.size() == 64);
  double n = 0;
  for (double x : v) n += x * x;
  CHECK(n == doctest::Approx(1.0));
  CHECK(e.embed("find the CHEAPEST hotel, in lisbon!") == v);
  CHECK(e.embed("") == std::vector<double>(64, 0.0));
}

TEST_CASE("clustering coverage") {
  HashedBowEmbedder e;
  const auto one = cluster_goals({"Report the price."}, 18, e, 1);
  CHECK(one.coverage == 1);
  CHECK(one.entropy_nats == 0.0);

  std::vector<std::string> goals;
  const auto& templates = canonical_goal_templates();
  for (int rep = 0; rep < 20; ++rep) goals.insert(goals.end(), templates.begin(), templates.end());
  const auto d = cluster_goals(goals, 18, e, 7);
  CHECK(d.coverage == 14);
  CHECK(d.entropy_nats == doctest::Approx(std::log(14.0)).epsilon(1e-12));
  CHECK(cluster_goals(goals, 18, e, 7).assignments == d.assignments);
  CHECK_THROWS_AS(cluster_goals({}, 18, e, 1), std::invalid_argument);
  CHECK_THROWS_AS(cluster_goals(goals, 0, e, 1), std::invalid_argument);
}

TEST_CASE("synthetic hindsight goals fill fourteen clusters") {
  HashedBowEmbedder e;
  const auto c = generate_corpus(1500, 5);
  std::vector<std::string> goals;
  for (const auto& t : c.tasks) goals.push_back(t.ground_truth_goal);
  std::set<std::string> used;
  for (const auto& t : c.tasks) used.insert(t.template_id);
  CHECK(used.size() == 14);
  const auto d = cluster_goals(goals, 18, e, 11);
  CHECK(d.coverage >= 12);
  CHECK(d.coverage <= 18);
}

TEST_CASE("goal set comparison") {
  HashedBowEmbedder e;
  const std::vector<std::string> a = {"report the hotel rating", "report the hotel rate", "find the hotel"};
  const auto same = compare_goal_sets(a, a, 4, e, 3);
  CHECK(same.jsd_nats == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<std::string> b = {"laptop battery life", "laptop battery hours", "battery of laptop"};
  const auto diff = compare_goal_sets(a, b, 2, e, 3);
  CHECK(diff.jsd_nats == doctest::Approx(std::log(2.0)));
}

TEST_CASE("fleiss kappa fixtures") {
  CHECK(std::abs(fleiss_kappa({{3, 0}, {1, 2}}) - 0.25) <= 1e-12);
  CHECK(fleiss_kappa({{3, 0}, {3, 0}, {3, 0}}) == 1.0);
  CHECK(fleiss_kappa({{0, 3}, {3, 0}, {0, 3}}) == 1.0);
  CHECK_THROWS_AS(fleiss_kappa({{3, 0}, {1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fleiss_kappa({{1, 0}, {0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fleiss_kappa({{3, 0}, {1, 1, 1}}), std::invalid_argument);
}

TEST_CASE("fleiss kappa of random votes is near zero") {
  std::mt19937_64 rng(99);
  std::vector<std::vector<int>> m(4000, std::vector<int>(3, 0));
  for (auto& row : m) {
    for (int r = 0; r < 5; ++r) ++row[rng() % 3];
  }
  CHECK(std::abs(fleiss_kappa(m)) <= 0.05);
}

TEST_CASE("fleiss kappa ignores category order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<int>> m(30, std::vector<int>(4, 0));
    for (auto& row : m) {
      for (int r = 0; r < 6; ++r) ++row[rng() % (1 + trial % 4)];
    }
    std::vector<int> perm = {0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    auto p = m;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (int j = 0; j < 4; ++j) p[i][perm[j]] = m[i][j];
    }
    CHECK(fleiss_kappa(p) == doctest::Approx(fleiss_kappa(m)).epsilon(1e-12));
  }
}

TEST_CASE("noise bound") {
  const auto a = noise_bound(0.977, 0.089, 0.0);
  CHECK(a.max_harm_multiplier == doctest::Approx(42.478).epsilon(1e-4));
  CHECK(std::lround(a.max_harm_multiplier) == 42);
  CHECK(std::lround(noise_bound(0.941, 1, 0).max_harm_multiplier) == 16);
  CHECK(noise_bound(0.941, 1, 0).max_harm_multiplier == doctest::Approx(15.949).epsilon(1e-4));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3g", 42 * 0.089);
  CHECK(std::string(buf) == "3.74");
  CHECK(noise_bound(0.5, 1, 0).max_harm_multiplier == 1.0);

  const auto b = noise_bound(0.9, 0.1, 0.5);
  CHECK(b.lower_bound == doctest::Approx(0.9 * 0.1 - 0.1 * 0.5));
  CHECK(b.positive);
  CHECK_FALSE(noise_bound(0.9, 0.1, 1.0).positive);
  CHECK_THROWS_AS(noise_bound(1.0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(noise_bound(0.0, 1, 1), std::invalid_argument);

  double prev = 0;
  for (int i = 1; i < 100; ++i) {
    const double m = noise_bound(i / 100.0, 1, 0).max_harm_multiplier;
    CHECK(m > prev);
    prev = m;
  }
}

TEST_CASE("review sampling") {
  std::vector<ReviewItem> pool;
  for (int i = 0; i < 2197; ++i) pool.push_back({"t" + std::to_string(i), "traj", "goal " + std::to_string(i)});
  const auto a = sample_for_review(pool, 200, 42);
  const auto b = sample_for_review(pool, 200, 42);
  CHECK(a.size() == 200);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].trajectory_id == b[i].trajectory_id);
    ids.insert(a[i].trajectory_id);
  }
  CHECK(ids.size() == 200);
  CHECK(sample_for_review(pool, 200, 43)[0].trajectory_id != a[0].trajectory_id);

  const auto all = sample_for_review(pool, pool.size(), 1);
  std::set<std::string> all_ids;
  for (const auto& r : all) all_ids.insert(r.trajectory_id);
  CHECK(all_ids.size() == pool.size());
  CHECK_THROWS_AS(sample_for_review(pool, pool.size() + 1, 1), std::invalid_argument);

  const auto j = to_json(a[0]);
  CHECK_FALSE(j.contains("goal"));
  CHECK(j.contains("trajectory"));
  CHECK(j.contains("hindsight_prompt"));
}
