#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "chiplet/parallel.hpp"
#include "chiplet/rng.hpp"

using namespace chiplet;

TEST(Rng, DerivedKeysDependOnSeedAndPathOrder) {
  EXPECT_EQ(derive_key(7, {1, 2}), derive_key(7, {1, 2}));
  EXPECT_NE(derive_key(7, {1, 2}), derive_key(8, {1, 2}));
  EXPECT_NE(derive_key(7, {1, 2}), derive_key(7, {2, 1}));
  EXPECT_NE(derive_key(7, {1}), derive_key(7, {1, 0}));
  EXPECT_NE(derive_key(7, {}), derive_key(7, {0}));
}

TEST(Rng, StreamTagsAreDistinct) {
  const std::set<std::uint64_t> tags = {stream::kFrequency, stream::kNoise,        stream::kLink,
                                        stream::kShuffle,   stream::kChipletBatch, stream::kMonoBatch,
                                        stream::kCircuit,   stream::kSynth,        stream::kAssembly};
  EXPECT_EQ(tags.size(), 9u);
}

TEST(Rng, DrawsAreAPureFunctionOfKeyAndCounter) {
  CounterRng a(42, {1});
  CounterRng b(42, {1});
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  CounterRng c(42, {2});
  EXPECT_NE(CounterRng(42, {1}).next_u64(), c.next_u64());
}

TEST(Rng, UniformMomentsMatchTheory) {
  CounterRng rng(3, {});
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(var, 1.0 / 12, 0.002);
}

TEST(Rng, NormalMomentsMatchTheory) {
  CounterRng rng(11, {5});
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 0.1);
}

TEST(Rng, BelowIsUniformOverItsRange) {
  CounterRng rng(9, {});
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto x = rng.below(7);
    ASSERT_LT(x, 7u);
    ++counts[x];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.5);  // 6 dof, p ~ 0.001
}

TEST(Rng, ShuffleIsADeterministicPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto a = v, b = v;
  CounterRng(1, {2}).shuffle(a);
  CounterRng(1, {2}).shuffle(b);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, v);
  std::sort(a.begin(), a.end());
  EXPECT_EQ(a, v);
}

TEST(Rng, ShuffleVisitsEveryPermutationOfThree) {
  std::set<std::vector<int>> seen;
  for (std::uint64_t k = 0; k < 200; ++k) {
    std::vector<int> v{0, 1, 2};
    CounterRng(k, {}).shuffle(v);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Parallel, EveryIndexRunsExactlyOnce) {
  for (unsigned workers : {1u, 2u, 3u, 8u, 64u}) {
    for (std::size_t n : {0u, 1u, 5u, 97u}) {
      std::vector<std::atomic<int>> hits(n);
      parallel_chunks(n, workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) ++hits[i];
      });
      for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(hits[i].load(), 1) << "workers " << workers << " n " << n;
    }
  }
}

TEST(Parallel, WorkerExceptionsPropagate) {
  EXPECT_THROW(parallel_chunks(10, 4,
                               [](std::size_t b, std::size_t) {
                                 if (b > 0) throw std::runtime_error("boom");
                               }),
               std::runtime_error);
}

TEST(Parallel, ZeroMeansHardwareConcurrency) {
  EXPECT_GE(resolve_workers(0), 1u);
  EXPECT_EQ(resolve_workers(5), 5u);
}
