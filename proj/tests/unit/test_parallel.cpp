#include <gtest/gtest.h>

#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "crowdloss/parallel.hpp"

using crowdloss::parallel_for;

TEST(ParallelFor, EachIndexOnce) {
  for (std::size_t threads : {1u, 2u, 7u}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, threads);
    for (int h : hits) ASSERT_EQ(h, 1);
  }
  parallel_for(0, [](std::size_t) { FAIL(); }, 4);
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
  for (std::size_t threads : {1u, 4u}) {
    try {
      parallel_for(
          50,
          [](std::size_t i) {
            if (i == 31 || i == 12 || i == 40) throw std::runtime_error(std::to_string(i));
          },
          threads);
      FAIL() << "no exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "12");
    }
  }
}

TEST(ThreadBudget, Environment) {
  const char* old = std::getenv("CROWDLOSS_THREADS");
  const std::string saved = old ? old : "";
  setenv("CROWDLOSS_THREADS", "3", 1);
  EXPECT_EQ(crowdloss::thread_budget(), 3u);
  setenv("CROWDLOSS_THREADS", "zero", 1);
  EXPECT_GE(crowdloss::thread_budget(), 1u);
  setenv("CROWDLOSS_THREADS", "0", 1);
  EXPECT_GE(crowdloss::thread_budget(), 1u);
  if (old) {
    setenv("CROWDLOSS_THREADS", saved.c_str(), 1);
  } else {
    unsetenv("CROWDLOSS_THREADS");
  }
}
