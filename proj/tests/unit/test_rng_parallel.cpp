#include <doctest.h>

#include <atomic>
#include <set>
#include <stdexcept>
#include <vector>

#include "mrpath/parallel.hpp"
#include "mrpath/rng.hpp"

using namespace mrpath;

TEST_SUITE("rng_parallel") {

TEST_CASE("derived streams are reproducible and key-sensitive") {
  CHECK(rng::derive(1, {2, 3}) == rng::derive(1, {2, 3}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (std::uint64_t a = 0; a < 20; ++a)
      for (std::uint64_t b = 0; b < 5; ++b) seen.insert(rng::derive(seed, {a, b}));
  CHECK(seen.size() == 20 * 20 * 5);
  CHECK(rng::derive(1, {2, 3}) != rng::derive(1, {3, 2}));
  CHECK(rng::derive(1, {2, 3}) != rng::derive(2, {1, 3}));
  CHECK(rng::hash_label("rs123") != rng::hash_label("rs124"));

  auto e1 = rng::make_engine(9, {rng::kEStep, 0});
  auto e2 = rng::make_engine(9, {rng::kEStep, 0});
  for (int i = 0; i < 100; ++i) CHECK(e1() == e2());
}

TEST_CASE("parallel_for visits every index exactly once") {
  for (std::size_t threads : {1u, 2u, 5u}) {
    set_worker_count(threads);
    for (std::size_t n : {0u, 1u, 7u, 1000u}) {
      std::vector<int> hits(n, 0);
      parallel_for(n, [&](std::size_t i) { hits[i] += 1; });
      for (int h : hits) CHECK(h == 1);
    }
  }
  set_worker_count(0);
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  set_worker_count(3);
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                    if (i == 57) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  set_worker_count(0);
}

TEST_CASE("worker count override") {
  set_worker_count(4);
  CHECK(worker_count() == 4);
  set_worker_count(0);
  CHECK(worker_count() >= 1);
}

}  // TEST_SUITE
