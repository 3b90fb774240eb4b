#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "wdro/rng.hpp"

using namespace wdro;

TEST_CASE("streams are pure functions of seed and counter", "[rng]") {
  RngStream a(42);
  RngStream b(42);
  for (int k = 0; k < 64; ++k) CHECK(a.next_u64() == b.next_u64());
  CHECK(RngStream(42).next_u64() != RngStream(43).next_u64());
}

TEST_CASE("substreams do not depend on parent position", "[rng]") {
  RngStream fresh(42);
  RngStream used(42);
  for (int k = 0; k < 100; ++k) used.next_u64();
  RngStream c1 = fresh.substream(7);
  RngStream c2 = used.substream(7);
  for (int k = 0; k < 32; ++k) CHECK(c1.next_u64() == c2.next_u64());

  CHECK(fresh.substream(1).next_u64() != fresh.substream(2).next_u64());
  CHECK(fresh.substream(1).substream(2).next_u64() != fresh.substream(2).substream(1).next_u64());
}

TEST_CASE("uniform01 stays inside (0, 1]", "[rng]") {
  RngStream rng(9);
  for (int k = 0; k < 10000; ++k) {
    const double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("normal draws have the right first moments", "[rng]") {
  RngStream rng(123);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}
