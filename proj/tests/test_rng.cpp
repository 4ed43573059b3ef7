#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "pcreg/rng.hpp"

using pcreg::CounterRng;

TEST_CASE("same seed reproduces the same stream") {
    CounterRng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
    CounterRng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i) equal += a.next_u64() == b.next_u64();
    REQUIRE(equal == 0);
}

TEST_CASE("forked streams are independent of the parent and each other") {
    CounterRng root(7);
    CounterRng a = root.fork("context");
    CounterRng b = root.fork("weights");
    CounterRng a2 = root.fork("context");

    REQUIRE(a.next_u64() != b.next_u64());
    // Re-forking with the same label restarts the same stream.
    a = root.fork("context");
    for (int i = 0; i < 10; ++i) REQUIRE(a.next_u64() == a2.next_u64());

    // Forking does not advance the parent.
    CounterRng fresh(7);
    REQUIRE(root.next_u64() == fresh.next_u64());
}

TEST_CASE("two-level fork differs from either single fork") {
    CounterRng root(3);
    REQUIRE(root.fork(5, 9).next_u64() != root.fork(5).next_u64());
    REQUIRE(root.fork(5, 9).next_u64() != root.fork(9).next_u64());
    REQUIRE(root.fork(5, 9).next_u64() != root.fork(9, 5).next_u64());
}

TEST_CASE("uniform stays in [0,1) with the right mean") {
    CounterRng rng(11);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    REQUIRE(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform(lo,hi) respects its bounds") {
    CounterRng rng(12);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-3.0, 5.0);
        REQUIRE(u >= -3.0);
        REQUIRE(u < 5.0);
    }
}

TEST_CASE("index(n) covers [0,n) roughly uniformly") {
    CounterRng rng(13);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = rng.index(7);
        REQUIRE(v < 7);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) {
        REQUIRE(c > n / 7 - 600);
        REQUIRE(c < n / 7 + 600);
    }
}

TEST_CASE("normal has unit variance and zero mean") {
    CounterRng rng(14);
    double sum = 0.0, sq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("permutation returns each element exactly once") {
    CounterRng rng(15);
    const auto p = rng.permutation(100);
    std::set<int> seen(p.begin(), p.end());
    REQUIRE(p.size() == 100);
    REQUIRE(seen.size() == 100);
    REQUIRE(*seen.begin() == 0);
    REQUIRE(*seen.rbegin() == 99);
}
