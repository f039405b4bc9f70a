#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "mlenit/rng.hpp"

using namespace mlenit;

TEST_CASE("identical seeds produce identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived sub-seeds differ across streams and from the parent") {
    std::set<std::uint64_t> seen;
    seen.insert(123);
    for (std::uint64_t s = 0; s < 100; ++s) {
        CHECK(seen.insert(derive_seed(123, s)).second);
    }
    CHECK(derive_seed(123, 0) != derive_seed(124, 0));
}

TEST_CASE("uniform stays in [0,1) and respects explicit bounds") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-2.5, 3.5);
        CHECK(v >= -2.5);
        CHECK(v < 3.5);
    }
}

TEST_CASE("below is unbiased enough and bounded") {
    Rng rng(11);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) {
        const std::size_t v = rng.below(10);
        REQUIRE(v < 10);
        ++counts[v];
    }
    for (int c : counts) {
        CHECK(c > 9000);
        CHECK(c < 11000);
    }
    for (int i = 0; i < 100; ++i) CHECK(rng.below(1) == 0);
}

TEST_CASE("normal moments match the standard normal") {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        ss += z * z;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(ss / n - mean * mean);
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(sd - 1.0) < 0.01);
    Rng rng2(5);
    (void)rng2;
    const double shifted = Rng(9).normal(10.0, 2.0);
    CHECK(std::isfinite(shifted));
}

TEST_CASE("permutation covers every index exactly once") {
    Rng rng(3);
    for (std::size_t n : {1u, 2u, 17u, 100u}) {
        std::vector<std::size_t> p = rng.permutation(n);
        std::sort(p.begin(), p.end());
        std::vector<std::size_t> expect(n);
        std::iota(expect.begin(), expect.end(), 0u);
        CHECK(p == expect);
    }
}

TEST_CASE("shuffle preserves the multiset of values") {
    Rng rng(19);
    std::vector<int> v{1, 1, 2, 3, 5, 8, 13, 21};
    std::vector<int> orig = v;
    rng.shuffle(v);
    std::sort(v.begin(), v.end());
    std::sort(orig.begin(), orig.end());
    CHECK(v == orig);
}

TEST_CASE("shuffles from distinct derived seeds differ") {
    std::vector<int> a(100), b(100);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    Rng ra(derive_seed(1, 0)), rb(derive_seed(1, 1));
    ra.shuffle(a);
    rb.shuffle(b);
    CHECK(a != b);
}
