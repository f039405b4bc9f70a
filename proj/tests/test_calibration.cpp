#include <cmath>
#include <vector>

#include "doctest.h"
#include "mlenit/calibration.hpp"
#include "mlenit/error.hpp"
#include "mlenit/rng.hpp"

using namespace mlenit;

namespace {

ScoredSet make_set(std::vector<double> scores, std::vector<int> labels) {
    return ScoredSet{std::move(scores), std::move(labels), "test", true};
}

}  // namespace

TEST_CASE("brier closed forms") {
    CHECK(brier(make_set({1.0, 1.0, 0.0}, {1, 1, 0})) == 0.0);
    CHECK(brier(make_set({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0})) == 0.25);
    CHECK(brier(make_set({0.8, 0.4}, {1, 0})) == doctest::Approx(0.1).epsilon(1e-12));
    ScoredSet raw = make_set({0.5}, {1});
    raw.probabilistic = false;
    CHECK_THROWS_AS(brier(raw), DataError);
}

TEST_CASE("reliability bins cover [0,1] with the last bin closed") {
    const ScoredSet s = make_set({0.0, 0.05, 0.95, 1.0}, {0, 0, 1, 1});
    const ReliabilityBins rb = reliability_bins(s, 10);
    REQUIRE(rb.bins.size() == 10);
    CHECK(rb.n == 4);
    CHECK(rb.bins.front().count == 2);  // 0.0 and 0.05
    CHECK(rb.bins.back().count == 2);   // 0.95 and 1.0 (closed at 1)
    std::size_t total = 0;
    for (const ReliabilityBin& b : rb.bins) total += b.count;
    CHECK(total == rb.n);
    CHECK_FALSE(rb.bins[4].mean_pred.has_value());  // empty bin stays unset
}

TEST_CASE("bin assignment respects literal edges under fp rounding") {
    // 0.1 + 0.2 lands just above 0.3; 0.3 itself must stay in [0.3, 0.4)
    const double above = 0.1 + 0.2;
    REQUIRE(above > 0.3);
    const ScoredSet s = make_set({0.3, above, std::nextafter(0.3, 0.0)}, {1, 1, 0});
    const ReliabilityBins rb = reliability_bins(s, 10);
    CHECK(rb.bins[3].count == 2);
    CHECK(rb.bins[2].count == 1);
}

TEST_CASE("ece hand values") {
    // all p = 0.9, all positive -> |1.0 - 0.9| = 0.1
    const ScoredSet s1 = make_set({0.9, 0.9, 0.9, 0.9}, {1, 1, 1, 1});
    CHECK(ece(reliability_bins(s1, 10)) == doctest::Approx(0.1).epsilon(1e-12));

    // count-weighted mixture: 3 samples at gap 0.2, 1 sample at gap 0.1
    const ScoredSet s2 = make_set({0.2, 0.2, 0.2, 0.9}, {0, 0, 0, 1});
    CHECK(ece(reliability_bins(s2, 10)) == doctest::Approx(0.175).epsilon(1e-12));

    // perfect per-bin calibration -> 0
    const ScoredSet s3 = make_set({0.25, 0.25, 0.25, 0.25}, {1, 0, 0, 0});
    CHECK(ece(reliability_bins(s3, 10)) == 0.0);
}

TEST_CASE("bin counts always sum to n on random sets") {
    Rng rng(3);
    for (int it = 0; it < 50; ++it) {
        const std::size_t n = 1 + rng.below(200);
        std::vector<double> p;
        std::vector<int> y;
        for (std::size_t i = 0; i < n; ++i) {
            p.push_back(rng.uniform());
            y.push_back(static_cast<int>(rng.below(2)));
        }
        const std::size_t n_bins = 1 + rng.below(20);
        const ReliabilityBins rb = reliability_bins(make_set(p, y), n_bins);
        REQUIRE(rb.bins.size() == n_bins);
        std::size_t total = 0;
        for (const ReliabilityBin& b : rb.bins) total += b.count;
        CHECK(total == n);
        const double e = ece(rb);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
    }
}

TEST_CASE("reliability bin guards") {
    CHECK_THROWS_AS(reliability_bins(make_set({0.5}, {1}), 0), UsageError);
    ScoredSet raw = make_set({0.5}, {1});
    raw.probabilistic = false;
    CHECK_THROWS_AS(reliability_bins(raw, 10), DataError);
}
