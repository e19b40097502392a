#include <doctest.h>

#include <cmath>
#include <vector>

#include "wgc/rng.hpp"

using namespace wgc;

TEST_CASE("same seed gives the same stream") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a();
        CHECK(x == b());
        differs |= x != c();
    }
    CHECK(differs);
}

TEST_CASE("derived seeds depend on every label and their order") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
    CHECK(derive_seed(1, {2}) != derive_seed(1, {2, 0}));
}

TEST_CASE("uniform stays in [0, 1) with the right mean") {
    Rng r(7);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        if (u < 0.0 || u >= 1.0) FAIL("uniform out of range: " << u);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below is unbiased over a small range") {
    Rng r(9);
    std::vector<int> counts(6, 0);
    const int n = 600000;
    for (int i = 0; i < n; ++i) ++counts[r.below(6)];
    for (int c : counts) CHECK(std::abs(c - n / 6) < 1500);
}

TEST_CASE("exponential mean and tail match the rate") {
    Rng r(11);
    const double rate = 0.1;
    const int n = 200000;
    double sum = 0.0;
    int beyond = 0;
    for (int i = 0; i < n; ++i) {
        double x = r.exponential(rate);
        if (x < 0.0) FAIL("negative exponential draw");
        sum += x;
        beyond += x > 10.0;
    }
    CHECK(sum / n == doctest::Approx(10.0).epsilon(0.02));
    CHECK(static_cast<double>(beyond) / n == doctest::Approx(std::exp(-1.0)).epsilon(0.02));
}
