#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mob/barriers.hpp"
#include "mob/rng.hpp"
#include "oracles.hpp"

using namespace mob;

namespace {

std::vector<PairDistance> exact_loglinear(int n, double intercept, double beta) {
    std::vector<PairDistance> pairs;
    for (int i = 0; i < n; ++i) {
        PairDistance p;
        p.zone_i = "a" + std::to_string(i);
        p.zone_j = "b" + std::to_string(i);
        p.d_phys_km = 0.5 + 0.9 * i;
        p.d_embed = intercept + beta * std::log(p.d_phys_km);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace

TEST_CASE("exact log-linear data fits with zero residuals") {
    auto pairs = exact_loglinear(15, 0.1, 0.2);
    ResidualModel m = fit_residual_model(pairs);
    CHECK(m.beta == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(m.intercept == doctest::Approx(0.1).epsilon(1e-10));
    for (double r : m.residuals) CHECK(std::abs(r) < 1e-12);
}

TEST_CASE("one inflated pair owns the only positive residual") {
    auto pairs = exact_loglinear(15, 0.1, 0.2);
    pairs[7].d_embed += 0.3;
    ResidualModel m = fit_residual_model(pairs);
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (i == 7) CHECK(m.residuals[i] > 0.0);
        else CHECK(m.residuals[i] < 0.0 + 1e-12);
    }
}

TEST_CASE("beta matches the closed-form normal equations on a hand dataset") {
    std::vector<PairDistance> pairs;
    const double ds[] = {1.0, 2.0, 4.0, 8.0, 16.0};
    const double es[] = {0.30, 0.44, 0.49, 0.62, 0.70};
    for (int i = 0; i < 5; ++i) {
        PairDistance p;
        p.zone_i = "a" + std::to_string(i);
        p.zone_j = "b";
        p.d_phys_km = ds[i];
        p.d_embed = es[i];
        pairs.push_back(std::move(p));
    }
    std::vector<double> x, y;
    for (const auto& p : pairs) {
        x.push_back(std::log(p.d_phys_km));
        y.push_back(p.d_embed);
    }
    const auto want = oracle::ols_normal_equations(x, y);
    ResidualModel m = fit_residual_model(pairs);
    CHECK(m.beta == doctest::Approx(want.slope).epsilon(1e-12));
    CHECK(m.intercept == doctest::Approx(want.intercept).epsilon(1e-12));

    // OLS identities: residual sum zero, residuals orthogonal to log d.
    double sum = 0.0, dot = 0.0, mx = 0.0;
    for (double v : x) mx += v;
    mx /= x.size();
    for (size_t i = 0; i < pairs.size(); ++i) {
        sum += m.residuals[i];
        dot += m.residuals[i] * (x[i] - mx);
    }
    CHECK(std::abs(sum) < 1e-9);
    CHECK(std::abs(dot) < 1e-9);
}

TEST_CASE("degenerate fits are numeric errors") {
    CHECK_THROWS_AS(fit_residual_model(exact_loglinear(2, 0.1, 0.2)), NumericError);
    std::vector<PairDistance> same(5);
    for (int i = 0; i < 5; ++i) {
        same[i].zone_i = "a" + std::to_string(i);
        same[i].zone_j = "b";
        same[i].d_phys_km = 3.0;
        same[i].d_embed = 0.1 * i;
    }
    CHECK_THROWS_AS(fit_residual_model(same), NumericError);
    std::vector<PairDistance> zero = exact_loglinear(5, 0.1, 0.2);
    zero[0].d_phys_km = 0.0;
    CHECK_THROWS_AS(fit_residual_model(zero), NumericError);
}

TEST_CASE("a bin of 100 pairs at q=0.05 flags exactly 5") {
    Rng rng(42);
    std::vector<PairDistance> pairs;
    for (int i = 0; i < 100; ++i) {
        PairDistance p;
        p.zone_i = "a" + std::to_string(100 + i);
        p.zone_j = "b" + std::to_string(100 + i);
        p.d_phys_km = 3.0 + 0.009 * i;  // all in bin 4
        p.d_embed = 0.4 + 0.02 * std::log(p.d_phys_km) + rng.uniform(-0.1, 0.1);
        pairs.push_back(std::move(p));
    }
    // Plus a spread of pairs in other bins so the fit has support.
    auto extra = exact_loglinear(30, 0.4, 0.02);
    pairs.insert(pairs.end(), extra.begin(), extra.end());
    BarrierSet set = detect_barriers(pairs, {}, 0.05, BarrierMode::main);
    int bin4 = 0;
    for (const auto& f : set.flags)
        if (f.bin_index == 4) ++bin4;
    CHECK(bin4 == 5);

    // Flag counts are exactly ceil(q * n_bin) for every nonempty bin.
    std::map<int, int> bin_n, bin_flags;
    for (const auto& p : pairs) ++bin_n[bin_of_distance(p.d_phys_km)];
    for (const auto& f : set.flags) ++bin_flags[f.bin_index];
    for (const auto& [bin, n] : bin_n)
        CHECK(bin_flags[bin] == static_cast<int>(std::ceil(0.05 * n)));
}

TEST_CASE("equal residuals break ties lexicographically") {
    // Everything sits exactly on the fitted line, so all residuals tie at 0.
    auto pairs = exact_loglinear(30, 0.1, 0.2);
    for (int i = 0; i < 10; ++i) {
        PairDistance p;
        p.zone_i = "t" + std::to_string(i);
        p.zone_j = "u" + std::to_string(i);
        p.d_phys_km = 2.5;
        p.d_embed = 0.1 + 0.2 * std::log(2.5);
        pairs.push_back(std::move(p));
    }
    BarrierSet set = detect_barriers(pairs, {}, 0.2, BarrierMode::main);
    // Bin 3 holds a2 (d=2.3) plus t0..t9: ceil(0.2 * 11) = 3 flags, smallest
    // pair ids first.
    std::vector<std::string> bin3;
    for (const auto& f : set.flags)
        if (f.bin_index == 3) bin3.push_back(f.zone_i);
    REQUIRE(bin3.size() == 3);
    CHECK(bin3[0] == "a2");
    CHECK(bin3[1] == "t0");
    CHECK(bin3[2] == "t1");
}

TEST_CASE("excluded pairs never get flagged and leave the ranking") {
    auto pairs = exact_loglinear(40, 0.1, 0.2);
    pairs[5].d_embed += 1.0;   // would be the top residual
    pairs[11].d_embed += 0.9;  // second
    ExcludedPairSet excluded;
    excluded.insert(ZonePairKey(pairs[5].zone_i, pairs[5].zone_j));
    BarrierSet set = detect_barriers(pairs, excluded, 0.05, BarrierMode::main);
    for (const auto& f : set.flags) {
        CHECK(!(f.zone_i == pairs[5].zone_i && f.zone_j == pairs[5].zone_j));
    }
    CHECK(set.contains(pairs[11].zone_i, pairs[11].zone_j));
}

TEST_CASE("inflating a flagged pair further never unflags it") {
    Rng rng(9);
    std::vector<PairDistance> pairs;
    for (int i = 0; i < 60; ++i) {
        PairDistance p;
        p.zone_i = "a" + std::to_string(10 + i);
        p.zone_j = "b" + std::to_string(10 + i);
        p.d_phys_km = rng.uniform(0.5, 5.0);
        p.d_embed = 0.1 + 0.2 * std::log(p.d_phys_km) + rng.uniform(-0.05, 0.05);
        pairs.push_back(std::move(p));
    }
    BarrierSet before = detect_barriers(pairs, {}, 0.1, BarrierMode::main);
    REQUIRE(!before.flags.empty());
    const auto& target = before.flags[0];
    for (auto& p : pairs)
        if (p.zone_i == target.zone_i && p.zone_j == target.zone_j) p.d_embed += 0.5;
    BarrierSet after = detect_barriers(pairs, {}, 0.1, BarrierMode::main);
    CHECK(after.contains(target.zone_i, target.zone_j));
}

TEST_CASE("barrier csv round trip") {
    auto pairs = exact_loglinear(20, 0.1, 0.2);
    pairs[3].d_embed += 0.2;
    BarrierSet set = detect_barriers(pairs, {}, 0.25, BarrierMode::soft);
    const auto p = std::filesystem::temp_directory_path() / "mob_barriers_test.csv";
    write_barriers_csv(p, set);
    BarrierSet back = read_barriers_csv(p);
    REQUIRE(back.flags.size() == set.flags.size());
    CHECK(back.mode == BarrierMode::soft);
    for (size_t i = 0; i < set.flags.size(); ++i) {
        CHECK(back.flags[i].zone_i == set.flags[i].zone_i);
        CHECK(back.flags[i].bin_index == set.flags[i].bin_index);
        CHECK(back.flags[i].rank == set.flags[i].rank);
    }
}
