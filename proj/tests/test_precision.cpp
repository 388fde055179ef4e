#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "foot_ulcer.hpp"
#include "pmstab/precision.hpp"

using namespace pmstab;

TEST_CASE("uncertainty_interval: closed-form cases") {
    // invlogit(0 -/+ 1.959964 * 0.1)
    const auto [lo, hi] = uncertainty_interval(0.5, 0.01);
    CHECK(lo == doctest::Approx(num::invlogit(-1.959964 * 0.1)).epsilon(1e-9));
    CHECK(hi == doctest::Approx(num::invlogit(1.959964 * 0.1)).epsilon(1e-9));
    CHECK(lo == doctest::Approx(0.451153).epsilon(1e-5));
    CHECK(hi == doctest::Approx(0.548847).epsilon(1e-5));
    CHECK(hi - lo == doctest::Approx(0.0976942).epsilon(1e-5));

    const auto [dlo, dhi] = uncertainty_interval(0.37, 0.0);
    CHECK(dlo == 0.37);
    CHECK(dhi == 0.37);

    CHECK_THROWS_AS(uncertainty_interval(0.0, 0.1), DomainError);
    CHECK_THROWS_AS(uncertainty_interval(0.5, -0.1), DomainError);
}

TEST_CASE("interval endpoints widen strictly with v") {
    double prev = 0.0;
    for (double v : {0.001, 0.01, 0.1, 0.5, 2.0}) {
        const double w = interval_width(0.3, v);
        CHECK(w > prev);
        prev = w;
    }
}

TEST_CASE("width_to_variance inverts the interval width") {
    // forward reference point: width at (0.13, v = 0.103)
    const double w13 = interval_width(0.13, 0.103);
    CHECK(w13 == doctest::Approx(0.1451432).epsilon(1e-5));
    CHECK(width_to_variance(0.13, w13) == doctest::Approx(0.103).epsilon(1e-8));

    CHECK(width_to_variance(0.5, 0.0976942) == doctest::Approx(0.01).epsilon(1e-4));

    // round trip across a grid of (p, v)
    for (double p : {0.02, 0.13, 0.35, 0.5, 0.82}) {
        for (double v : {1e-6, 1e-3, 0.05, 0.4, 3.0}) {
            const double w = interval_width(p, v);
            CHECK(width_to_variance(p, w) == doctest::Approx(v).epsilon(1e-8));
        }
    }

    // width targets shrink toward zero variance
    CHECK(width_to_variance(0.3, 1e-7) < 1e-10);

    CHECK_THROWS_AS(width_to_variance(0.3, 1.0), Unachievable);
    CHECK_THROWS_AS(width_to_variance(0.3, 0.0), DomainError);
}

TEST_CASE("make_band derives a consistent variance ceiling") {
    const BandTarget b = make_band(0.13, 0.15);
    CHECK(interval_width(0.13, b.max_var) == doctest::Approx(0.15).epsilon(1e-9));
}

TEST_CASE("option_a on the example population at n = 453") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const OptionAResult res = option_a(m, pop, info, 453);

    REQUIRE(res.records.size() == pop.n());
    // frozen values from the exact cell expectation
    CHECK(res.width_summary.mean == doctest::Approx(0.0837004554).epsilon(1e-7));
    CHECK(res.width_summary.min == doctest::Approx(0.0322358358).epsilon(1e-7));
    CHECK(res.width_summary.max == doctest::Approx(0.4121245846).epsilon(1e-7));

    for (const auto& r : res.records) {
        CHECK(r.lower < r.upper);
        CHECK(r.true_risk > r.lower);
        CHECK(r.true_risk < r.upper);
        CHECK(r.width == doctest::Approx(r.upper - r.lower).epsilon(1e-12));
        CHECK(r.var_logit > 0.0);
    }

    // the (1,1,1) pattern sits at rows 563..583
    const auto& rare = res.records[570];
    CHECK(rare.true_risk == doctest::Approx(0.487503).epsilon(1e-5));
    CHECK(rare.lower == doctest::Approx(0.2835641).epsilon(1e-5));
    CHECK(rare.upper == doctest::Approx(0.6956886).epsilon(1e-5));
}

TEST_CASE("option_a widths are non-increasing in n, row by row") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const OptionAResult small = option_a(m, pop, info, 453);
    const OptionAResult large = option_a(m, pop, info, 2000);
    for (std::size_t i = 0; i < pop.n(); ++i) {
        CHECK(large.records[i].width <= small.records[i].width + 1e-15);
    }
    const OptionAResult huge = option_a(m, pop, info, 1000000000000ULL);
    for (const auto& r : huge.records) CHECK(r.width < 1e-3);
}

TEST_CASE("option_b: required n for uniform width targets") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);

    const OptionBResult uniform = option_b_uniform_width(m, pop, info, 0.1);
    CHECK(uniform.required_n == 8639); // frozen from the exact cell expectation
    // the requirement is driven by the (1,1,1) pattern
    long long max_n = 0;
    std::size_t argmax = 0;
    for (std::size_t i = 0; i < uniform.per_row_n.size(); ++i) {
        if (uniform.per_row_n[i] > max_n) {
            max_n = uniform.per_row_n[i];
            argmax = i;
        }
    }
    CHECK(pop.value(argmax, 0) == 1.0);
    CHECK(pop.value(argmax, 1) == 1.0);
    CHECK(pop.value(argmax, 2) == 1.0);
}

TEST_CASE("option_b: a width target for one risk group") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);

    const std::vector<double> x001{0, 0, 1};
    const double p001 = risk(m, x001);
    const OptionBResult res = option_b(m, pop, info, {make_band(p001, 0.15)});
    // rows 982..1001 carry the (0,0,1) pattern
    CHECK(res.per_row_n[990] == 1166); // frozen: ceil(121.0457 / 0.1038289)
    CHECK(res.band_of_row[990] == 0);

    // nearest-band assignment: risk 0.1347 is nearer 0.16 than 0.10
    const std::vector<BandTarget> two{make_band(0.10, 0.15), make_band(0.16, 0.15)};
    const OptionBResult assigned = option_b(m, pop, info, two);
    CHECK(assigned.band_of_row[990] == 1);
    // a tie between equally near grid points goes to the lower band
    Dataset mid({VariableSpec::binary("x")}, 2);
    mid.set_value(1, 0, 1.0);
    CoreModel fair{0.0, 1.0, {1e-9}, {"x"}}; // risks 0.5 and 0.5+eps
    const UnitInformation midinfo = unit_information(fair, mid);
    const std::vector<BandTarget> tie{make_band(0.25, 0.15), make_band(0.75, 0.15)};
    const OptionBResult tied = option_b(fair, mid, midinfo, tie);
    CHECK(tied.band_of_row[0] == 0); // row risk exactly 0.5, both bands 0.25 away
}

TEST_CASE("option_b: per-row n of 1 when the ceiling equals the leverage") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const std::vector<double> x000{0, 0, 0};
    const double p000 = risk(m, x000);
    const double leverage = var_logit(info, 1, x000);
    BandTarget band{p000, interval_width(p000, leverage), leverage};
    const OptionBResult res = option_b(m, pop, info, {band});
    CHECK(res.per_row_n[0] == 1); // rows 0..562 are (0,0,0)
}

TEST_CASE("option A then option B round-trips to the original n") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const std::size_t n = 453;
    const OptionAResult a = option_a(m, pop, info, n);

    // one band per distinct risk, each requesting exactly the achieved width
    std::vector<std::pair<double, double>> risk_width;
    for (const auto& r : a.records) {
        bool seen = false;
        for (const auto& [p, w] : risk_width) {
            if (p == r.true_risk) {
                seen = true;
                break;
            }
        }
        if (!seen) risk_width.emplace_back(r.true_risk, r.width);
    }
    std::sort(risk_width.begin(), risk_width.end());
    std::vector<BandTarget> bands;
    for (const auto& [p, w] : risk_width) bands.push_back(make_band(p, w));

    const OptionBResult b = option_b(m, pop, info, bands);
    for (long long rn : b.per_row_n) {
        CHECK(rn <= static_cast<long long>(n) + 1);
        CHECK(rn >= static_cast<long long>(n) - 1);
    }

    const std::vector<BandTarget> none{};
    CHECK_THROWS_AS(option_b(m, pop, info, none), DomainError);
}

TEST_CASE("precision records export to CSV with full precision") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const OptionAResult res = option_a(m, pop, info, 453);
    const auto rows = csv::parse(to_csv(res.records));
    REQUIRE(rows.size() == pop.n() + 1);
    CHECK(rows[0][5] == "width");
    CHECK(std::stod(rows[1][1]) == doctest::Approx(res.records[0].true_risk).epsilon(1e-15));
}
