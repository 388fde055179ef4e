#include <doctest.h>

#include <cmath>
#include <vector>

#include "foot_ulcer.hpp"
#include "pmstab/instability.hpp"

using namespace pmstab;

namespace {

// Quadrature oracle for E|invlogit(Z) - p| with Z ~ N(logit p, v):
// composite Simpson over +/- 10 sd, independent of the sampling path.
double mape_quadrature(double p, double v, int points = 200001) {
    if (v == 0.0) return 0.0;
    const double s = std::sqrt(v);
    const double mu = num::logit(p);
    const double lo = mu - 10.0 * s, hi = mu + 10.0 * s;
    const double h = (hi - lo) / (points - 1);
    double total = 0.0;
    for (int i = 0; i < points; ++i) {
        const double z = lo + i * h;
        const double f = std::abs(num::invlogit(z) - p) *
                         std::exp(-0.5 * ((z - mu) / s) * ((z - mu) / s)) /
                         (s * std::sqrt(2.0 * 3.14159265358979323846));
        const double coef = (i == 0 || i == points - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        total += coef * f;
    }
    return total * h / 3.0;
}

} // namespace

TEST_CASE("misclassification_prob: symmetry, degeneracy, example value") {
    CHECK(misclassification_prob(0.06, 0.2, 0.06) == 0.5);
    CHECK(misclassification_prob(0.06, 0.0, 0.06) == 0.5);
    CHECK(misclassification_prob(0.3, 0.0, 0.06) == 0.0);

    // history-only pattern at n = 453 against a 6% threshold
    const UnitInformation info = unit_information(footulcer::model(), footulcer::population1002());
    const std::vector<double> x001{0, 0, 1};
    const double p = risk(footulcer::model(), x001);
    const double v = var_logit(info, 453, x001);
    CHECK(misclassification_prob(p, v, 0.06) == doctest::Approx(0.0422910).epsilon(1e-5));

    CHECK_THROWS_AS(misclassification_prob(0.0, 0.1, 0.06), DomainError);
    CHECK_THROWS_AS(misclassification_prob(0.3, 0.1, 1.0), DomainError);
}

TEST_CASE("misclassification_prob: monotone in v, bounded by 0.5") {
    double prev = 0.0;
    for (double v : {0.01, 0.05, 0.2, 1.0, 5.0}) {
        const double q = misclassification_prob(0.13, v, 0.06);
        CHECK(q > prev);
        CHECK(q < 0.5);
        prev = q;
    }
    // farther from the threshold -> less mass on the wrong side
    double prev_dist = 1.0;
    for (double p : {0.07, 0.10, 0.20, 0.40}) {
        const double q = misclassification_prob(p, 0.3, 0.06);
        CHECK(q < prev_dist);
        prev_dist = q;
    }
    // bound holds on a random grid
    num::RngStream rng(88, "bound");
    for (int i = 0; i < 500; ++i) {
        const double p = 0.001 + 0.998 * rng.next_uniform();
        const double t = 0.001 + 0.998 * rng.next_uniform();
        const double v = 5.0 * rng.next_uniform();
        const double q = misclassification_prob(p, v, t);
        CHECK(q >= 0.0);
        if (p != t) CHECK(q <= 0.5);
    }
}

TEST_CASE("mape: degenerate case and quadrature oracle") {
    CHECK(mape(0.3, 0.0, 1000, num::RngStream(1, "mape")) == 0.0);

    const double oracle = mape_quadrature(0.5, 0.01);
    CHECK(oracle == doctest::Approx(0.0199140).epsilon(1e-4));
    const double sampled = mape(0.5, 0.01, 200000, num::RngStream(31, "mape"));
    CHECK(sampled == doctest::Approx(oracle).epsilon(3e-3));

    // per-pattern agreement at n = 453 leverages
    const UnitInformation info = unit_information(footulcer::model(), footulcer::population1002());
    const std::vector<double> x111{1, 1, 1};
    const double v = var_logit(info, 453, x111);
    const double p = risk(footulcer::model(), x111);
    CHECK(mape_quadrature(p, v) == doctest::Approx(0.086427).epsilon(1e-4));
    CHECK(mape(p, v, 100000, num::RngStream(7, "mape")) == doctest::Approx(mape_quadrature(p, v)).epsilon(5e-3));
}

TEST_CASE("mape monte-carlo error halves when draws quadruple") {
    // SE of the mean scales as 1/sqrt(draws)
    auto spread = [](int draws) {
        std::vector<double> est;
        for (int seed = 0; seed < 24; ++seed) {
            est.push_back(mape(0.3, 0.05, draws, num::RngStream(1000 + seed, "mape")));
        }
        const double mean = num::mean_compensated(est);
        double ss = 0.0;
        for (double e : est) ss += (e - mean) * (e - mean);
        return std::sqrt(ss / (est.size() - 1));
    };
    const double se_small = spread(400);
    const double se_large = spread(6400);
    CHECK(se_small / se_large == doctest::Approx(4.0).epsilon(0.5));
}

TEST_CASE("mape is reproducible for a fixed stream") {
    const double a = mape(0.2, 0.1, 1000, num::RngStream(5, "mape"));
    const double b = mape(0.2, 0.1, 1000, num::RngStream(5, "mape"));
    CHECK(a == b);
}

TEST_CASE("summarize conventions") {
    const std::vector<double> v{1, 2, 3, 4};
    const Summary s = summarize(v);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.min == 1.0);
    CHECK(s.median == 2.0); // lower-middle for even counts
    CHECK(s.max == 4.0);

    const std::vector<double> one{7.5};
    const Summary s1 = summarize(one);
    CHECK(s1.mean == 7.5);
    CHECK(s1.min == 7.5);
    CHECK(s1.median == 7.5);
    CHECK(s1.max == 7.5);

    CHECK_THROWS_AS(summarize(std::vector<double>{}), EmptyInput);
}

TEST_CASE("compute_instability and subgroup summaries on the example population") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const OptionAResult a = option_a(m, pop, info, 453);
    const auto inst = compute_instability(a.records, 0.06, 1000, num::RngStream(20240601, "instability"));

    REQUIRE(inst.size() == pop.n());
    // overall MAPE mean near its quadrature value 0.0167847
    std::vector<double> mapes;
    for (const auto& r : inst) mapes.push_back(r.mape);
    CHECK(num::mean_compensated(mapes) == doctest::Approx(0.0167847).epsilon(0.02));

    const auto groups = group_summary(a.records, inst, pop, "pulse");
    REQUIRE(groups.size() == 3); // "0", "1", Overall
    CHECK(groups[0].group_label == "0");
    CHECK(groups[1].group_label == "1");
    CHECK(groups[2].group_label == "Overall");
    CHECK(groups[0].group_n == 730);
    CHECK(groups[1].group_n == 272);

    // frozen subgroup means from the exact cell expectation
    CHECK(groups[1].width.mean == doctest::Approx(0.1377130).epsilon(1e-6));
    CHECK(groups[0].width.mean == doctest::Approx(0.0635752).epsilon(1e-6));
    CHECK(groups[1].mape.mean == doctest::Approx(0.0277595).epsilon(0.03));
    CHECK(groups[0].mape.mean == doctest::Approx(0.0126954).epsilon(0.03));

    // pooled group means reproduce the overall mean to 1e-12
    const double pooled_width =
        (groups[0].width.mean * groups[0].group_n + groups[1].width.mean * groups[1].group_n) /
        static_cast<double>(pop.n());
    CHECK(std::abs(pooled_width - groups[2].width.mean) < 1e-12);
    const double pooled_mape =
        (groups[0].mape.mean * groups[0].group_n + groups[1].mape.mean * groups[1].group_n) /
        static_cast<double>(pop.n());
    CHECK(std::abs(pooled_mape - groups[2].mape.mean) < 1e-12);

    // misclassification summaries are present and capped at 0.5
    REQUIRE(groups[2].misclass.has_value());
    CHECK(groups[2].misclass->max <= 0.5);

    CHECK_THROWS_AS(group_summary(a.records, inst, pop, "nope"), UnknownVariable);
}

TEST_CASE("single-level grouping equals the overall summary") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const OptionAResult a = option_a(m, pop, info, 900);
    const auto inst = compute_instability(a.records, std::nullopt, 100, num::RngStream(9, "instability"));

    // build a constant grouping column
    std::vector<VariableSpec> vars = footulcer::variables();
    vars.push_back(VariableSpec::binary("all"));
    Dataset with_const(vars, pop.n());
    for (std::size_t i = 0; i < pop.n(); ++i) {
        for (int c = 0; c < 3; ++c) with_const.set_value(i, c, pop.value(i, c));
        with_const.set_value(i, 3, 1.0);
    }
    const auto groups = group_summary(a.records, inst, with_const, "all");
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].width.mean == groups[1].width.mean);
    CHECK(groups[0].mape.median == groups[1].mape.median);
    CHECK_FALSE(groups[0].misclass.has_value());
}

TEST_CASE("instability draws do not depend on evaluation order") {
    const CoreModel m = footulcer::model();
    const Dataset pop = footulcer::population1002();
    const UnitInformation info = unit_information(m, pop);
    const OptionAResult a = option_a(m, pop, info, 453);
    const num::RngStream rng(77, "instability");

    auto full = compute_instability(a.records, 0.06, 50, rng);
    // recompute a single row in isolation: the row-labelled sub-stream makes it identical
    std::vector<PrecisionRecord> tail{a.records[700]};
    auto alone = compute_instability(tail, 0.06, 50, rng);
    CHECK(alone[0].mape == full[700].mape);
}

TEST_CASE("summary rendering") {
    SummaryTable t;
    t.group_label = "Overall";
    t.group_n = 10;
    t.width = {0.1934, 0.0123, 0.1612, 0.6812};
    t.mape = {0.0381, 0.0022, 0.0325, 0.1461};
    t.misclass = Summary{0.0883, 0.0, 0.0097, 0.5};
    const std::string text = summary_to_text({t});
    CHECK(text.find("Overall") != std::string::npos);
    CHECK(text.find("0.1934 (0.0123, 0.1612, 0.6812)") != std::string::npos);
    const std::string table = summary_to_csv({t});
    CHECK(table.find("misclass_mean") != std::string::npos);
    CHECK(table.find("0.5") != std::string::npos);
}
