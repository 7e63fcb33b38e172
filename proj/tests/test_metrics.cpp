#include <doctest.h>

#include <cmath>

#include "xr/metrics.hpp"
#include "xr/random.hpp"

using namespace xr;

namespace {

std::vector<Decision> flip(const std::vector<Decision>& d) {
    std::vector<Decision> out;
    for (auto x : d) out.push_back(x == Decision::Swing ? Decision::Take : Decision::Swing);
    return out;
}

ScoredPitch pitch_at(double x, double z, Decision actual, double mean = 0.0) {
    ScoredPitch p;
    p.batter_id = "b";
    p.key.year = 2019;
    p.location = {x, z};
    p.actual = actual;
    p.mean = mean;
    p.optimal = optimal_decision(mean);
    p.panel = panel_assign(actual, p.optimal);
    return p;
}

}  // namespace

TEST_CASE("four-pitch fixture") {
    const std::vector<Decision> actual = {Decision::Swing, Decision::Take, Decision::Take, Decision::Swing};
    Eigen::MatrixXd ev(4, 1);
    ev << 0.2, -0.1, 0.3, -0.05;
    CHECK(runs_added_draws(actual, ev)(0) == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(runs_lost_draws(actual, ev)(0) == doctest::Approx(0.35).epsilon(1e-12));

    std::vector<ScoredPitch> pitches;
    for (Eigen::Index i = 0; i < 4; ++i) pitches.push_back(pitch_at(0.0, 2.5, actual[static_cast<std::size_t>(i)], ev(i, 0)));
    const auto r = batter_report("b", 2019, pitches, ev, ZoneSpec{}, 1000);
    CHECK_FALSE(r.qualified);
    CHECK(r.panels.count == std::array<std::size_t, 4>{1, 1, 1, 1});
    CHECK(r.runs_added_point == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(r.runs_added_per_pitch() == doctest::Approx(-0.0125).epsilon(1e-12));
    CHECK(pitches[3].panel == Panel::B);
}

TEST_CASE("runs added and lost equal the per-pitch positive and negative parts") {
    Rng rng(19);
    for (int fixture = 0; fixture < 500; ++fixture) {
        const auto n = static_cast<Eigen::Index>(1 + rng.index(40));
        const auto draws = static_cast<Eigen::Index>(1 + rng.index(6));
        std::vector<Decision> actual;
        for (Eigen::Index i = 0; i < n; ++i) actual.push_back(rng.bernoulli(0.5) ? Decision::Swing : Decision::Take);
        Eigen::MatrixXd ev(n, draws);
        const bool dyadic = fixture % 2 == 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < draws; ++j) {
                ev(i, j) = dyadic ? (static_cast<double>(rng.index(257)) - 128.0) / 1024.0 : rng.normal(0.0, 0.1);
            }
        }
        const Eigen::VectorXd added = runs_added_draws(actual, ev);
        const Eigen::VectorXd lost = runs_lost_draws(actual, ev);
        const Eigen::VectorXd added_flipped = runs_added_draws(flip(actual), ev);
        for (Eigen::Index j = 0; j < draws; ++j) {
            double oracle_added = 0.0, oracle_lost = 0.0, oracle_gain = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double a = added_value(actual[static_cast<std::size_t>(i)], ev(i, j));
                oracle_added += a;
                oracle_lost += std::max(0.0, -a);
                oracle_gain += std::max(0.0, a);
            }
            if (dyadic) {
                CHECK(added(j) == oracle_added);
                CHECK(lost(j) == oracle_lost);
                CHECK(added(j) + lost(j) == oracle_gain);
            } else {
                CHECK(added(j) == doctest::Approx(oracle_added).epsilon(1e-12).scale(1.0));
                CHECK(lost(j) == doctest::Approx(oracle_lost).epsilon(1e-12).scale(1.0));
            }
            CHECK(added_flipped(j) == -added(j));
            CHECK(lost(j) >= 0.0);
            CHECK(lost(j) >= -added(j));
        }
    }
}

TEST_CASE("always-optimal batter loses nothing") {
    Rng rng(3);
    Eigen::MatrixXd ev(30, 1);
    std::vector<Decision> actual;
    for (Eigen::Index i = 0; i < 30; ++i) {
        ev(i, 0) = rng.normal();
        actual.push_back(optimal_decision(ev(i, 0)));
    }
    CHECK(runs_lost_draws(actual, ev)(0) == 0.0);
    CHECK(runs_added_draws(actual, ev)(0) >= 0.0);
    CHECK(proportion_optimal_draws(actual, ev)(0) == 1.0);
}

TEST_CASE("proportion optimal: exhaustive enumeration on 3 pitches and 2 draws") {
    const double values[3] = {-0.5, 0.0, 0.5};
    int checked = 0;
    for (int code = 0; code < 729; ++code) {
        Eigen::MatrixXd ev(3, 2);
        int c = code;
        for (int k = 0; k < 6; ++k) {
            ev(k / 2, k % 2) = values[c % 3];
            c /= 3;
        }
        for (int mask = 0; mask < 8; ++mask) {
            std::vector<Decision> actual;
            for (int i = 0; i < 3; ++i) actual.push_back((mask >> i) & 1 ? Decision::Swing : Decision::Take);
            const Eigen::VectorXd p = proportion_optimal_draws(actual, ev);
            for (int j = 0; j < 2; ++j) {
                int hits = 0;
                for (int i = 0; i < 3; ++i) {
                    const bool should_swing = ev(i, j) > 0.0;
                    hits += (actual[static_cast<std::size_t>(i)] == Decision::Swing) == should_swing;
                }
                CHECK(p(j) == hits / 3.0);
                ++checked;
            }
            const PanelSums s = panel_sums(actual, std::vector<double>{ev(0, 0), ev(1, 0), ev(2, 0)});
            CHECK(s.count[0] + s.count[1] + s.count[2] + s.count[3] == 3);
        }
    }
    CHECK(checked == 729 * 16);
    CHECK_THROWS(proportion_optimal_draws({}, Eigen::MatrixXd(0, 2)));
}

TEST_CASE("traditional metrics use geometry only") {
    std::vector<ScoredPitch> pitches = {pitch_at(0.0, 2.5, Decision::Swing), pitch_at(3.0, 2.5, Decision::Take)};
    const auto t = traditional_metrics(pitches, ZoneSpec{});
    CHECK(t.correct == 1.0);
    CHECK(t.z_swing == 1.0);
    CHECK(t.o_swing == 0.0);
    CHECK(t.in_zone == 1);
    CHECK(t.out_of_zone == 1);

    // Per-pitch zone bounds override the fixed ones.
    ScoredPitch high = pitch_at(0.0, 3.8, Decision::Take);
    CHECK_FALSE(ZoneSpec{}.in_zone(high.location));
    CHECK(ZoneSpec{}.in_zone(high.location, 4.0, 1.8));
    ZoneSpec fixed;
    fixed.use_pitch_bounds = false;
    CHECK_FALSE(fixed.in_zone(high.location, 4.0, 1.8));

    // Changing EVdiff values does not move them.
    for (auto& p : pitches) p.mean = -p.mean + 1.0;
    const auto t2 = traditional_metrics(pitches, ZoneSpec{});
    CHECK(t2.correct == t.correct);
}

TEST_CASE("year-to-year correlation") {
    SeasonTable table;
    const std::vector<std::string> batters = {"a", "b", "c", "d", "e"};
    for (std::size_t i = 0; i < batters.size(); ++i) {
        const double v = 0.6 + 0.03 * static_cast<double>(i * i);
        table[2017][batters[i]] = {v, 1200};
        table[2018][batters[i]] = {v, 1500};
        table[2019][batters[i]] = {-v, 1100};
    }
    table[2018]["e"].pitches = 10;  // disqualified
    table[2017]["f"] = {0.9, 2000};  // only one season
    const auto c = year_to_year_correlation(table, 1000);
    CHECK(c.batters == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(c.r(0, 1) == doctest::Approx(1.0));
    CHECK(c.r(0, 2) == doctest::Approx(-1.0));
    CHECK(c.r(2, 2) == 1.0);

    table[2017]["c"].pitches = 5;
    table[2018]["d"].pitches = 5;
    CHECK_THROWS_WITH(year_to_year_correlation(table, 1000), doctest::Contains("at least 3"));
}

TEST_CASE("batter reports group by batter and season") {
    std::vector<ScoredPitch> pitches;
    Eigen::MatrixXd ev(6, 3);
    Rng rng(1);
    for (int i = 0; i < 6; ++i) {
        auto p = pitch_at(0.1 * i, 2.0, i % 2 ? Decision::Swing : Decision::Take, 0.0);
        p.batter_id = i < 4 ? "x" : "y";
        for (int j = 0; j < 3; ++j) ev(i, j) = rng.normal(0.0, 0.1);
        p.mean = ev.row(i).mean();
        pitches.push_back(p);
    }
    const auto reports = batter_reports(pitches, ev, ZoneSpec{}, 3);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].batter_id == "x");
    CHECK(reports[0].pitches == 4);
    CHECK(reports[0].qualified);
    CHECK_FALSE(reports[1].qualified);
    for (const auto& r : reports) {
        CHECK((r.proportion_optimal.draws.array() >= 0.0).all());
        CHECK((r.proportion_optimal.draws.array() <= 1.0).all());
        CHECK((r.runs_lost.draws.array() >= 0.0).all());
    }
}
