#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xr/data.hpp"
#include "xr/decision.hpp"

namespace xr {

/// A scored pitch as the metrics see it. EVdiff draws live in a separate pitches x draws matrix.
struct ScoredPitch {
    PitchKey key;
    std::string batter_id;
    GameState game_state;
    Location location;
    std::optional<double> sz_top;
    std::optional<double> sz_bot;
    Decision actual = Decision::Take;
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double p_swing_optimal = 0.0;
    Decision optimal = Decision::Take;
    Panel panel = Panel::A;
    PitchComponents components;

    bool operator==(const ScoredPitch&) const = default;
};

ScoredPitch make_scored_pitch(const PitchRecord& record, const DecisionSummary& summary,
                              const PitchComponents& components);

struct PanelSums {
    std::array<double, 4> sum{};  // indexed by Panel
    std::array<std::size_t, 4> count{};

    double runs_added() const;  // (d - c) - (a - b)
    double runs_lost() const;   // c - b
};

/// Panels from the sign of each pitch's EVdiff value.
PanelSums panel_sums(std::span<const Decision> actual, std::span<const double> evdiff);

/// +EVdiff for a swing, -EVdiff for a take.
inline double added_value(Decision actual, double ev) { return actual == Decision::Swing ? ev : -ev; }

struct MetricSummary {
    Eigen::VectorXd draws;
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

MetricSummary summarize_metric(Eigen::VectorXd draws, double level = 0.90);

/// Per draw: share of pitches whose actual decision matches that draw's sign-based optimum.
Eigen::VectorXd proportion_optimal_draws(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff);
/// Per draw, season sums.
Eigen::VectorXd runs_added_draws(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff);
Eigen::VectorXd runs_lost_draws(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff);

struct ZoneSpec {
    double half_width = 0.83;
    bool use_pitch_bounds = true;  // sz_top / sz_bot when the pitch has them
    double bottom = 1.5;
    double top = 3.5;

    void validate() const;
    bool in_zone(const Location& l, std::optional<double> sz_top = {}, std::optional<double> sz_bot = {}) const;
};

struct TraditionalMetrics {
    std::optional<double> o_swing;  // swing rate outside the zone; absent with no such pitches
    std::optional<double> z_swing;
    double correct = 0.0;           // swing in zone or take out of zone
    std::size_t in_zone = 0;
    std::size_t out_of_zone = 0;
};

TraditionalMetrics traditional_metrics(std::span<const ScoredPitch> pitches, const ZoneSpec& zone);

struct BatterReport {
    std::string batter_id;
    int season = 0;
    std::size_t pitches = 0;
    bool qualified = false;
    MetricSummary proportion_optimal;
    MetricSummary runs_added;
    MetricSummary runs_lost;
    // Point estimates from posterior-mean panels.
    PanelSums panels;
    double proportion_optimal_point = 0.0;
    double runs_added_point = 0.0;
    double runs_lost_point = 0.0;
    TraditionalMetrics traditional;

    double runs_added_per_pitch() const { return runs_added.mean / static_cast<double>(pitches); }
    double runs_lost_per_pitch() const { return runs_lost.mean / static_cast<double>(pitches); }
};

/// One batter-season. evdiff rows align with pitches.
BatterReport batter_report(const std::string& batter_id, int season, std::span<const ScoredPitch> pitches,
                           const Eigen::MatrixXd& evdiff, const ZoneSpec& zone, std::size_t min_pitches = 1000,
                           double level = 0.90);

/// Reports for every (batter, season) present.
std::vector<BatterReport> batter_reports(const std::vector<ScoredPitch>& pitches, const Eigen::MatrixXd& evdiff,
                                         const ZoneSpec& zone, std::size_t min_pitches = 1000, double level = 0.90);

struct SeasonValue {
    double value = 0.0;
    std::size_t pitches = 0;
};
/// season -> batter -> value
using SeasonTable = std::map<int, std::map<std::string, SeasonValue>>;

struct CorrelationMatrix {
    std::vector<int> seasons;
    Eigen::MatrixXd r;
    std::vector<std::string> batters;  // qualified in every season
};

/// Pearson correlations between seasons over batters with at least min_pitches in every season.
CorrelationMatrix year_to_year_correlation(const SeasonTable& table, std::size_t min_pitches = 1000);

double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace xr
