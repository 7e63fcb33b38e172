#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xr/bart.hpp"
#include "xr/features.hpp"

namespace xr {

class AlignmentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Aligned posterior draws for one pitch; entry j of every vector belongs to joint draw j.
struct BranchDraws {
    Eigen::VectorXd p_contact;
    Eigen::VectorXd p_strike;
    Eigen::VectorXd xr_contact;
    Eigen::VectorXd xr_miss;
    Eigen::VectorXd xr_strike;
    Eigen::VectorXd xr_ball;

    Eigen::Index size() const { return p_contact.size(); }
    void validate() const;
};

struct BranchExpectations {
    Eigen::VectorXd swing;  // E[R | swing] per draw
    Eigen::VectorXd take;   // E[R | take] per draw
};

/// p * a + (1 - p) * b per draw, kept inside [min(a, b), max(a, b)].
BranchExpectations branch_expectations(const BranchDraws& draws);

/// swing - take per draw.
Eigen::VectorXd evdiff(const BranchExpectations& e);

enum class Decision : std::uint8_t { Take, Swing };
enum class Panel : std::uint8_t { A, B, C, D };

std::string to_string(Decision d);
char panel_code(Panel p);
Decision parse_decision(const std::string& s);

/// a = take / optimal take, b = swing / optimal take, c = take / optimal swing, d = swing / optimal swing.
Panel panel_assign(Decision actual, Decision optimal);

/// Swing iff the value is strictly positive; ties go to Take.
inline Decision optimal_decision(double ev) { return ev > 0.0 ? Decision::Swing : Decision::Take; }

struct DecisionSummary {
    Eigen::VectorXd evdiff;
    double mean = 0.0;
    double lower = 0.0;  // (1 - level) / 2 quantile
    double upper = 0.0;
    double p_swing_optimal = 0.0;
    Decision optimal = Decision::Take;
    std::optional<Decision> actual;
    std::optional<Panel> panel;

    void attach_actual(Decision d);
};

/// Nearest-rank quantile of sorted values: the ceil(q N)-th smallest.
double nearest_rank_quantile(std::span<const double> sorted, double q);

DecisionSummary summarize_decision(const Eigen::VectorXd& evdiff_draws, double level = 0.90);

// ---------------------------------------------------------------------------------------------
// Scoring with fitted component models

/// rows x draws of P(called strike) or P(contact).
using EventDrawFn = std::function<Eigen::MatrixXd(const std::vector<PitchContext>&)>;
/// rows x draws of expected runs.
using RunsDrawFn = std::function<Eigen::MatrixXd(const std::vector<RunsQuery>&)>;

struct ComponentModels {
    EventDrawFn strike;
    EventDrawFn contact;
    RunsDrawFn runs;
};

/// Wraps a fitted ensemble as a component: builds the predictor view it was trained on and
/// predicts a fixed subset of its kept draws (all draws when the subset is empty). The ensemble
/// must outlive the returned function.
EventDrawFn event_component(const PosteriorEnsemble& ensemble, std::vector<int> draw_subset = {});
RunsDrawFn runs_component(const PosteriorEnsemble& ensemble, std::vector<int> draw_subset = {});

/// Predictor groups an event ensemble was trained with, from its metadata (all groups if absent).
unsigned ensemble_groups(const PosteriorEnsemble& ensemble);

/// Column j of a k-draw matrix used for joint draw j of n: floor(j k / n).
std::vector<int> matched_draw_columns(Eigen::Index available, Eigen::Index wanted);

/// Posterior means of the six component quantities for one pitch.
struct PitchComponents {
    double p_strike = 0.0;
    double p_contact = 0.0;
    double xr_contact = 0.0;
    double xr_miss = 0.0;
    double xr_strike = 0.0;
    double xr_ball = 0.0;

    bool operator==(const PitchComponents&) const = default;
};

struct ScoredPitches {
    std::vector<DecisionSummary> summaries;
    std::vector<PitchComponents> components;
    Eigen::Index draws = 0;
};

struct ScoreOptions {
    double level = 0.90;
    /// Joint draws per pitch. nullopt: the smallest model draw count, and the three models must
    /// then agree unless allow_draw_matching is set.
    std::optional<Eigen::Index> draws;
    bool allow_draw_matching = true;
};

/// Scores pitches in context. actual, when given, attaches each pitch's real decision.
ScoredPitches score_pitches(const ComponentModels& models, const std::vector<PitchContext>& pitches,
                            const std::vector<std::optional<Decision>>& actual = {},
                            const ScoreOptions& options = {});
ScoredPitches score_pitches(const ComponentModels& models, const std::vector<PitchRecord>& pitches,
                            const ScoreOptions& options = {});

/// The four runs-model queries for a pre-pitch state, in the order contact, miss, strike, ball.
std::vector<RunsQuery> outcome_queries(const GameState& g);

}  // namespace xr
