#include "xr/decision.hpp"

#include <algorithm>
#include <cmath>

namespace xr {

void BranchDraws::validate() const {
    const Eigen::Index n = p_contact.size();
    if (n < 1) throw AlignmentError("branch draws are empty");
    for (const auto* v : {&p_strike, &xr_contact, &xr_miss, &xr_strike, &xr_ball}) {
        if (v->size() != n) throw AlignmentError("branch draw vectors differ in length");
    }
    for (const auto* v : {&p_contact, &p_strike}) {
        if (!((v->array() >= 0.0) && (v->array() <= 1.0)).all()) {
            throw std::invalid_argument("branch probability outside [0, 1]");
        }
    }
    for (const auto* v : {&xr_contact, &xr_miss, &xr_strike, &xr_ball}) {
        if (!v->allFinite()) throw std::invalid_argument("non-finite run expectancy draw");
    }
}

namespace {

Eigen::VectorXd mix(const Eigen::VectorXd& p, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd raw = p.array() * a.array() + (1.0 - p.array()) * b.array();
    return raw.max(a.array().min(b.array())).min(a.array().max(b.array())).matrix();
}

}  // namespace

BranchExpectations branch_expectations(const BranchDraws& draws) {
    draws.validate();
    return {mix(draws.p_contact, draws.xr_contact, draws.xr_miss), mix(draws.p_strike, draws.xr_strike, draws.xr_ball)};
}

Eigen::VectorXd evdiff(const BranchExpectations& e) {
    if (e.swing.size() != e.take.size()) throw AlignmentError("branch expectations differ in length");
    return e.swing - e.take;
}

std::string to_string(Decision d) { return d == Decision::Swing ? "swing" : "take"; }

Decision parse_decision(const std::string& s) {
    if (s == "swing" || s == "1") return Decision::Swing;
    if (s == "take" || s == "0") return Decision::Take;
    throw std::invalid_argument("unknown decision '" + s + "'");
}

char panel_code(Panel p) { return static_cast<char>('a' + static_cast<int>(p)); }

Panel panel_assign(Decision actual, Decision optimal) {
    if (optimal == Decision::Take) return actual == Decision::Take ? Panel::A : Panel::B;
    return actual == Decision::Take ? Panel::C : Panel::D;
}

void DecisionSummary::attach_actual(Decision d) {
    actual = d;
    panel = panel_assign(d, optimal);
}

double nearest_rank_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must be in [0, 1]");
    const double n = static_cast<double>(sorted.size());
    // The small slack keeps q N that is integral in exact arithmetic from rounding up.
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

DecisionSummary summarize_decision(const Eigen::VectorXd& evdiff_draws, double level) {
    if (evdiff_draws.size() == 0) throw std::invalid_argument("cannot summarize zero draws");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("interval level must be in (0, 1)");
    DecisionSummary s;
    s.evdiff = evdiff_draws;
    s.mean = evdiff_draws.mean();
    std::vector<double> sorted(evdiff_draws.data(), evdiff_draws.data() + evdiff_draws.size());
    std::sort(sorted.begin(), sorted.end());
    // A mean computed in floating point can drift past the extreme draws when they are all equal.
    s.mean = std::clamp(s.mean, sorted.front(), sorted.back());
    s.lower = nearest_rank_quantile(sorted, 0.5 * (1.0 - level));
    s.upper = nearest_rank_quantile(sorted, 1.0 - 0.5 * (1.0 - level));
    s.p_swing_optimal = static_cast<double>((evdiff_draws.array() > 0.0).count()) /
                        static_cast<double>(evdiff_draws.size());
    s.optimal = optimal_decision(s.mean);
    return s;
}

// ---------------------------------------------------------------------------------------------

unsigned ensemble_groups(const PosteriorEnsemble& ensemble) {
    const auto it = ensemble.metadata.find("feature_groups");
    return it == ensemble.metadata.end() ? kAllGroups : static_cast<unsigned>(it->second);
}

namespace {

std::vector<int> resolve_subset(const PosteriorEnsemble& e, std::vector<int> subset) {
    if (subset.empty()) {
        subset.resize(e.draw_count());
        for (std::size_t k = 0; k < subset.size(); ++k) subset[k] = static_cast<int>(k);
    }
    for (int k : subset) {
        if (k < 0 || static_cast<std::size_t>(k) >= e.draw_count()) throw std::out_of_range("draw index out of range");
    }
    return subset;
}

}  // namespace

EventDrawFn event_component(const PosteriorEnsemble& ensemble, std::vector<int> draw_subset) {
    if (ensemble.mode != ResponseMode::Probit) throw std::invalid_argument("event component needs a probit ensemble");
    const unsigned groups = ensemble_groups(ensemble);
    auto subset = resolve_subset(ensemble, std::move(draw_subset));
    return [&ensemble, groups, subset = std::move(subset)](const std::vector<PitchContext>& pitches) {
        const Eigen::MatrixXd x = encode(event_features(pitches, groups), ensemble.schema);
        return predict(ensemble, x, subset);
    };
}

RunsDrawFn runs_component(const PosteriorEnsemble& ensemble, std::vector<int> draw_subset) {
    if (ensemble.mode != ResponseMode::Regression) throw std::invalid_argument("runs component needs a regression ensemble");
    auto subset = resolve_subset(ensemble, std::move(draw_subset));
    return [&ensemble, subset = std::move(subset)](const std::vector<RunsQuery>& queries) {
        const Eigen::MatrixXd x = encode(runs_features(queries), ensemble.schema);
        return predict(ensemble, x, subset);
    };
}

std::vector<int> matched_draw_columns(Eigen::Index available, Eigen::Index wanted) {
    if (available < 1 || wanted < 1) throw std::invalid_argument("draw counts must be positive");
    if (wanted > available) throw AlignmentError("cannot match more draws than a model provides");
    std::vector<int> cols(static_cast<std::size_t>(wanted));
    for (Eigen::Index j = 0; j < wanted; ++j) {
        cols[static_cast<std::size_t>(j)] = static_cast<int>((j * available) / wanted);
    }
    return cols;
}

std::vector<RunsQuery> outcome_queries(const GameState& g) {
    return {{g, true, GState::Contact}, {g, true, GState::Strike}, {g, false, GState::Strike}, {g, false, GState::Ball}};
}

namespace {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
    return out;
}

}  // namespace

ScoredPitches score_pitches(const ComponentModels& models, const std::vector<PitchContext>& pitches,
                            const std::vector<std::optional<Decision>>& actual, const ScoreOptions& options) {
    if (!models.strike || !models.contact || !models.runs) throw std::invalid_argument("all three component models are required");
    if (!actual.empty() && actual.size() != pitches.size()) throw AlignmentError("actual decisions differ in length from pitches");
    ScoredPitches out;
    if (pitches.empty()) return out;

    const Eigen::MatrixXd strike = models.strike(pitches);
    const Eigen::MatrixXd contact = models.contact(pitches);
    std::vector<RunsQuery> queries;
    queries.reserve(4 * pitches.size());
    for (const auto& p : pitches) {
        for (const auto& q : outcome_queries(p.game_state)) queries.push_back(q);
    }
    const Eigen::MatrixXd runs = models.runs(queries);
    const auto n = static_cast<Eigen::Index>(pitches.size());
    if (strike.rows() != n || contact.rows() != n || runs.rows() != 4 * n) {
        throw AlignmentError("component model returned the wrong number of rows");
    }

    const Eigen::Index smallest = std::min({strike.cols(), contact.cols(), runs.cols()});
    if (smallest < 1) throw AlignmentError("component model returned no draws");
    const bool equal = strike.cols() == contact.cols() && contact.cols() == runs.cols();
    if (!equal && !options.allow_draw_matching) throw AlignmentError("component models have different draw counts");
    const Eigen::Index wanted = options.draws.value_or(smallest);
    const Eigen::MatrixXd s = select_columns(strike, matched_draw_columns(strike.cols(), wanted));
    const Eigen::MatrixXd c = select_columns(contact, matched_draw_columns(contact.cols(), wanted));
    const Eigen::MatrixXd r = select_columns(runs, matched_draw_columns(runs.cols(), wanted));

    out.draws = wanted;
    out.summaries.reserve(pitches.size());
    out.components.reserve(pitches.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        BranchDraws d;
        d.p_strike = s.row(i).transpose();
        d.p_contact = c.row(i).transpose();
        d.xr_contact = r.row(4 * i).transpose();
        d.xr_miss = r.row(4 * i + 1).transpose();
        d.xr_strike = r.row(4 * i + 2).transpose();
        d.xr_ball = r.row(4 * i + 3).transpose();
        DecisionSummary summary = summarize_decision(evdiff(branch_expectations(d)), options.level);
        if (!actual.empty() && actual[static_cast<std::size_t>(i)]) summary.attach_actual(*actual[static_cast<std::size_t>(i)]);
        out.summaries.push_back(std::move(summary));
        out.components.push_back({d.p_strike.mean(), d.p_contact.mean(), d.xr_contact.mean(), d.xr_miss.mean(),
                                  d.xr_strike.mean(), d.xr_ball.mean()});
    }
    return out;
}

ScoredPitches score_pitches(const ComponentModels& models, const std::vector<PitchRecord>& pitches,
                            const ScoreOptions& options) {
    std::vector<PitchContext> ctx;
    std::vector<std::optional<Decision>> actual;
    ctx.reserve(pitches.size());
    actual.reserve(pitches.size());
    for (const auto& p : pitches) {
        ctx.push_back(context_of(p));
        actual.emplace_back(p.swing ? Decision::Swing : Decision::Take);
    }
    return score_pitches(models, ctx, actual, options);
}

}  // namespace xr
