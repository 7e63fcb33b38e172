#include "xr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xr {

ScoredPitch make_scored_pitch(const PitchRecord& record, const DecisionSummary& summary,
                              const PitchComponents& components) {
    ScoredPitch p;
    p.key = record.key;
    p.batter_id = record.personnel.batter_id;
    p.game_state = record.game_state;
    p.location = record.location;
    p.sz_top = record.sz_top;
    p.sz_bot = record.sz_bot;
    p.actual = record.swing ? Decision::Swing : Decision::Take;
    p.mean = summary.mean;
    p.lower = summary.lower;
    p.upper = summary.upper;
    p.p_swing_optimal = summary.p_swing_optimal;
    p.optimal = summary.optimal;
    p.panel = panel_assign(p.actual, p.optimal);
    p.components = components;
    return p;
}

double PanelSums::runs_added() const { return (sum[3] - sum[2]) - (sum[0] - sum[1]); }

double PanelSums::runs_lost() const { return sum[2] - sum[1]; }

PanelSums panel_sums(std::span<const Decision> actual, std::span<const double> evdiff) {
    if (actual.size() != evdiff.size()) throw AlignmentError("decisions and EVdiff values differ in length");
    PanelSums s;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const auto p = static_cast<std::size_t>(panel_assign(actual[i], optimal_decision(evdiff[i])));
        s.sum[p] += evdiff[i];
        ++s.count[p];
    }
    return s;
}

MetricSummary summarize_metric(Eigen::VectorXd draws, double level) {
    if (draws.size() == 0) throw std::invalid_argument("cannot summarize zero draws");
    MetricSummary m;
    std::vector<double> sorted(draws.data(), draws.data() + draws.size());
    std::sort(sorted.begin(), sorted.end());
    m.mean = std::clamp(draws.mean(), sorted.front(), sorted.back());
    m.lower = nearest_rank_quantile(sorted, 0.5 * (1.0 - level));
    m.upper = nearest_rank_quantile(sorted, 1.0 - 0.5 * (1.0 - level));
    m.draws = std::move(draws);
    return m;
}

namespace {

void check_shape(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff) {
    if (actual.empty()) throw std::invalid_argument("metrics need at least one pitch");
    if (static_cast<Eigen::Index>(actual.size()) != evdiff.rows()) {
        throw AlignmentError("decisions and EVdiff rows differ in length");
    }
    if (evdiff.cols() < 1) throw std::invalid_argument("metrics need at least one draw");
}

template <typename F>
Eigen::VectorXd per_draw(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff, F f) {
    check_shape(actual, evdiff);
    Eigen::VectorXd out(evdiff.cols());
    std::vector<double> column(actual.size());
    for (Eigen::Index j = 0; j < evdiff.cols(); ++j) {
        for (std::size_t i = 0; i < actual.size(); ++i) column[i] = evdiff(static_cast<Eigen::Index>(i), j);
        out(j) = f(column);
    }
    return out;
}

}  // namespace

Eigen::VectorXd proportion_optimal_draws(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff) {
    return per_draw(actual, evdiff, [&](const std::vector<double>& ev) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < ev.size(); ++i) hits += actual[i] == optimal_decision(ev[i]) ? 1 : 0;
        return static_cast<double>(hits) / static_cast<double>(ev.size());
    });
}

Eigen::VectorXd runs_added_draws(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff) {
    return per_draw(actual, evdiff, [&](const std::vector<double>& ev) { return panel_sums(actual, ev).runs_added(); });
}

Eigen::VectorXd runs_lost_draws(std::span<const Decision> actual, const Eigen::MatrixXd& evdiff) {
    return per_draw(actual, evdiff, [&](const std::vector<double>& ev) { return panel_sums(actual, ev).runs_lost(); });
}

// ---------------------------------------------------------------------------------------------

void ZoneSpec::validate() const {
    if (!(half_width > 0.0)) throw std::invalid_argument("zone half-width must be > 0");
    if (!(bottom < top)) throw std::invalid_argument("zone bottom must be below its top");
}

bool ZoneSpec::in_zone(const Location& l, std::optional<double> sz_top, std::optional<double> sz_bot) const {
    double lo = bottom, hi = top;
    if (use_pitch_bounds && sz_top && sz_bot && *sz_bot < *sz_top) {
        lo = *sz_bot;
        hi = *sz_top;
    }
    return std::fabs(l.plate_x) <= half_width && l.plate_z >= lo && l.plate_z <= hi;
}

TraditionalMetrics traditional_metrics(std::span<const ScoredPitch> pitches, const ZoneSpec& zone) {
    zone.validate();
    if (pitches.empty()) throw std::invalid_argument("traditional metrics need at least one pitch");
    TraditionalMetrics t;
    std::size_t swing_in = 0, swing_out = 0, correct = 0;
    for (const auto& p : pitches) {
        const bool in = zone.in_zone(p.location, p.sz_top, p.sz_bot);
        const bool swing = p.actual == Decision::Swing;
        if (in) {
            ++t.in_zone;
            swing_in += swing;
        } else {
            ++t.out_of_zone;
            swing_out += swing;
        }
        correct += in == swing;
    }
    if (t.in_zone) t.z_swing = static_cast<double>(swing_in) / static_cast<double>(t.in_zone);
    if (t.out_of_zone) t.o_swing = static_cast<double>(swing_out) / static_cast<double>(t.out_of_zone);
    t.correct = static_cast<double>(correct) / static_cast<double>(pitches.size());
    return t;
}

BatterReport batter_report(const std::string& batter_id, int season, std::span<const ScoredPitch> pitches,
                           const Eigen::MatrixXd& evdiff, const ZoneSpec& zone, std::size_t min_pitches,
                           double level) {
    std::vector<Decision> actual;
    std::vector<double> means;
    actual.reserve(pitches.size());
    for (const auto& p : pitches) {
        actual.push_back(p.actual);
        means.push_back(p.mean);
    }
    BatterReport r;
    r.batter_id = batter_id;
    r.season = season;
    r.pitches = pitches.size();
    r.qualified = pitches.size() >= min_pitches;
    r.proportion_optimal = summarize_metric(proportion_optimal_draws(actual, evdiff), level);
    r.runs_added = summarize_metric(runs_added_draws(actual, evdiff), level);
    r.runs_lost = summarize_metric(runs_lost_draws(actual, evdiff), level);
    r.panels = panel_sums(actual, means);
    r.proportion_optimal_point =
        static_cast<double>(r.panels.count[0] + r.panels.count[3]) / static_cast<double>(pitches.size());
    r.runs_added_point = r.panels.runs_added();
    r.runs_lost_point = r.panels.runs_lost();
    r.traditional = traditional_metrics(pitches, zone);
    return r;
}

std::vector<BatterReport> batter_reports(const std::vector<ScoredPitch>& pitches, const Eigen::MatrixXd& evdiff,
                                         const ZoneSpec& zone, std::size_t min_pitches, double level) {
    if (static_cast<Eigen::Index>(pitches.size()) != evdiff.rows()) {
        throw AlignmentError("scored pitches and EVdiff rows differ in length");
    }
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pitches.size(); ++i) groups[{pitches[i].batter_id, pitches[i].key.year}].push_back(i);
    std::vector<BatterReport> out;
    out.reserve(groups.size());
    for (const auto& [key, rows] : groups) {
        std::vector<ScoredPitch> subset;
        Eigen::MatrixXd ev(static_cast<Eigen::Index>(rows.size()), evdiff.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            subset.push_back(pitches[rows[k]]);
            ev.row(static_cast<Eigen::Index>(k)) = evdiff.row(static_cast<Eigen::Index>(rows[k]));
        }
        out.push_back(batter_report(key.first, key.second, subset, ev, zone, min_pitches, level));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("correlation needs two equal-length samples");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw std::invalid_argument("correlation undefined for a constant sample");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationMatrix year_to_year_correlation(const SeasonTable& table, std::size_t min_pitches) {
    if (table.size() < 2) throw std::invalid_argument("year-to-year correlation needs at least two seasons");
    CorrelationMatrix out;
    for (const auto& [season, batters] : table) out.seasons.push_back(season);
    for (const auto& [batter, value] : table.begin()->second) {
        bool everywhere = true;
        for (const auto& [season, batters] : table) {
            const auto it = batters.find(batter);
            if (it == batters.end() || it->second.pitches < min_pitches) {
                everywhere = false;
                break;
            }
        }
        if (everywhere) out.batters.push_back(batter);
    }
    if (out.batters.size() < 3) {
        throw std::invalid_argument("year-to-year correlation needs at least 3 qualified batters, found " +
                                    std::to_string(out.batters.size()));
    }
    std::vector<std::vector<double>> values;
    for (const auto& [season, batters] : table) {
        std::vector<double> v;
        for (const auto& b : out.batters) v.push_back(batters.at(b).value);
        values.push_back(std::move(v));
    }
    const auto s = static_cast<Eigen::Index>(values.size());
    out.r = Eigen::MatrixXd::Identity(s, s);
    for (Eigen::Index i = 0; i < s; ++i) {
        for (Eigen::Index j = i + 1; j < s; ++j) {
            out.r(i, j) = out.r(j, i) = pearson(values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

}  // namespace xr
