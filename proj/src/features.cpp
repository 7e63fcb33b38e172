#include "xr/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "xr/special.hpp"

namespace xr {

FeatureTable::Column& FeatureTable::add_numeric(std::string name) {
    columns.push_back({std::move(name), PredictorKind::Continuous, {}, {}});
    return columns.back();
}

FeatureTable::Column& FeatureTable::add_categorical(std::string name) {
    columns.push_back({std::move(name), PredictorKind::Categorical, {}, {}});
    return columns.back();
}

FeatureSchema infer_schema(const FeatureTable& table) {
    FeatureSchema schema;
    for (const auto& col : table.columns) {
        if (col.size() != table.rows()) throw PredictorMismatch("column '" + col.name + "' has a different length");
        Predictor p;
        p.name = col.name;
        p.kind = col.kind;
        if (col.kind == PredictorKind::Continuous) {
            if (!col.numeric.empty()) {
                const auto [lo, hi] = std::minmax_element(col.numeric.begin(), col.numeric.end());
                p.lo = *lo;
                p.hi = *hi;
            }
            for (double v : col.numeric) {
                if (!std::isfinite(v)) throw PredictorMismatch("predictor '" + col.name + "' has a non-finite value");
            }
        } else {
            const std::set<std::string> levels(col.text.begin(), col.text.end());
            p.levels.assign(levels.begin(), levels.end());
        }
        schema.predictors.push_back(std::move(p));
    }
    return schema;
}

std::int64_t unseen_level_code(const std::string& level) {
    return -1 - static_cast<std::int64_t>(fnv1a(level) & 0x3fffffffffffULL);
}

Eigen::MatrixXd encode(const FeatureTable& table, const FeatureSchema& schema) {
    if (table.columns.size() != schema.size()) {
        throw PredictorMismatch("expected " + std::to_string(schema.size()) + " predictors, got " +
                                std::to_string(table.columns.size()));
    }
    const auto n = static_cast<Eigen::Index>(table.rows());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& col = table.columns[j];
        const auto& p = schema[j];
        if (col.name != p.name) throw PredictorMismatch("predictor '" + p.name + "' expected, got '" + col.name + "'");
        if (col.kind != p.kind) throw PredictorMismatch("predictor '" + p.name + "' has the wrong type");
        if (static_cast<Eigen::Index>(col.size()) != n) throw PredictorMismatch("predictor '" + p.name + "' has the wrong length");
        const auto jj = static_cast<Eigen::Index>(j);
        if (p.kind == PredictorKind::Continuous) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double v = col.numeric[static_cast<std::size_t>(i)];
                if (!std::isfinite(v)) throw PredictorMismatch("predictor '" + p.name + "' has a non-finite value");
                x(i, jj) = v;
            }
        } else {
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& level = col.text[static_cast<std::size_t>(i)];
                const auto it = std::lower_bound(p.levels.begin(), p.levels.end(), level);
                x(i, jj) = (it != p.levels.end() && *it == level) ? static_cast<double>(it - p.levels.begin())
                                                                  : static_cast<double>(unseen_level_code(level));
            }
        }
    }
    return x;
}

// ---------------------------------------------------------------------------------------------

std::string group_label(unsigned groups) {
    std::string s;
    if (groups & kGame) s += "G";
    if (groups & kPersonnel) s += "P";
    if (groups & kLocation) s += "L";
    return s;
}

unsigned parse_groups(const std::string& text) {
    unsigned groups = 0;
    for (char c : text) {
        switch (c) {
            case 'G': case 'g': groups |= kGame; break;
            case 'P': case 'p': groups |= kPersonnel; break;
            case 'L': case 'l': groups |= kLocation; break;
            case ',': case ' ': break;
            default: throw std::invalid_argument(std::string("unknown predictor group '") + c + "'");
        }
    }
    if (groups == 0) throw std::invalid_argument("predictor group set is empty");
    return groups;
}

PitchContext context_of(const PitchRecord& r) { return {r.game_state, r.personnel, r.location}; }

namespace {

void add_game_columns(FeatureTable& t, const std::vector<const GameState*>& g) {
    auto numeric = [&](const char* name, auto getter) {
        auto& c = t.add_numeric(name);
        c.numeric.reserve(g.size());
        for (const auto* s : g) c.numeric.push_back(static_cast<double>(getter(*s)));
    };
    numeric("balls", [](const GameState& s) { return s.balls; });
    numeric("strikes", [](const GameState& s) { return s.strikes; });
    numeric("outs", [](const GameState& s) { return s.outs; });
    numeric("on_1b", [](const GameState& s) { return s.on_first; });
    numeric("on_2b", [](const GameState& s) { return s.on_second; });
    numeric("on_3b", [](const GameState& s) { return s.on_third; });
    numeric("score_diff", [](const GameState& s) { return s.score_diff; });
    numeric("inning", [](const GameState& s) { return s.inning; });
    numeric("top_inning", [](const GameState& s) { return s.top_inning; });
}

}  // namespace

FeatureTable event_features(const std::vector<PitchContext>& pitches, unsigned groups) {
    if ((groups & kAllGroups) == 0) throw std::invalid_argument("predictor group set is empty");
    FeatureTable t;
    if (groups & kGame) {
        std::vector<const GameState*> g;
        g.reserve(pitches.size());
        for (const auto& p : pitches) g.push_back(&p.game_state);
        add_game_columns(t, g);
    }
    if (groups & kPersonnel) {
        auto text = [&](const char* name, auto getter) {
            auto& c = t.add_categorical(name);
            c.text.reserve(pitches.size());
            for (const auto& p : pitches) c.text.push_back(getter(p.personnel));
        };
        text("batter", [](const Personnel& p) { return p.batter_id; });
        text("pitcher", [](const Personnel& p) { return p.pitcher_id; });
        text("catcher", [](const Personnel& p) { return p.catcher_id; });
        text("umpire", [](const Personnel& p) { return p.umpire_id; });
        text("stand", [](const Personnel& p) { return std::string(1, hand_code(p.batter_hand)); });
        text("p_throws", [](const Personnel& p) { return std::string(1, hand_code(p.pitcher_hand)); });
        auto& bq = t.add_numeric("batter_quality");
        for (const auto& p : pitches) bq.numeric.push_back(p.personnel.batter_quality);
        auto& pq = t.add_numeric("pitcher_quality");
        for (const auto& p : pitches) pq.numeric.push_back(p.personnel.pitcher_quality);
    }
    if (groups & kLocation) {
        auto& x = t.add_numeric("plate_x");
        for (const auto& p : pitches) x.numeric.push_back(p.location.plate_x);
        auto& z = t.add_numeric("plate_z");
        for (const auto& p : pitches) z.numeric.push_back(p.location.plate_z);
    }
    return t;
}

FeatureTable event_features(const std::vector<PitchRecord>& pitches, unsigned groups) {
    std::vector<PitchContext> ctx;
    ctx.reserve(pitches.size());
    for (const auto& r : pitches) ctx.push_back(context_of(r));
    return event_features(ctx, groups);
}

FeatureTable runs_features(const std::vector<RunsQuery>& queries) {
    FeatureTable t;
    std::vector<const GameState*> g;
    g.reserve(queries.size());
    for (const auto& q : queries) g.push_back(&q.game_state);
    add_game_columns(t, g);
    auto& swing = t.add_numeric("swing");
    for (const auto& q : queries) swing.numeric.push_back(q.swing ? 1.0 : 0.0);
    auto& gstate = t.add_categorical("gstate");
    for (const auto& q : queries) gstate.text.push_back(to_string(q.gstate));
    return t;
}

FeatureTable runs_features(const std::vector<PitchRecord>& pitches) {
    std::vector<RunsQuery> q;
    q.reserve(pitches.size());
    for (const auto& r : pitches) q.push_back({r.game_state, r.swing, r.gstate()});
    return runs_features(q);
}

}  // namespace xr
