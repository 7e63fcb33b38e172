#include "xr/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "xr/text.hpp"

namespace xr {

bool GameState::valid() const {
    return balls >= 0 && balls <= 3 && strikes >= 0 && strikes <= 2 && outs >= 0 && outs <= 2 &&
           inning >= 1;
}

bool Location::plausible() const {
    return std::isfinite(plate_x) && std::isfinite(plate_z) && std::fabs(plate_x) <= 5.0 &&
           plate_z >= -1.0 && plate_z <= 8.0;
}

GState PitchRecord::gstate() const {
    if (swing) return contact.value_or(false) ? GState::Contact : GState::Strike;
    return called_strike.value_or(false) ? GState::Strike : GState::Ball;
}

bool PitchRecord::consistent() const {
    if (swing != contact.has_value()) return false;
    if (swing == called_strike.has_value()) return false;
    return runs_rest_of_inning >= 0;
}

PitchRecord make_take(PitchKey key, GameState g, Personnel p, Location l, bool called_strike) {
    PitchRecord r;
    r.key = std::move(key);
    r.game_state = g;
    r.personnel = std::move(p);
    r.location = l;
    r.swing = false;
    r.called_strike = called_strike;
    return r;
}

PitchRecord make_swing(PitchKey key, GameState g, Personnel p, Location l, bool contact) {
    PitchRecord r;
    r.key = std::move(key);
    r.game_state = g;
    r.personnel = std::move(p);
    r.location = l;
    r.swing = true;
    r.contact = contact;
    return r;
}

std::string to_string(GState g) {
    switch (g) {
        case GState::Ball: return "ball";
        case GState::Strike: return "strike";
        case GState::Contact: return "contact";
    }
    return "?";
}

GState parse_gstate(const std::string& s) {
    if (s == "ball") return GState::Ball;
    if (s == "strike") return GState::Strike;
    if (s == "contact") return GState::Contact;
    throw std::invalid_argument("unknown gstate '" + s + "'");
}

char hand_code(Hand h) { return h == Hand::Left ? 'L' : 'R'; }

namespace {

std::optional<Hand> parse_hand(std::string_view s) {
    s = trim(s);
    if (s == "L") return Hand::Left;
    if (s == "R") return Hand::Right;
    return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// wOBA

double WobaConfig::prior_for(int season) const {
    const auto it = league_prior.find(season);
    return it != league_prior.end() ? it->second : default_league_prior;
}

void WobaConfig::validate() const {
    for (double w : {walk, hit_by_pitch, single, double_, triple, home_run}) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("wOBA weights must be finite and >= 0");
    }
    if (!(default_league_prior > 0.0)) throw std::invalid_argument("league prior must be > 0");
    for (const auto& [season, prior] : league_prior) {
        if (!(prior > 0.0)) throw std::invalid_argument("league prior for " + std::to_string(season) + " must be > 0");
    }
}

namespace {

enum class EventClass { Weighted, ZeroWeight, Optional, NotPlateAppearance, Unknown };

struct EventInfo {
    EventClass cls;
    double weight;
};

EventInfo classify_event(const std::string& e, const WobaConfig& c) {
    if (e == "walk") return {EventClass::Weighted, c.walk};
    if (e == "hit_by_pitch") return {EventClass::Weighted, c.hit_by_pitch};
    if (e == "single") return {EventClass::Weighted, c.single};
    if (e == "double") return {EventClass::Weighted, c.double_};
    if (e == "triple") return {EventClass::Weighted, c.triple};
    if (e == "home_run") return {EventClass::Weighted, c.home_run};
    static const std::set<std::string> zero = {
        "strikeout", "strikeout_double_play", "field_out", "force_out", "grounded_into_double_play",
        "double_play", "triple_play", "fielders_choice", "fielders_choice_out", "field_error",
        "sac_fly", "sac_fly_double_play", "other_out"};
    if (zero.count(e)) return {EventClass::ZeroWeight, 0.0};
    if (e == "intent_walk") return {c.count_intentional_walk ? EventClass::Weighted : EventClass::Optional, c.walk};
    if (e == "sac_bunt" || e == "sac_bunt_double_play")
        return {c.count_sac_bunt ? EventClass::ZeroWeight : EventClass::Optional, 0.0};
    if (e == "catcher_interf")
        return {c.count_catcher_interference ? EventClass::ZeroWeight : EventClass::Optional, 0.0};
    static const std::set<std::string> non_pa = {
        "caught_stealing_2b", "caught_stealing_3b", "caught_stealing_home", "pickoff_1b", "pickoff_2b",
        "pickoff_3b", "pickoff_caught_stealing_2b", "pickoff_caught_stealing_3b",
        "pickoff_caught_stealing_home", "stolen_base_2b", "stolen_base_3b", "stolen_base_home",
        "wild_pitch", "passed_ball", "other_advance", "runner_double_play", "truncated_pa",
        "game_advisory", "ejection", "balk", "defensive_indiff"};
    if (non_pa.count(e)) return {EventClass::NotPlateAppearance, 0.0};
    return {EventClass::Unknown, 0.0};
}

}  // namespace

std::optional<double> game_woba(const std::vector<std::string>& events, const WobaConfig& config,
                                WobaDiagnostics* diagnostics) {
    double numerator = 0.0;
    int denominator = 0;
    for (const auto& e : events) {
        const EventInfo info = classify_event(e, config);
        switch (info.cls) {
            case EventClass::Weighted:
                numerator += info.weight;
                ++denominator;
                break;
            case EventClass::ZeroWeight: ++denominator; break;
            case EventClass::Optional:
            case EventClass::NotPlateAppearance: break;
            case EventClass::Unknown:
                if (diagnostics) ++diagnostics->unknown_events[e];
                break;
        }
    }
    if (denominator == 0) return std::nullopt;
    return numerator / denominator;
}

double QualityTable::quality(const std::string& player_id, int season, const std::string& game_date,
                             std::int64_t game_pk) const {
    const auto it = games_.find({player_id, season});
    if (it == games_.end()) return config_.prior_for(season);
    double sum = 0.0;
    int count = 0;
    for (const auto& g : it->second) {
        if (std::tie(g.game_date, g.game_pk) >= std::tie(game_date, game_pk)) break;
        if (g.woba) {
            sum += *g.woba;
            ++count;
        }
    }
    return count == 0 ? config_.prior_for(season) : sum / count;
}

void QualityTable::add_game(const std::string& player_id, int season, const std::string& game_date,
                            std::int64_t game_pk, std::optional<double> woba) {
    auto& log = games_[{player_id, season}];
    GameEntry entry{game_date, game_pk, woba};
    const auto pos = std::lower_bound(log.begin(), log.end(), entry, [](const GameEntry& a, const GameEntry& b) {
        return std::tie(a.game_date, a.game_pk) < std::tie(b.game_date, b.game_pk);
    });
    log.insert(pos, std::move(entry));
}

QualityTable running_woba(const std::vector<PlateAppearance>& history, const WobaConfig& config,
                          WobaDiagnostics* diagnostics) {
    config.validate();
    struct GameKey {
        std::string player;
        int season;
        std::string date;
        std::int64_t game;
        auto operator<=>(const GameKey&) const = default;
    };
    std::map<GameKey, std::vector<std::string>> per_game;
    for (const auto& pa : history) per_game[{pa.player_id, pa.season, pa.game_date, pa.game_pk}].push_back(pa.event);

    QualityTable table;
    table.set_config(config);
    for (const auto& [key, events] : per_game) {
        table.add_game(key.player, key.season, key.date, key.game, game_woba(events, config, diagnostics));
    }
    return table;
}

// ---------------------------------------------------------------------------------------------
// Run labels

HalfInningKey half_inning_of(const PitchRecord& r) {
    return {r.key.game_pk, r.game_state.inning, r.game_state.top_inning};
}

std::map<HalfInningKey, int> final_scores_from_records(const std::vector<PitchRecord>& records) {
    std::map<HalfInningKey, int> finals;
    for (const auto& r : records) {
        const int score = std::max(r.bat_score, r.post_bat_score.value_or(r.bat_score));
        auto [it, inserted] = finals.emplace(half_inning_of(r), score);
        if (!inserted) it->second = std::max(it->second, score);
    }
    return finals;
}

void label_runs(std::vector<PitchRecord>& records, const std::map<HalfInningKey, int>& final_scores) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = records[a];
        const auto& rb = records[b];
        return std::tuple(half_inning_of(ra), ra.key.at_bat, ra.key.pitch_number) <
               std::tuple(half_inning_of(rb), rb.key.at_bat, rb.key.pitch_number);
    });
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& r = records[order[i]];
        const HalfInningKey key = half_inning_of(r);
        if (i > 0) {
            const auto& prev = records[order[i - 1]];
            if (half_inning_of(prev) == key && prev.bat_score > r.bat_score) {
                throw DataIntegrityError("non-monotone batting score in game " + std::to_string(key.game_pk) +
                                         ", inning " + std::to_string(key.inning));
            }
        }
        const auto it = final_scores.find(key);
        if (it == final_scores.end()) {
            throw DataIntegrityError("no final score for game " + std::to_string(key.game_pk) + ", inning " +
                                     std::to_string(key.inning));
        }
        if (it->second < r.bat_score) {
            throw DataIntegrityError("final score below pitch score in game " + std::to_string(key.game_pk));
        }
        r.runs_rest_of_inning = it->second - r.bat_score;
    }
}

// ---------------------------------------------------------------------------------------------
// Ingest

namespace {

const std::vector<std::string>& required_columns() {
    static const std::vector<std::string> cols = {
        "game_pk", "game_year", "at_bat_number", "pitch_number", "balls", "strikes", "outs_when_up",
        "on_1b", "on_2b", "on_3b", "inning", "inning_topbot", "bat_score", "fld_score", "batter",
        "pitcher", "fielder_2", "stand", "p_throws", "plate_x", "plate_z", "description", "events"};
    return cols;
}

const std::vector<std::string>& optional_columns() {
    static const std::vector<std::string> cols = {"post_bat_score", "game_date", "sz_top", "sz_bot"};
    return cols;
}

}  // namespace

ColumnMap::ColumnMap() {
    for (const auto& c : required_columns()) names[c] = c;
    for (const auto& c : optional_columns()) names[c] = c;
}

const std::string& ColumnMap::operator[](const std::string& logical) const {
    const auto it = names.find(logical);
    if (it == names.end()) throw SchemaError("unknown logical column '" + logical + "'");
    return it->second;
}

void ColumnMap::apply(const std::map<std::string, std::string>& overrides) {
    for (const auto& [logical, actual] : overrides) {
        if (!names.count(logical)) throw SchemaError("column map names unknown column '" + logical + "'");
        names[logical] = actual;
    }
}

std::optional<SwingOutcome> classify_description(const std::string& description, int strikes) {
    (void)strikes;  // a foul tip is a strike in every count, so the count does not change the mapping
    static const std::set<std::string> take_ball = {"ball", "blocked_ball", "intent_ball", "pitchout",
                                                    "hit_by_pitch"};
    static const std::set<std::string> swing_miss = {"swinging_strike", "swinging_strike_blocked", "foul_tip",
                                                     "missed_bunt", "bunt_foul_tip", "swinging_pitchout"};
    static const std::set<std::string> swing_contact = {"foul", "foul_bunt", "foul_pitchout", "hit_into_play",
                                                        "hit_into_play_no_out", "hit_into_play_score"};
    if (description == "called_strike") return SwingOutcome::TakeStrike;
    if (take_ball.count(description)) return SwingOutcome::TakeBall;
    if (swing_miss.count(description)) return SwingOutcome::SwingMiss;
    if (swing_contact.count(description)) return SwingOutcome::SwingContact;
    return std::nullopt;
}

std::string IngestDiagnostics::report() const {
    std::ostringstream out;
    out << "rows_read\t" << rows_read << '\n'
        << "rows_kept\t" << rows_kept << '\n'
        << "missing_location\t" << missing_location << '\n'
        << "implausible_location\t" << implausible_location << '\n'
        << "undecidable_outcome\t" << undecidable_outcome << '\n'
        << "malformed_numeric\t" << malformed_numeric << '\n'
        << "invalid_game_state\t" << invalid_game_state << '\n';
    for (const auto& [d, n] : unknown_descriptions) out << "unknown_description\t" << d << '\t' << n << '\n';
    for (const auto& [e, n] : woba.unknown_events) out << "unknown_event\t" << e << '\t' << n << '\n';
    for (const auto& m : messages) out << "message\t" << m << '\n';
    return out.str();
}

std::map<std::string, std::string> read_key_values(std::istream& source) {
    std::map<std::string, std::string> values;
    std::string line;
    int line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw SchemaError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        values[std::string(trim(view.substr(0, eq)))] = std::string(trim(view.substr(eq + 1)));
    }
    return values;
}

std::map<std::int64_t, std::string> read_umpire_table(std::istream& source) {
    std::string line;
    if (!std::getline(source, line)) throw SchemaError("umpire table is empty");
    const auto header = split_csv_line(line);
    const auto find = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("umpire table missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t game_col = find("game_pk");
    const std::size_t ump_col = find("umpire_id");
    std::map<std::int64_t, std::string> table;
    while (std::getline(source, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() <= std::max(game_col, ump_col)) continue;
        const auto game = parse_int(fields[game_col]);
        if (!game || is_missing_token(fields[ump_col])) continue;
        table[*game] = std::string(trim(fields[ump_col]));
    }
    return table;
}

ParseResult parse_statcast_csv(std::istream& source, const ColumnMap& columns,
                               const std::map<std::int64_t, std::string>* umpires, const WobaConfig& woba) {
    woba.validate();
    ParseResult result;
    auto& diag = result.diagnostics;

    std::string line;
    if (!std::getline(source, line)) throw SchemaError("input has no header row");
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[std::string(trim(header[i]))] = i;

    std::map<std::string, std::size_t> col;
    for (const auto& logical : required_columns()) {
        const std::string& actual = columns[logical];
        const auto it = index.find(actual);
        if (it == index.end()) throw SchemaError("missing required column '" + actual + "'");
        col[logical] = it->second;
    }
    for (const auto& logical : optional_columns()) {
        const auto it = index.find(columns[logical]);
        if (it != index.end()) col[logical] = it->second;
    }
    const bool has_post_score = col.count("post_bat_score") > 0;
    if (!has_post_score) diag.messages.emplace_back("post_bat_score absent: runs on a half-inning's last play are not counted");

    std::vector<PlateAppearance> batter_pas;
    std::vector<PlateAppearance> pitcher_pas;
    std::vector<PitchRecord> all_rows;  // every row with a parseable state; scores come from these
    std::vector<bool> keep;

    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++diag.rows_read;
        const auto fields = split_csv_line(line);
        const auto field = [&](const std::string& logical) -> std::string_view {
            const auto it = col.find(logical);
            if (it == col.end() || it->second >= fields.size()) return {};
            return fields[it->second];
        };
        const auto integer = [&](const std::string& logical) -> std::optional<long long> {
            return parse_int(field(logical));
        };

        PitchRecord r;
        bool malformed = false;
        const auto need_int = [&](const std::string& logical, auto& target) {
            const auto v = integer(logical);
            if (!v) malformed = true;
            else target = static_cast<std::remove_reference_t<decltype(target)>>(*v);
        };
        need_int("game_pk", r.key.game_pk);
        need_int("game_year", r.key.year);
        need_int("at_bat_number", r.key.at_bat);
        need_int("pitch_number", r.key.pitch_number);
        need_int("balls", r.game_state.balls);
        need_int("strikes", r.game_state.strikes);
        need_int("outs_when_up", r.game_state.outs);
        need_int("inning", r.game_state.inning);
        int fld_score = 0;
        need_int("bat_score", r.bat_score);
        need_int("fld_score", fld_score);
        if (malformed) {
            ++diag.malformed_numeric;
            diag.messages.push_back("line " + std::to_string(line_no) + ": malformed numeric cell");
            continue;
        }
        r.key.game_date = std::string(trim(field("game_date")));
        r.game_state.score_diff = r.bat_score - fld_score;
        r.game_state.on_first = !is_missing_token(field("on_1b"));
        r.game_state.on_second = !is_missing_token(field("on_2b"));
        r.game_state.on_third = !is_missing_token(field("on_3b"));
        const auto topbot = trim(field("inning_topbot"));
        r.game_state.top_inning = topbot == "Top" || topbot == "top" || topbot == "T";
        if (const auto post = field("post_bat_score"); !is_missing_token(post)) {
            const auto v = parse_int(post);
            if (!v) {
                ++diag.malformed_numeric;
                continue;
            }
            r.post_bat_score = static_cast<int>(*v);
        }
        r.personnel.batter_id = std::string(trim(field("batter")));
        r.personnel.pitcher_id = std::string(trim(field("pitcher")));
        r.personnel.catcher_id = std::string(trim(field("fielder_2")));
        if (is_missing_token(r.personnel.catcher_id)) r.personnel.catcher_id = "UNKNOWN";
        if (umpires) {
            const auto it = umpires->find(r.key.game_pk);
            if (it != umpires->end()) r.personnel.umpire_id = it->second;
        }
        r.event = is_missing_token(field("events")) ? std::string() : std::string(trim(field("events")));

        if (!r.game_state.valid() || r.personnel.batter_id.empty() || r.personnel.pitcher_id.empty()) {
            ++diag.invalid_game_state;
            continue;
        }
        const auto bh = parse_hand(field("stand"));
        const auto ph = parse_hand(field("p_throws"));
        if (!bh || !ph) {
            ++diag.invalid_game_state;
            continue;
        }
        r.personnel.batter_hand = *bh;
        r.personnel.pitcher_hand = *ph;

        if (!r.event.empty()) {
            batter_pas.push_back({r.personnel.batter_id, r.key.game_pk, r.key.year, r.key.game_date, r.event});
            pitcher_pas.push_back({r.personnel.pitcher_id, r.key.game_pk, r.key.year, r.key.game_date, r.event});
        }

        bool usable = true;
        const auto px = field("plate_x");
        const auto pz = field("plate_z");
        if (is_missing_token(px) || is_missing_token(pz)) {
            ++diag.missing_location;
            usable = false;
        } else {
            const auto x = parse_double(px);
            const auto z = parse_double(pz);
            if (!x || !z) {
                ++diag.malformed_numeric;
                usable = false;
            } else {
                r.location = {*x, *z};
                if (!r.location.plausible()) {
                    ++diag.implausible_location;
                    usable = false;
                }
            }
        }
        for (const char* name : {"sz_top", "sz_bot"}) {
            const auto v = field(name);
            if (!is_missing_token(v)) {
                if (const auto d = parse_double(v)) (std::string(name) == "sz_top" ? r.sz_top : r.sz_bot) = *d;
            }
        }
        if (usable) {
            const std::string description(trim(field("description")));
            const auto outcome = classify_description(description, r.game_state.strikes);
            if (!outcome) {
                ++diag.undecidable_outcome;
                ++diag.unknown_descriptions[description];
                usable = false;
            } else {
                r.swing = *outcome == SwingOutcome::SwingMiss || *outcome == SwingOutcome::SwingContact;
                if (r.swing) r.contact = *outcome == SwingOutcome::SwingContact;
                else r.called_strike = *outcome == SwingOutcome::TakeStrike;
            }
        }
        all_rows.push_back(std::move(r));
        keep.push_back(usable);
    }

    const auto finals = final_scores_from_records(all_rows);
    label_runs(all_rows, finals);

    const QualityTable batters = running_woba(batter_pas, woba, &diag.woba);
    const QualityTable pitchers = running_woba(pitcher_pas, woba, nullptr);
    for (std::size_t i = 0; i < all_rows.size(); ++i) {
        if (!keep[i]) continue;
        auto& r = all_rows[i];
        r.personnel.batter_quality = batters.quality(r.personnel.batter_id, r.key.year, r.key.game_date, r.key.game_pk);
        r.personnel.pitcher_quality =
            pitchers.quality(r.personnel.pitcher_id, r.key.year, r.key.game_date, r.key.game_pk);
        result.records.push_back(std::move(r));
    }
    diag.rows_kept = result.records.size();
    return result;
}

// ---------------------------------------------------------------------------------------------
// Partition

Partition partition(const std::vector<PitchRecord>& records, int evaluation_year, YearRange runs_years) {
    Partition out;
    for (const auto& r : records) {
        if (r.key.year == evaluation_year) {
            (r.swing ? out.swings : out.takes).push_back(r);
        } else if (runs_years.contains(r.key.year)) {
            out.runs_train.push_back(r);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Cache

namespace {

const std::vector<std::string>& cache_columns() {
    static const std::vector<std::string> cols = {
        "game_pk", "at_bat", "pitch_number", "year", "game_date", "balls", "strikes", "outs", "on_1b", "on_2b",
        "on_3b", "score_diff", "inning", "top", "batter", "pitcher", "catcher", "umpire", "stand", "p_throws",
        "batter_quality", "pitcher_quality", "plate_x", "plate_z", "swing", "contact", "called_strike", "runs",
        "bat_score", "post_bat_score", "sz_top", "sz_bot", "event"};
    return cols;
}

void check_text(const std::string& s) {
    if (s.find_first_of("\t\n\r") != std::string::npos) {
        throw std::invalid_argument("cache text field contains a tab or newline: '" + s + "'");
    }
}

std::string opt_bool(const std::optional<bool>& b) { return b ? (*b ? "1" : "0") : ""; }

}  // namespace

void write_cache(std::ostream& out, const std::vector<PitchRecord>& records) {
    out << kCacheMagic << '\t' << kCacheVersion << '\n';
    const auto& cols = cache_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "\t" : "") << cols[i];
    out << '\n';
    for (const auto& r : records) {
        for (const auto* s : {&r.key.game_date, &r.personnel.batter_id, &r.personnel.pitcher_id,
                              &r.personnel.catcher_id, &r.personnel.umpire_id, &r.event}) {
            check_text(*s);
        }
        const auto& g = r.game_state;
        const auto& p = r.personnel;
        out << r.key.game_pk << '\t' << r.key.at_bat << '\t' << r.key.pitch_number << '\t' << r.key.year << '\t'
            << r.key.game_date << '\t' << g.balls << '\t' << g.strikes << '\t' << g.outs << '\t' << g.on_first
            << '\t' << g.on_second << '\t' << g.on_third << '\t' << g.score_diff << '\t' << g.inning << '\t'
            << g.top_inning << '\t' << p.batter_id << '\t' << p.pitcher_id << '\t' << p.catcher_id << '\t'
            << p.umpire_id << '\t' << hand_code(p.batter_hand) << '\t' << hand_code(p.pitcher_hand) << '\t'
            << format_double(p.batter_quality) << '\t' << format_double(p.pitcher_quality) << '\t'
            << format_double(r.location.plate_x) << '\t' << format_double(r.location.plate_z) << '\t'
            << (r.swing ? 1 : 0) << '\t' << opt_bool(r.contact) << '\t' << opt_bool(r.called_strike) << '\t'
            << r.runs_rest_of_inning << '\t' << r.bat_score << '\t'
            << (r.post_bat_score ? std::to_string(*r.post_bat_score) : "") << '\t'
            << (r.sz_top ? format_double(*r.sz_top) : "") << '\t' << (r.sz_bot ? format_double(*r.sz_bot) : "")
            << '\t' << r.event << '\n';
    }
}

std::vector<PitchRecord> read_cache(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("cache file is empty");
    const auto magic = split(line, '\t');
    if (magic.size() != 2 || magic[0] != kCacheMagic) throw SchemaError("not a pitch cache file");
    if (parse_int(magic[1]) != kCacheVersion) throw SchemaError("unsupported pitch cache version " + magic[1]);
    if (!std::getline(in, line)) throw SchemaError("cache file has no column header");
    if (split(line, '\t') != cache_columns()) throw SchemaError("cache column header mismatch");

    std::vector<PitchRecord> records;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() != cache_columns().size()) {
            throw SchemaError("cache line " + std::to_string(line_no) + ": wrong field count");
        }
        const auto bad = [&](const std::string& what) {
            return SchemaError("cache line " + std::to_string(line_no) + ": bad " + what);
        };
        const auto i64 = [&](std::size_t k) {
            const auto v = parse_int(f[k]);
            if (!v) throw bad(cache_columns()[k]);
            return *v;
        };
        const auto real = [&](std::size_t k) {
            const auto v = parse_double(f[k]);
            if (!v) throw bad(cache_columns()[k]);
            return *v;
        };
        const auto obool = [&](std::size_t k) -> std::optional<bool> {
            if (f[k].empty()) return std::nullopt;
            return i64(k) != 0;
        };
        PitchRecord r;
        r.key.game_pk = i64(0);
        r.key.at_bat = static_cast<int>(i64(1));
        r.key.pitch_number = static_cast<int>(i64(2));
        r.key.year = static_cast<int>(i64(3));
        r.key.game_date = f[4];
        auto& g = r.game_state;
        g.balls = static_cast<int>(i64(5));
        g.strikes = static_cast<int>(i64(6));
        g.outs = static_cast<int>(i64(7));
        g.on_first = i64(8) != 0;
        g.on_second = i64(9) != 0;
        g.on_third = i64(10) != 0;
        g.score_diff = static_cast<int>(i64(11));
        g.inning = static_cast<int>(i64(12));
        g.top_inning = i64(13) != 0;
        auto& p = r.personnel;
        p.batter_id = f[14];
        p.pitcher_id = f[15];
        p.catcher_id = f[16];
        p.umpire_id = f[17];
        const auto bh = parse_hand(f[18]);
        const auto ph = parse_hand(f[19]);
        if (!bh || !ph) throw bad("handedness");
        p.batter_hand = *bh;
        p.pitcher_hand = *ph;
        p.batter_quality = real(20);
        p.pitcher_quality = real(21);
        r.location = {real(22), real(23)};
        r.swing = i64(24) != 0;
        r.contact = obool(25);
        r.called_strike = obool(26);
        r.runs_rest_of_inning = static_cast<int>(i64(27));
        r.bat_score = static_cast<int>(i64(28));
        if (!f[29].empty()) r.post_bat_score = static_cast<int>(i64(29));
        if (!f[30].empty()) r.sz_top = real(30);
        if (!f[31].empty()) r.sz_bot = real(31);
        r.event = f[32];
        if (!r.consistent() || !g.valid()) throw bad("record (inconsistent fields)");
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace xr
