#include "xr/service.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "xr/random.hpp"
#include "xr/special.hpp"
#include "xr/text.hpp"

namespace xr {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

namespace {

std::string cache_text(const std::vector<PitchRecord>& records) {
    std::ostringstream os;
    write_cache(os, records);
    return os.str();
}

}  // namespace

std::string dataset_fingerprint(const std::vector<PitchRecord>& records) { return hex64(fnv1a(cache_text(records))); }

std::string dataset_digest(const std::vector<PitchRecord>& records) {
    const std::string text = cache_text(records);
    return hex64(fnv1a(text, 0x84222325cbf29ce4ULL)) + ":" + std::to_string(records.size()) + ":" +
           std::to_string(text.size());
}

std::string config_hash(const Json& config) { return hex64(fnv1a(config.dump())).substr(0, 12); }

std::string ModelKey::file_name() const { return kind + "-" + fingerprint + "-" + config_hash + ".json"; }

fs::path ModelStore::store(const ModelKey& key, const Json& payload, const std::string& digest,
                           std::map<std::string, std::string> info) const {
    for (const auto* part : {&key.kind, &key.fingerprint, &key.config_hash}) {
        if (part->empty() || part->find('-') != std::string::npos || part->find('/') != std::string::npos) {
            throw ModelStoreError("model key parts must be nonempty and free of '-' and '/'");
        }
    }
    const fs::path path = path_of(key);
    if (fs::exists(path)) {
        const ModelEnvelope existing = load_envelope(path);
        const auto it = existing.info.find("dataset_digest");
        if (it == existing.info.end() || it->second != digest) {
            throw ModelStoreError("dataset fingerprint collision for " + path.string() +
                                  ": stored model was fit on different data");
        }
        if (existing.payload != payload) {
            throw ModelStoreError("refusing to replace " + path.string() + " with a different model");
        }
        return path;
    }
    info["fingerprint"] = key.fingerprint;
    info["config_hash"] = key.config_hash;
    info["dataset_digest"] = digest;
    save_envelope(path, ModelEnvelope{key.kind, std::move(info), payload});
    return path;
}

ModelEnvelope ModelStore::load(const ModelKey& key) const {
    const fs::path path = path_of(key);
    if (!fs::exists(path)) throw ModelStoreError("no stored model " + path.string());
    ModelEnvelope e = load_envelope(path);
    if (e.kind != key.kind || e.info["fingerprint"] != key.fingerprint || e.info["config_hash"] != key.config_hash) {
        throw ModelFormatError(path.string() + ": contents do not match the file name");
    }
    return e;
}

std::vector<ModelKey> ModelStore::list() const {
    std::vector<ModelKey> keys;
    if (!fs::is_directory(dir_)) return keys;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        const auto parts = split(entry.path().stem().string(), '-');
        if (parts.size() != 3) continue;
        keys.push_back({parts[0], parts[1], parts[2]});
    }
    std::sort(keys.begin(), keys.end(), [](const ModelKey& a, const ModelKey& b) {
        return a.file_name() < b.file_name();
    });
    return keys;
}

ModelKey ModelStore::find(const std::string& kind) const {
    std::vector<ModelKey> hits;
    for (auto& k : list()) {
        if (k.kind == kind) hits.push_back(k);
    }
    if (hits.empty()) throw ModelStoreError("no '" + kind + "' model in " + dir_.string());
    if (hits.size() > 1) {
        std::string names;
        for (const auto& k : hits) names += " " + k.file_name();
        throw ModelStoreError("several '" + kind + "' models in " + dir_.string() + ":" + names);
    }
    return hits.front();
}

// ---------------------------------------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

Hand parse_hand(const std::string& s) {
    if (s == "L") return Hand::Left;
    if (s == "R") return Hand::Right;
    throw ServiceError("bad_request", "hand must be \"L\" or \"R\", got \"" + s + "\"", 400);
}

struct PlayerAcc {
    std::vector<double> quality;
    int left = 0, right = 0;
};

std::map<std::string, RosterEntry> finish(std::map<std::string, PlayerAcc>& acc) {
    std::map<std::string, RosterEntry> out;
    for (auto& [id, a] : acc) out[id] = {a.left > a.right ? Hand::Left : Hand::Right, median(a.quality)};
    return out;
}

Json entries_json(const std::map<std::string, RosterEntry>& m) {
    Json j = Json::object();
    for (const auto& [id, e] : m) j[id] = Json{{"hand", std::string(1, hand_code(e.hand))}, {"quality", e.quality}};
    return j;
}

std::map<std::string, RosterEntry> entries_from_json(const Json& j) {
    std::map<std::string, RosterEntry> m;
    for (const auto& [id, e] : j.items()) m[id] = {parse_hand(e.at("hand").get<std::string>()), e.at("quality").get<double>()};
    return m;
}

}  // namespace

Roster build_roster(const std::vector<PitchRecord>& records) {
    std::map<std::string, PlayerAcc> b, p;
    std::vector<double> bq, pq;
    for (const auto& r : records) {
        auto& ba = b[r.personnel.batter_id];
        ba.quality.push_back(r.personnel.batter_quality);
        (r.personnel.batter_hand == Hand::Left ? ba.left : ba.right)++;
        auto& pa = p[r.personnel.pitcher_id];
        pa.quality.push_back(r.personnel.pitcher_quality);
        (r.personnel.pitcher_hand == Hand::Left ? pa.left : pa.right)++;
        bq.push_back(r.personnel.batter_quality);
        pq.push_back(r.personnel.pitcher_quality);
    }
    Roster roster;
    roster.batters = finish(b);
    roster.pitchers = finish(p);
    roster.median_batter_quality = median(bq);
    roster.median_pitcher_quality = median(pq);
    return roster;
}

Json to_json(const Roster& r) {
    return Json{{"batters", entries_json(r.batters)},
                {"pitchers", entries_json(r.pitchers)},
                {"median_batter_quality", r.median_batter_quality},
                {"median_pitcher_quality", r.median_pitcher_quality}};
}

Roster roster_from_json(const Json& j) {
    try {
        Roster r;
        r.batters = entries_from_json(j.at("batters"));
        r.pitchers = entries_from_json(j.at("pitchers"));
        r.median_batter_quality = j.at("median_batter_quality").get<double>();
        r.median_pitcher_quality = j.at("median_pitcher_quality").get<double>();
        return r;
    } catch (const Json::exception& e) {
        throw ModelFormatError(std::string("malformed roster: ") + e.what());
    }
}

ModelSet load_model_set(const ModelStore& store) {
    ModelSet m;
    m.strike = ensemble_from_json(store.load(store.find(model_kind::kStrikeModel)).payload);
    m.contact = ensemble_from_json(store.load(store.find(model_kind::kContactModel)).payload);
    m.runs = ensemble_from_json(store.load(store.find(model_kind::kRunsModel)).payload);
    m.roster = roster_from_json(store.load(store.find(model_kind::kRoster)).payload);
    return m;
}

PosteriorEnsemble fit_component(const std::vector<PitchRecord>& records, CvTarget target, const EnsembleConfig& config,
                                unsigned groups) {
    const CvDataset data = make_cv_dataset(records, target);
    if (data.rows.empty()) throw std::invalid_argument("no " + to_string(target) + " rows to fit");
    PosteriorEnsemble e;
    if (target == CvTarget::Runs) {
        e = fit(runs_features(data.rows), data.labels, ResponseMode::Regression, config);
    } else {
        e = fit(event_features(data.rows, groups), data.labels, ResponseMode::Probit, config);
        e.metadata["feature_groups"] = static_cast<double>(groups);
    }
    const Roster roster = build_roster(records);
    e.metadata["median_batter_quality"] = roster.median_batter_quality;
    e.metadata["median_pitcher_quality"] = roster.median_pitcher_quality;
    e.metadata["rows"] = static_cast<double>(data.rows.size());
    return e;
}

const char* component_kind(CvTarget target) {
    switch (target) {
        case CvTarget::Strike: return model_kind::kStrikeModel;
        case CvTarget::Contact: return model_kind::kContactModel;
        case CvTarget::Runs: return model_kind::kRunsModel;
    }
    return "";
}

std::vector<int> subsample_draws(int available, int wanted, std::uint64_t seed) {
    if (available < 1 || wanted < 1) throw std::invalid_argument("draw subsample sizes must be positive");
    std::vector<int> idx(static_cast<std::size_t>(available));
    std::iota(idx.begin(), idx.end(), 0);
    if (wanted >= available) return idx;
    Rng rng(seed);
    for (int i = 0; i < wanted; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.index(static_cast<std::size_t>(available - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(wanted));
    std::sort(idx.begin(), idx.end());
    return idx;
}

// ---------------------------------------------------------------------------------------------

double GridSpec::x(int i) const { return nx == 1 ? 0.5 * (x_lo + x_hi) : x_lo + (x_hi - x_lo) * i / (nx - 1); }
double GridSpec::z(int j) const { return nz == 1 ? 0.5 * (z_lo + z_hi) : z_lo + (z_hi - z_lo) * j / (nz - 1); }

void WhatIfQuery::validate() const {
    const auto bad = [](const std::string& m) { return ServiceError("bad_request", m, 400); };
    if (!game_state.valid()) throw bad("invalid game state");
    if (draws < 1) throw bad("draws must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw bad("level must be in (0, 1)");
    if (location) {
        if (!location->plausible()) throw bad("location outside the plausible plate region");
        return;
    }
    if (grid.nx < 1 || grid.nz < 1 || grid.nx > kMaxGridSide || grid.nz > kMaxGridSide) {
        throw bad("grid resolution must be between 1x1 and " + std::to_string(kMaxGridSide) + "x" +
                  std::to_string(kMaxGridSide));
    }
    if (!(grid.x_lo <= grid.x_hi && grid.z_lo <= grid.z_hi)) throw bad("grid ranges must be ordered");
    if (!Location{grid.x_lo, grid.z_lo}.plausible() || !Location{grid.x_hi, grid.z_hi}.plausible()) {
        throw bad("grid extends outside the plausible plate region");
    }
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
    return s.empty() ? "(none)" : s;
}

template <typename Map>
std::vector<std::string> keys_of(const Map& m) {
    std::vector<std::string> k;
    for (const auto& [id, v] : m) k.push_back(id);
    return k;
}

void resolve_player(const PlayerSpec& spec, const std::map<std::string, RosterEntry>& known, double median_quality,
                    const char* role, std::string& id, Hand& hand, double& quality) {
    id = spec.id;
    if (const auto it = known.find(spec.id); it != known.end()) {
        hand = spec.hand.value_or(it->second.hand);
        quality = spec.quality.value_or(it->second.quality);
        return;
    }
    if (spec.id != "generic" && !spec.hand) {
        throw ServiceError("unknown_player", std::string("unknown ") + role + " '" + spec.id +
                                                 "'; give \"generic\" fallback fields or use one of: " + join_ids(keys_of(known)),
                           404);
    }
    if (!spec.hand) throw ServiceError("bad_request", std::string("generic ") + role + " needs a hand", 400);
    hand = *spec.hand;
    quality = spec.quality.value_or(median_quality);
}

void check_level(const PosteriorEnsemble& e, const char* predictor, const std::string& id) {
    if (id == "generic") return;
    for (const auto& p : e.schema.predictors) {
        if (p.name != predictor) continue;
        if (std::find(p.levels.begin(), p.levels.end(), id) == p.levels.end()) {
            throw ServiceError("unknown_player", std::string("unknown ") + predictor + " '" + id +
                                                     "'; use \"generic\" or one of: " + join_ids(p.levels),
                               404);
        }
        return;
    }
}

}  // namespace

Personnel resolve_personnel(const WhatIfQuery& q, const ModelSet& m) {
    Personnel p;
    resolve_player(q.batter, m.roster.batters, m.roster.median_batter_quality, "batter", p.batter_id, p.batter_hand,
                   p.batter_quality);
    resolve_player(q.pitcher, m.roster.pitchers, m.roster.median_pitcher_quality, "pitcher", p.pitcher_id,
                   p.pitcher_hand, p.pitcher_quality);
    check_level(m.strike, "catcher", q.catcher_id);
    check_level(m.strike, "umpire", q.umpire_id);
    p.catcher_id = q.catcher_id;
    p.umpire_id = q.umpire_id;
    return p;
}

WhatIfGrid handle_whatif(const WhatIfQuery& q, const Personnel& personnel, const ComponentModels& models) {
    q.validate();
    WhatIfGrid g;
    std::vector<PitchContext> ctx;
    if (q.location) {
        ctx.push_back({q.game_state, personnel, *q.location});
    } else {
        g.nx = q.grid.nx;
        g.nz = q.grid.nz;
        ctx.reserve(static_cast<std::size_t>(g.nx * g.nz));
        for (int j = 0; j < g.nz; ++j) {
            for (int i = 0; i < g.nx; ++i) ctx.push_back({q.game_state, personnel, {q.grid.x(i), q.grid.z(j)}});
        }
    }
    ScoreOptions opts;
    opts.level = q.level;
    const ScoredPitches s = score_pitches(models, ctx, {}, opts);
    g.draws = static_cast<int>(s.draws);
    g.cells.reserve(ctx.size());
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        const auto& d = s.summaries[i];
        g.cells.push_back({ctx[i].location, d.mean, d.lower, d.upper, d.p_swing_optimal, d.optimal, s.components[i]});
    }
    return g;
}

WhatIfGrid handle_whatif(const WhatIfQuery& q, const ModelSet& m) {
    q.validate();
    const Personnel personnel = resolve_personnel(q, m);
    ComponentModels models;
    models.strike = event_component(m.strike, subsample_draws(static_cast<int>(m.strike.draw_count()), q.draws, mix64(q.seed ^ 1)));
    models.contact = event_component(m.contact, subsample_draws(static_cast<int>(m.contact.draw_count()), q.draws, mix64(q.seed ^ 2)));
    models.runs = runs_component(m.runs, subsample_draws(static_cast<int>(m.runs.draw_count()), q.draws, mix64(q.seed ^ 3)));
    return handle_whatif(q, personnel, models);
}

// ---------------------------------------------------------------------------------------------

namespace {

const std::vector<std::string> kScoredColumns = {
    "game_pk", "at_bat", "pitch_number", "year", "game_date", "batter", "balls", "strikes", "outs", "on_1b", "on_2b",
    "on_3b", "score_diff", "inning", "top_inning", "plate_x", "plate_z", "sz_top", "sz_bot", "actual", "evdiff_mean",
    "evdiff_lower", "evdiff_upper", "p_swing_optimal", "optimal", "panel", "p_strike", "p_contact", "xr_contact",
    "xr_miss", "xr_strike", "xr_ball"};

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

Panel panel_from_code(const std::string& s) {
    if (s.size() == 1 && s[0] >= 'a' && s[0] <= 'd') return static_cast<Panel>(s[0] - 'a');
    throw std::runtime_error("bad panel code '" + s + "'");
}

}  // namespace

ScoredStore score_records(const ModelSet& models, const std::vector<PitchRecord>& records, const ScoreOptions& options) {
    ComponentModels c{event_component(models.strike), event_component(models.contact), runs_component(models.runs)};
    const ScoredPitches s = score_pitches(c, records, options);
    ScoredStore out;
    out.level = options.level;
    out.evdiff.resize(static_cast<Eigen::Index>(records.size()), s.draws);
    out.pitches.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        out.pitches.push_back(make_scored_pitch(records[i], s.summaries[i], s.components[i]));
        out.evdiff.row(static_cast<Eigen::Index>(i)) = s.summaries[i].evdiff.transpose();
    }
    return out;
}

void write_scored_pitches(std::ostream& out, const std::vector<ScoredPitch>& pitches) {
    for (std::size_t i = 0; i < kScoredColumns.size(); ++i) out << (i ? "\t" : "") << kScoredColumns[i];
    out << '\n';
    for (const auto& p : pitches) {
        const auto& g = p.game_state;
        const auto& c = p.components;
        out << p.key.game_pk << '\t' << p.key.at_bat << '\t' << p.key.pitch_number << '\t' << p.key.year << '\t'
            << (p.key.game_date.empty() ? "NA" : p.key.game_date) << '\t' << p.batter_id << '\t' << g.balls << '\t'
            << g.strikes << '\t' << g.outs << '\t' << g.on_first << '\t' << g.on_second << '\t' << g.on_third << '\t'
            << g.score_diff << '\t' << g.inning << '\t' << g.top_inning << '\t' << format_double(p.location.plate_x)
            << '\t' << format_double(p.location.plate_z) << '\t' << opt_text(p.sz_top) << '\t' << opt_text(p.sz_bot)
            << '\t' << to_string(p.actual) << '\t' << format_double(p.mean) << '\t' << format_double(p.lower) << '\t'
            << format_double(p.upper) << '\t' << format_double(p.p_swing_optimal) << '\t' << to_string(p.optimal)
            << '\t' << panel_code(p.panel) << '\t' << format_double(c.p_strike) << '\t' << format_double(c.p_contact)
            << '\t' << format_double(c.xr_contact) << '\t' << format_double(c.xr_miss) << '\t'
            << format_double(c.xr_strike) << '\t' << format_double(c.xr_ball) << '\n';
    }
}

std::vector<ScoredPitch> read_scored_pitches(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split(line, '\t') != kScoredColumns) {
        throw std::runtime_error("scored-pitch table has an unexpected header");
    }
    std::vector<ScoredPitch> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        const auto fail = [&](const std::string& what) {
            return std::runtime_error("scored-pitch table line " + std::to_string(row) + ": " + what);
        };
        if (f.size() != kScoredColumns.size()) throw fail("expected " + std::to_string(kScoredColumns.size()) + " fields");
        const auto integer = [&](std::size_t i) {
            const auto v = parse_int(f[i]);
            if (!v) throw fail("bad integer in " + kScoredColumns[i]);
            return *v;
        };
        const auto real = [&](std::size_t i) {
            const auto v = parse_double(f[i]);
            if (!v) throw fail("bad number in " + kScoredColumns[i]);
            return *v;
        };
        const auto maybe = [&](std::size_t i) -> std::optional<double> {
            if (f[i] == "NA") return std::nullopt;
            return real(i);
        };
        ScoredPitch p;
        p.key = {integer(0), static_cast<int>(integer(1)), static_cast<int>(integer(2)), static_cast<int>(integer(3)),
                 f[4] == "NA" ? std::string() : f[4]};
        p.batter_id = f[5];
        auto& g = p.game_state;
        g.balls = static_cast<int>(integer(6));
        g.strikes = static_cast<int>(integer(7));
        g.outs = static_cast<int>(integer(8));
        g.on_first = integer(9) != 0;
        g.on_second = integer(10) != 0;
        g.on_third = integer(11) != 0;
        g.score_diff = static_cast<int>(integer(12));
        g.inning = static_cast<int>(integer(13));
        g.top_inning = integer(14) != 0;
        p.location = {real(15), real(16)};
        p.sz_top = maybe(17);
        p.sz_bot = maybe(18);
        try {
            p.actual = parse_decision(f[19]);
            p.optimal = parse_decision(f[24]);
            p.panel = panel_from_code(f[25]);
        } catch (const std::exception& e) {
            throw fail(e.what());
        }
        p.mean = real(20);
        p.lower = real(21);
        p.upper = real(22);
        p.p_swing_optimal = real(23);
        p.components = {real(26), real(27), real(28), real(29), real(30), real(31)};
        out.push_back(std::move(p));
    }
    return out;
}

static_assert(std::endian::native == std::endian::little, "draw dumps are written in host byte order");

void write_draws(std::ostream& out, const Eigen::MatrixXd& m) {
    out.write("XRDRAWS1", 8);
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
    if (!out) throw std::runtime_error("failed writing draw dump");
}

Eigen::MatrixXd read_draws(std::istream& in) {
    char magic[8];
    std::uint64_t dims[2];
    if (!in.read(magic, 8) || std::memcmp(magic, "XRDRAWS1", 8) != 0) throw std::runtime_error("not a draw dump");
    if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw std::runtime_error("truncated draw dump header");
    if (dims[0] > (1ULL << 32) || dims[1] > (1ULL << 32)) throw std::runtime_error("implausible draw dump size");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(static_cast<Eigen::Index>(dims[0]),
                                                                               static_cast<Eigen::Index>(dims[1]));
    if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()))) {
        throw std::runtime_error("truncated draw dump");
    }
    return rm;
}

BatterReportResponse handle_batter_report(const ScoredStore& store, const std::string& batter_id, int season) {
    std::vector<Eigen::Index> rows;
    BatterReportResponse r;
    for (std::size_t i = 0; i < store.pitches.size(); ++i) {
        const auto& p = store.pitches[i];
        if (p.batter_id == batter_id && p.key.year == season) {
            rows.push_back(static_cast<Eigen::Index>(i));
            r.pitches.push_back(p);
        }
    }
    if (rows.empty()) {
        throw ServiceError("not_found", "no scored pitches for batter '" + batter_id + "' in " + std::to_string(season), 404);
    }
    const Eigen::MatrixXd ev = store.evdiff(rows, Eigen::all);
    r.report = batter_report(batter_id, season, r.pitches, ev, store.zone, store.min_pitches, store.level);
    return r;
}

std::vector<BatterListing> list_batters(const ScoredStore& store, std::size_t min_pitches) {
    std::map<std::pair<std::string, int>, std::size_t> counts;
    for (const auto& p : store.pitches) ++counts[{p.batter_id, p.key.year}];
    std::vector<BatterListing> out;
    for (const auto& [k, n] : counts) {
        if (n >= min_pitches) out.push_back({k.first, k.second, n});
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

Json components_json(const PitchComponents& c) {
    return Json{{"p_strike", c.p_strike},     {"p_contact", c.p_contact}, {"xr_contact", c.xr_contact},
                {"xr_miss", c.xr_miss},       {"xr_strike", c.xr_strike}, {"xr_ball", c.xr_ball}};
}

Json summary_json(const MetricSummary& m) { return Json{{"mean", m.mean}, {"lower", m.lower}, {"upper", m.upper}}; }

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json game_state_json(const GameState& g) {
    return Json{{"balls", g.balls},         {"strikes", g.strikes},       {"outs", g.outs},
                {"on_1b", g.on_first},      {"on_2b", g.on_second},       {"on_3b", g.on_third},
                {"score_diff", g.score_diff}, {"inning", g.inning},       {"top_inning", g.top_inning}};
}

void check_fields(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
    if (!j.is_object()) throw ServiceError("bad_request", what + " must be an object", 400);
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ServiceError("bad_request", "unknown field '" + k + "' in " + what, 400);
    }
}

template <typename T>
void read_field(const Json& j, const char* name, T& out) {
    if (j.contains(name)) out = j.at(name).get<T>();
}

PlayerSpec player_from_json(const Json& j, const std::string& what) {
    PlayerSpec p;
    if (j.is_string()) {
        p.id = j.get<std::string>();
        return p;
    }
    check_fields(j, {"id", "hand", "quality"}, what);
    read_field(j, "id", p.id);
    if (j.contains("hand")) p.hand = parse_hand(j.at("hand").get<std::string>());
    if (j.contains("quality")) p.quality = j.at("quality").get<double>();
    return p;
}

}  // namespace

Json to_json(const WhatIfGrid& g) {
    Json cells = Json::array();
    for (const auto& c : g.cells) {
        Json cell{{"plate_x", c.location.plate_x},
                  {"plate_z", c.location.plate_z},
                  {"evdiff_mean", c.mean},
                  {"evdiff_lower", c.lower},
                  {"evdiff_upper", c.upper},
                  {"p_swing_optimal", c.p_swing_optimal},
                  {"xr_optimal", to_string(c.optimal)}};
        cell.update(components_json(c.components));
        cells.push_back(std::move(cell));
    }
    return Json{{"nx", g.nx}, {"nz", g.nz}, {"draws", g.draws}, {"cells", std::move(cells)}};
}

WhatIfQuery whatif_query_from_json(const Json& j) {
    try {
        WhatIfQuery q;
        check_fields(j, {"game_state", "batter", "pitcher", "catcher", "umpire", "location", "grid", "draws", "seed", "level"},
                     "query");
        if (j.contains("game_state")) {
            const Json& g = j.at("game_state");
            check_fields(g, {"balls", "strikes", "outs", "on_1b", "on_2b", "on_3b", "score_diff", "inning", "top_inning"},
                         "game_state");
            auto& s = q.game_state;
            read_field(g, "balls", s.balls);
            read_field(g, "strikes", s.strikes);
            read_field(g, "outs", s.outs);
            read_field(g, "on_1b", s.on_first);
            read_field(g, "on_2b", s.on_second);
            read_field(g, "on_3b", s.on_third);
            read_field(g, "score_diff", s.score_diff);
            read_field(g, "inning", s.inning);
            read_field(g, "top_inning", s.top_inning);
        }
        if (j.contains("batter")) q.batter = player_from_json(j.at("batter"), "batter");
        if (j.contains("pitcher")) q.pitcher = player_from_json(j.at("pitcher"), "pitcher");
        read_field(j, "catcher", q.catcher_id);
        read_field(j, "umpire", q.umpire_id);
        if (j.contains("location")) {
            const Json& l = j.at("location");
            check_fields(l, {"plate_x", "plate_z"}, "location");
            q.location = Location{l.at("plate_x").get<double>(), l.at("plate_z").get<double>()};
        }
        if (j.contains("grid")) {
            if (q.location) throw ServiceError("bad_request", "give either location or grid, not both", 400);
            const Json& g = j.at("grid");
            check_fields(g, {"x_lo", "x_hi", "z_lo", "z_hi", "nx", "nz"}, "grid");
            read_field(g, "x_lo", q.grid.x_lo);
            read_field(g, "x_hi", q.grid.x_hi);
            read_field(g, "z_lo", q.grid.z_lo);
            read_field(g, "z_hi", q.grid.z_hi);
            read_field(g, "nx", q.grid.nx);
            read_field(g, "nz", q.grid.nz);
        }
        read_field(j, "draws", q.draws);
        read_field(j, "seed", q.seed);
        read_field(j, "level", q.level);
        return q;
    } catch (const Json::exception& e) {
        throw ServiceError("bad_request", std::string("malformed query: ") + e.what(), 400);
    }
}

Json to_json(const BatterReport& r) {
    Json panels = Json::object();
    for (int p = 0; p < 4; ++p) {
        panels[std::string(1, panel_code(static_cast<Panel>(p)))] =
            Json{{"count", r.panels.count[static_cast<std::size_t>(p)]}, {"sum", r.panels.sum[static_cast<std::size_t>(p)]}};
    }
    const auto& t = r.traditional;
    return Json{{"batter_id", r.batter_id},
                {"season", r.season},
                {"pitches", r.pitches},
                {"qualified", r.qualified},
                {"proportion_optimal", summary_json(r.proportion_optimal)},
                {"runs_added", summary_json(r.runs_added)},
                {"runs_lost", summary_json(r.runs_lost)},
                {"runs_added_per_pitch", r.runs_added_per_pitch()},
                {"runs_lost_per_pitch", r.runs_lost_per_pitch()},
                {"point", Json{{"proportion_optimal", r.proportion_optimal_point},
                               {"runs_added", r.runs_added_point},
                               {"runs_lost", r.runs_lost_point}}},
                {"panels", std::move(panels)},
                {"traditional", Json{{"o_swing", optional_json(t.o_swing)},
                                     {"z_swing", optional_json(t.z_swing)},
                                     {"correct", t.correct},
                                     {"in_zone", t.in_zone},
                                     {"out_of_zone", t.out_of_zone}}}};
}

Json to_json(const ScoredPitch& p) {
    Json j{{"game_pk", p.key.game_pk},
           {"at_bat", p.key.at_bat},
           {"pitch_number", p.key.pitch_number},
           {"game_state", game_state_json(p.game_state)},
           {"plate_x", p.location.plate_x},
           {"plate_z", p.location.plate_z},
           {"sz_top", optional_json(p.sz_top)},
           {"sz_bot", optional_json(p.sz_bot)},
           {"actual", to_string(p.actual)},
           {"evdiff_mean", p.mean},
           {"evdiff_lower", p.lower},
           {"evdiff_upper", p.upper},
           {"p_swing_optimal", p.p_swing_optimal},
           {"xr_optimal", to_string(p.optimal)},
           {"panel", std::string(1, panel_code(p.panel))}};
    j.update(components_json(p.components));
    return j;
}

Json to_json(const BatterReportResponse& r) {
    Json rows = Json::array();
    for (const auto& p : r.pitches) rows.push_back(to_json(p));
    return Json{{"report", to_json(r.report)}, {"pitches", std::move(rows)}};
}

// ---------------------------------------------------------------------------------------------

namespace {

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
    return {status, Json{{"error", Json{{"code", code}, {"message", message}}}}};
}

std::optional<long long> int_param(const std::map<std::string, std::string>& params, const std::string& name) {
    const auto it = params.find(name);
    if (it == params.end()) return std::nullopt;
    const auto v = parse_int(it->second);
    if (!v) throw ServiceError("bad_request", "query parameter '" + name + "' must be an integer", 400);
    return v;
}

}  // namespace

ApiResponse Api::handle(const std::string& method, const std::string& path,
                        const std::map<std::string, std::string>& params, const std::string& body) const {
    try {
        const auto parts = split(path, '/');  // leading "" from the initial slash
        const auto expect = [&](const char* m) {
            if (method != m) throw ServiceError("method_not_allowed", method + " not allowed on " + path, 405);
        };
        if (path == "/health") {
            expect("GET");
            return {200, Json{{"status", "ok"}, {"models_loaded", models_ != nullptr}, {"scores_loaded", scored_ != nullptr}}};
        }
        if (path == "/whatif") {
            expect("POST");
            if (!models_) throw ServiceError("unavailable", "no models loaded", 503);
            Json j;
            try {
                j = Json::parse(body);
            } catch (const Json::exception& e) {
                throw ServiceError("bad_request", std::string("request body is not valid JSON: ") + e.what(), 400);
            }
            return {200, to_json(handle_whatif(whatif_query_from_json(j), *models_))};
        }
        if (path == "/batters") {
            expect("GET");
            if (!scored_) throw ServiceError("unavailable", "no scored pitches loaded", 503);
            const auto min = int_param(params, "min_pitches");
            if (min && *min < 0) throw ServiceError("bad_request", "min_pitches must be >= 0", 400);
            Json list = Json::array();
            for (const auto& b : list_batters(*scored_, min ? static_cast<std::size_t>(*min) : scored_->min_pitches)) {
                list.push_back(Json{{"batter_id", b.batter_id}, {"season", b.season}, {"pitches", b.pitches}});
            }
            return {200, Json{{"batters", std::move(list)}}};
        }
        if (parts.size() == 4 && parts[0].empty() && parts[1] == "batters" && parts[3] == "report" && !parts[2].empty()) {
            expect("GET");
            if (!scored_) throw ServiceError("unavailable", "no scored pitches loaded", 503);
            const auto season = int_param(params, "season");
            if (!season) throw ServiceError("bad_request", "query parameter 'season' is required", 400);
            return {200, to_json(handle_batter_report(*scored_, parts[2], static_cast<int>(*season)))};
        }
        return error_response(404, "not_found", "no route for " + path);
    } catch (const ServiceError& e) {
        return error_response(e.status(), e.code(), e.what());
    } catch (const std::invalid_argument& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

// ---------------------------------------------------------------------------------------------

Json to_json(const RunManifest& m) {
    return Json{{"command", m.command}, {"seed", m.seed},       {"config_hash", m.config_hash}, {"config", m.config},
                {"inputs", m.inputs},   {"outputs", m.outputs}, {"seconds", m.seconds}};
}

void write_manifest(const fs::path& path, const RunManifest& m) { write_text_file(path, to_json(m).dump(2) + "\n"); }

}  // namespace xr
