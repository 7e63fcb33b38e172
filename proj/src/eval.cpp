#include "xr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "xr/random.hpp"
#include "xr/special.hpp"
#include "xr/text.hpp"

namespace xr {

std::vector<std::size_t> CvPlan::training_rows(int fold) const {
    std::vector<std::size_t> rows;
    rows.reserve(fold_of_row.size());
    for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
        if (fold_of_row[i] != fold) rows.push_back(i);
    }
    return rows;
}

CvPlan kfold_split(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k-fold split needs k >= 2");
    if (n < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("cannot split " + std::to_string(n) + " rows into " + std::to_string(k) + " folds");
    }
    CvPlan plan;
    plan.k = k;
    plan.seed = seed;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    plan.fold_of_row.assign(n, -1);
    plan.folds.resize(static_cast<std::size_t>(k));
    const std::size_t base = n / static_cast<std::size_t>(k), extra = n % static_cast<std::size_t>(k);
    std::size_t at = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t j = 0; j < size; ++j, ++at) {
            plan.fold_of_row[perm[at]] = static_cast<int>(f);
            plan.folds[f].push_back(perm[at]);
        }
        std::sort(plan.folds[f].begin(), plan.folds[f].end());
    }
    return plan;
}

RelativeMse relative_mse(double candidate, double reference) {
    if (!(reference > 0.0)) throw std::invalid_argument("reference MSE must be > 0");
    const double ratio = candidate / reference;
    return {ratio, (ratio - 1.0) * 100.0};
}

double mean_squared_error(std::span<const double> prediction, std::span<const double> truth) {
    if (prediction.size() != truth.size() || prediction.empty()) {
        throw std::invalid_argument("MSE needs two nonempty samples of equal length");
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) ss += (prediction[i] - truth[i]) * (prediction[i] - truth[i]);
    return ss / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------------------------

std::string to_string(CvTarget t) {
    switch (t) {
        case CvTarget::Strike: return "strike";
        case CvTarget::Contact: return "contact";
        case CvTarget::Runs: return "runs";
    }
    return "?";
}

CvTarget parse_cv_target(const std::string& s) {
    if (s == "strike") return CvTarget::Strike;
    if (s == "contact") return CvTarget::Contact;
    if (s == "runs") return CvTarget::Runs;
    throw std::invalid_argument("unknown target '" + s + "' (expected strike, contact or runs)");
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::TreeEnsemble: return "BART";
        case ModelKind::Rex: return "REx";
        case ModelKind::BayesRex: return "BayesREx";
        case ModelKind::Constant: return "constant";
        case ModelKind::LocationGrid: return "location-grid";
    }
    return "?";
}

std::string ModelSpec::label() const {
    switch (kind) {
        case ModelKind::TreeEnsemble: return "BART(" + group_label(groups) + ")";
        case ModelKind::Rex:
        case ModelKind::BayesRex: return to_string(kind) + "(" + bins.label() + ")";
        default: return to_string(kind);
    }
}

int LocationGrid::cell(const Location& l) const {
    const auto index = [](double v, double lo, double hi, int n) {
        const int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
        return std::clamp(i, 0, n - 1);
    };
    return index(l.plate_x, x_lo, x_hi, nx) * nz + index(l.plate_z, z_lo, z_hi, nz);
}

double LocationGrid::predict(const Location& l) const {
    const auto c = static_cast<std::size_t>(cell(l));
    return cell_count[c] > 0 ? cell_mean[c] : global_mean;
}

LocationGrid fit_location_grid(const std::vector<Location>& locations, std::span<const double> y, int nx, int nz) {
    if (locations.size() != y.size() || locations.empty()) throw std::invalid_argument("grid baseline needs matching, nonempty data");
    if (nx < 1 || nz < 1) throw std::invalid_argument("grid resolution must be positive");
    LocationGrid g;
    g.nx = nx;
    g.nz = nz;
    const auto cells = static_cast<std::size_t>(nx * nz);
    std::vector<double> sum(cells, 0.0);
    g.cell_count.assign(cells, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto c = static_cast<std::size_t>(g.cell(locations[i]));
        sum[c] += y[i];
        ++g.cell_count[c];
        total += y[i];
    }
    g.global_mean = total / static_cast<double>(y.size());
    g.cell_mean.resize(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        g.cell_mean[c] = g.cell_count[c] ? sum[c] / static_cast<double>(g.cell_count[c]) : g.global_mean;
    }
    return g;
}

std::uint64_t CvDataset::label_hash() const {
    std::string bytes = to_string(target);
    for (double v : labels) {
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof v);
        bytes.append(buf, sizeof buf);
    }
    return fnv1a(bytes);
}

CvDataset make_cv_dataset(const std::vector<PitchRecord>& records, CvTarget target) {
    CvDataset d;
    d.target = target;
    for (const auto& r : records) {
        switch (target) {
            case CvTarget::Strike:
                if (r.swing) continue;
                d.labels.push_back(r.called_strike.value_or(false) ? 1.0 : 0.0);
                break;
            case CvTarget::Contact:
                if (!r.swing) continue;
                d.labels.push_back(r.contact.value_or(false) ? 1.0 : 0.0);
                break;
            case CvTarget::Runs: d.labels.push_back(static_cast<double>(r.runs_rest_of_inning)); break;
        }
        d.rows.push_back(r);
    }
    return d;
}

namespace {

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
    std::vector<T> out;
    out.reserve(rows.size());
    for (auto i : rows) out.push_back(v[i]);
    return out;
}

std::vector<GameState> states_of(const std::vector<PitchRecord>& rows) {
    std::vector<GameState> s;
    s.reserve(rows.size());
    for (const auto& r : rows) s.push_back(r.game_state);
    return s;
}

}  // namespace

Eigen::VectorXd fit_and_predict(const ModelSpec& spec, const CvDataset& data, const std::vector<std::size_t>& train,
                                const std::vector<std::size_t>& test, std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("empty training set");
    const auto train_rows = pick(data.rows, train);
    const auto test_rows = pick(data.rows, test);
    const auto y = pick(data.labels, train);
    Eigen::VectorXd out(static_cast<Eigen::Index>(test.size()));
    const bool runs = data.target == CvTarget::Runs;

    switch (spec.kind) {
        case ModelKind::Constant: {
            out.setConstant(std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size()));
            break;
        }
        case ModelKind::LocationGrid: {
            std::vector<Location> loc;
            for (const auto& r : train_rows) loc.push_back(r.location);
            const auto grid = fit_location_grid(loc, y);
            for (std::size_t i = 0; i < test_rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = grid.predict(test_rows[i].location);
            break;
        }
        case ModelKind::Rex: {
            const auto model = fit_rex(states_of(train_rows), y, spec.bins);
            for (std::size_t i = 0; i < test_rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = model.predict(test_rows[i].game_state);
            break;
        }
        case ModelKind::BayesRex: {
            RexPriorConfig prior = spec.rex_prior;
            prior.seed = seed;
            const auto model = fit_bayes_rex(states_of(train_rows), y, spec.bins, prior);
            const Eigen::VectorXd by_bin = model.posterior_mean_by_bin();
            for (std::size_t i = 0; i < test_rows.size(); ++i) {
                out(static_cast<Eigen::Index>(i)) = by_bin(static_cast<Eigen::Index>(assign_bin(test_rows[i].game_state, spec.bins)));
            }
            break;
        }
        case ModelKind::TreeEnsemble: {
            EnsembleConfig cfg = spec.ensemble;
            cfg.seed = seed;
            const ResponseMode mode = runs ? ResponseMode::Regression : ResponseMode::Probit;
            const FeatureTable train_x = runs ? runs_features(train_rows) : event_features(train_rows, spec.groups);
            const FeatureTable test_x = runs ? runs_features(test_rows) : event_features(test_rows, spec.groups);
            const PosteriorEnsemble e = fit(train_x, y, mode, cfg);
            if (!test.empty()) out = predict(e, test_x).rowwise().mean();
            break;
        }
    }
    return out;
}

CvResult run_cv(const ModelSpec& spec, const CvDataset& data, const CvPlan& plan) {
    if (plan.fold_of_row.size() != data.rows.size()) throw std::invalid_argument("CV plan does not match the dataset size");
    CvResult result;
    result.model = spec.label();
    result.label_hash = data.label_hash();
    double ss = 0.0;
    std::size_t total = 0;
    for (int f = 0; f < plan.k; ++f) {
        const auto& test = plan.folds[static_cast<std::size_t>(f)];
        const auto train = plan.training_rows(f);
        const std::uint64_t seed = mix64(spec.ensemble.seed ^ mix64(plan.seed + static_cast<std::uint64_t>(f)));
        const Eigen::VectorXd pred = fit_and_predict(spec, data, train, test, seed);
        double fold_ss = 0.0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            const double e = pred(static_cast<Eigen::Index>(i)) - data.labels[test[i]];
            fold_ss += e * e;
        }
        result.fold_rows.push_back(test.size());
        result.fold_mse.push_back(test.empty() ? 0.0 : fold_ss / static_cast<double>(test.size()));
        ss += fold_ss;
        total += test.size();
    }
    result.pooled_mse = ss / static_cast<double>(total);
    return result;
}

void write_cv_report(std::ostream& folds, std::ostream& summary, const std::vector<CvResult>& results,
                     std::size_t reference) {
    if (reference >= results.size()) throw std::out_of_range("reference model index out of range");
    folds << "model\tfold\trows\tmse\n";
    for (const auto& r : results) {
        for (std::size_t f = 0; f < r.fold_mse.size(); ++f) {
            folds << r.model << '\t' << f << '\t' << r.fold_rows[f] << '\t' << format_double(r.fold_mse[f]) << '\n';
        }
    }
    summary << "model\tpooled_mse\trelative_to\tratio\tpercent\n";
    const auto& ref = results[reference];
    for (const auto& r : results) {
        const RelativeMse rel = relative_mse(r.pooled_mse, ref.pooled_mse);
        summary << r.model << '\t' << format_double(r.pooled_mse) << '\t' << ref.model << '\t'
                << format_double(rel.ratio) << '\t' << format_double(rel.percent) << '\n';
    }
}

// ---------------------------------------------------------------------------------------------
// Synthetic generator

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double zone_distance(const Location& l, const StrikeSurface& z) {
    const double dx = (l.plate_x - z.center_x) / z.half_width;
    const double dz = (l.plate_z - z.center_z) / z.half_height;
    return std::sqrt(dx * dx + dz * dz);
}

enum class PitchEvent { Ball, CalledStrike, SwingingStrike, Foul, InPlay };

// Batter reaches `bases` bases (4 = home run); every runner advances the same number of bases.
int advance_all(GameState& g, int bases) {
    int runs = 0;
    bool occ[4] = {true, g.on_first, g.on_second, g.on_third};  // index 0 is the batter
    bool next[4] = {false, false, false, false};
    for (int b = 3; b >= 0; --b) {
        if (!occ[b]) continue;
        const int to = b + bases;
        if (to >= 4) ++runs;
        else next[to] = true;
    }
    g.on_first = next[1];
    g.on_second = next[2];
    g.on_third = next[3];
    return runs;
}

int walk(GameState& g) {
    int runs = 0;
    if (g.on_first) {
        if (g.on_second) {
            if (g.on_third) ++runs;
            g.on_third = true;
        }
        g.on_second = true;
    }
    g.on_first = true;
    return runs;
}

void end_plate_appearance(GameState& g) {
    g.balls = 0;
    g.strikes = 0;
}

int ball_in_play(GameState& g, const InningProcess& p, Rng& rng) {
    const double u = rng.uniform();
    int runs = 0;
    if (u < p.p_single) runs = advance_all(g, 1);
    else if (u < p.p_single + p.p_double) runs = advance_all(g, 2);
    else if (u < p.p_single + p.p_double + p.p_triple) runs = advance_all(g, 3);
    else if (u < p.p_single + p.p_double + p.p_triple + p.p_home_run) runs = advance_all(g, 4);
    else {
        ++g.outs;
        if (g.outs < 3 && rng.bernoulli(p.p_advance_on_out)) {
            if (g.on_third) ++runs;
            g.on_third = g.on_second;
            g.on_second = g.on_first;
            g.on_first = false;
        }
    }
    end_plate_appearance(g);
    return runs;
}

// Applies one pitch event; returns runs scored on it.
int apply_event(GameState& g, PitchEvent e, const InningProcess& p, Rng& rng) {
    switch (e) {
        case PitchEvent::Ball:
            if (++g.balls == 4) {
                end_plate_appearance(g);
                return walk(g);
            }
            return 0;
        case PitchEvent::CalledStrike:
        case PitchEvent::SwingingStrike:
            if (++g.strikes == 3) {
                ++g.outs;
                end_plate_appearance(g);
            }
            return 0;
        case PitchEvent::Foul:
            if (g.strikes < 2) ++g.strikes;
            return 0;
        case PitchEvent::InPlay: return ball_in_play(g, p, rng);
    }
    return 0;
}

PitchEvent draw_event(const InningProcess& p, Rng& rng) {
    const double u = rng.uniform();
    double c = p.p_ball;
    if (u < c) return PitchEvent::Ball;
    if (u < (c += p.p_called_strike)) return PitchEvent::CalledStrike;
    if (u < (c += p.p_swinging_strike)) return PitchEvent::SwingingStrike;
    if (u < (c += p.p_foul)) return PitchEvent::Foul;
    return PitchEvent::InPlay;
}

int run_out_inning(GameState& g, const InningProcess& p, Rng& rng) {
    int runs = 0;
    while (g.outs < 3) runs += apply_event(g, draw_event(p, rng), p, rng);
    return runs;
}

template <typename T>
const T& choose(const std::vector<T>& v, const std::vector<double>& w, Rng& rng) {
    double u = rng.uniform() * std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if ((u -= w[i]) < 0.0) return v[i];
    }
    return v.back();
}

std::string pool_id(char prefix, int i) {
    std::string s(1, prefix);
    if (i < 10) s += '0';
    return s + std::to_string(i);
}

}  // namespace

void InningProcess::validate() const {
    for (double v : {p_ball, p_called_strike, p_swinging_strike, p_foul, p_single, p_double, p_triple, p_home_run,
                     p_advance_on_out}) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("inning process probabilities must be in [0, 1]");
    }
    if (p_ball + p_called_strike + p_swinging_strike + p_foul >= 1.0) {
        throw std::invalid_argument("inning process leaves no mass for balls in play");
    }
    if (p_single + p_double + p_triple + p_home_run >= 1.0) {
        throw std::invalid_argument("inning process leaves no mass for outs in play");
    }
}

void SyntheticConfig::validate() const {
    if (rows == 0) throw std::invalid_argument("synthetic row count must be positive");
    if (seasons.empty()) throw std::invalid_argument("synthetic data needs at least one season");
    if (batters < 1 || pitchers < 1 || catchers < 1 || umpires < 1) throw std::invalid_argument("player pools must be nonempty");
    if (!(strike.half_width > 0.0 && strike.half_height > 0.0)) throw std::invalid_argument("zone size must be positive");
    inning.validate();
}

int simulate_rest_of_inning(GameState state, const InningProcess& process, Rng& rng) {
    return run_out_inning(state, process, rng);
}

double StrikeSurface::probability(const Location& l, double umpire_offset) const {
    return logistic(sharpness * (1.0 - zone_distance(l, *this)) + umpire_offset);
}

double ContactSurface::probability(const Location& l, const StrikeSurface& zone, double batter_quality) const {
    const double d = zone_distance(l, zone);
    return logistic(base_logit - distance_slope * d * d + quality_slope * (batter_quality - 0.320));
}

double SyntheticTruth::strike_probability(const PitchContext& c) const {
    const auto it = umpire_offset.find(c.personnel.umpire_id);
    return strike.probability(c.location, it == umpire_offset.end() ? 0.0 : it->second);
}

double SyntheticTruth::contact_probability(const PitchContext& c) const {
    return contact.probability(c.location, strike, c.personnel.batter_quality);
}

SyntheticData synthesize(const SyntheticConfig& config) {
    config.validate();
    Rng rng(config.seed);
    SyntheticData out;
    out.truth.strike = config.strike;
    out.truth.contact = config.contact;

    struct Player {
        std::string id;
        Hand hand;
        double quality;
    };
    const auto make_pool = [&](char prefix, int n) {
        std::vector<Player> pool;
        for (int i = 1; i <= n; ++i) {
            const double q = std::clamp(rng.normal(0.320, 0.030), 0.2, 0.45);
            pool.push_back({pool_id(prefix, i), rng.bernoulli(0.3) ? Hand::Left : Hand::Right, q});
        }
        return pool;
    };
    const auto batters = make_pool('B', config.batters);
    const auto pitchers = make_pool('P', config.pitchers);
    const auto catchers = make_pool('C', config.catchers);
    std::vector<std::string> umpires;
    for (int i = 1; i <= config.umpires; ++i) {
        umpires.push_back(pool_id('U', i));
        out.truth.umpire_offset[umpires.back()] = rng.normal(0.0, config.strike.umpire_spread);
    }

    const std::vector<int> balls = {0, 1, 2, 3};
    const std::vector<double> ball_w = {0.45, 0.28, 0.17, 0.10};
    const std::vector<int> strikes = {0, 1, 2};
    const std::vector<double> strike_w = {0.40, 0.35, 0.25};
    const std::size_t per_game = 300;

    out.records.reserve(config.rows);
    for (std::size_t i = 0; i < config.rows; ++i) {
        GameState g;
        g.balls = choose(balls, ball_w, rng);
        g.strikes = choose(strikes, strike_w, rng);
        g.outs = static_cast<int>(rng.index(3));
        g.on_first = rng.bernoulli(0.30);
        g.on_second = rng.bernoulli(0.20);
        g.on_third = rng.bernoulli(0.10);
        g.inning = 1 + static_cast<int>(rng.index(9));
        g.top_inning = rng.bernoulli(0.5);
        g.score_diff = static_cast<int>(rng.index(9)) - 4;

        const Player& b = batters[rng.index(batters.size())];
        const Player& p = pitchers[rng.index(pitchers.size())];
        const Player& c = catchers[rng.index(catchers.size())];
        Personnel who{b.id, p.id, c.id, umpires[rng.index(umpires.size())], b.hand, p.hand, b.quality, p.quality};

        Location loc{std::clamp(rng.normal(0.0, 0.85), -2.5, 2.5), std::clamp(rng.normal(2.3, 0.9), 0.0, 5.0)};
        const PitchContext ctx{g, who, loc};

        const int season = config.seasons[i % config.seasons.size()];
        const PitchKey key{static_cast<std::int64_t>(100000 + i / per_game), static_cast<int>(i % per_game) + 1, 1,
                           season, std::to_string(season) + "-06-01"};
        const double d = zone_distance(loc, config.strike);
        const bool swing = rng.bernoulli(logistic(2.5 * (1.0 - d) + 0.5 * (g.strikes - 1)));

        PitchRecord r;
        PitchEvent event;
        if (swing) {
            const bool contact = rng.bernoulli(out.truth.contact_probability(ctx));
            r = make_swing(key, g, who, loc, contact);
            if (!contact) event = PitchEvent::SwingingStrike;
            else {
                const double foul_share = config.inning.p_foul /
                    (1.0 - config.inning.p_ball - config.inning.p_called_strike - config.inning.p_swinging_strike);
                event = rng.bernoulli(foul_share) ? PitchEvent::Foul : PitchEvent::InPlay;
            }
        } else {
            const bool called = rng.bernoulli(out.truth.strike_probability(ctx));
            r = make_take(key, g, who, loc, called);
            event = called ? PitchEvent::CalledStrike : PitchEvent::Ball;
        }
        GameState after = g;
        const int now = apply_event(after, event, config.inning, rng);
        r.runs_rest_of_inning = now + run_out_inning(after, config.inning, rng);
        r.post_bat_score = now;
        out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace xr
