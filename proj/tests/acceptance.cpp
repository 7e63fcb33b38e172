// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "xr/bart.hpp"
#include "xr/data.hpp"
#include "xr/decision.hpp"
#include "xr/eval.hpp"
#include "xr/metrics.hpp"
#include "xr/random.hpp"
#include "xr/rex.hpp"
#include "xr/serialize.hpp"
#include "xr/service.hpp"
#include "xr/special.hpp"

using namespace xr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double within_se(double estimate, double target, double se) { return std::fabs(estimate - target) / se; }

// ---------------------------------------------------------------------------------------------

void conjugate_oracles(Outcome& o) {
    const int draws = 2000;

    // Leaf mean: one frozen root-only tree, fixed sigma, unstandardized.
    FeatureTable t;
    t.add_numeric("x").numeric = {0.0, 1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y = {1.0, 2.5, 0.5, 3.0, 2.0};
    EnsembleConfig cfg;
    cfg.trees = 1;
    cfg.update_structure = false;
    cfg.standardize = false;
    cfg.fixed_sigma = 1.0;
    cfg.leaf_scale = 1.0;
    cfg.burn_in = 10;
    cfg.draws = draws;
    cfg.seed = 17;
    const auto ens = fit(t, y, ResponseMode::Regression, cfg);
    const double precision = 5.0 + 1.0;
    const double leaf_z = within_se(predict(ens, t).row(0).mean(), 9.0 / precision, std::sqrt(1.0 / precision / draws));
    o.require(leaf_z < 3.0, "leaf mean");

    // sigma^2: inverse-gamma posterior on fixed residuals, via the precision 1/sigma^2.
    Rng rng(5);
    const double nu = 3.0, lambda = 0.25;
    const std::vector<double> r = {0.3, -1.2, 0.8, 0.05, -0.4, 2.1, -0.9};
    double ss = 0.0;
    for (double v : r) ss += v * v;
    const double shape = 0.5 * (nu + static_cast<double>(r.size()));
    const double rate = 0.5 * (nu * lambda + ss);
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double s = sample_sigma(r, nu, lambda, rng);
        sum += 1.0 / (s * s);
    }
    const double sigma_z = within_se(sum / draws, shape / rate, std::sqrt(shape) / rate / std::sqrt(draws));
    o.require(sigma_z < 3.0, "sigma");

    // BayesREx beta_g given tau, sigma and the grand mean.
    Rng data_rng(5);
    std::vector<GameState> states;
    std::vector<double> runs;
    for (int i = 0; i < 600; ++i) {
        GameState g;
        g.outs = static_cast<int>(data_rng.index(3));
        g.on_first = data_rng.bernoulli(0.4);
        g.on_second = data_rng.bernoulli(0.25);
        g.on_third = data_rng.bernoulli(0.15);
        states.push_back(g);
        std::poisson_distribution<int> pois(std::max(0.5 + 0.15 * g.base_state() - 0.2 * g.outs, 0.05));
        runs.push_back(pois(data_rng.engine()));
    }
    RexPriorConfig prior;
    prior.fixed_tau = 0.4;
    prior.fixed_sigma = 0.9;
    prior.fixed_grand_mean = 0.1;
    prior.burn_in = 0;
    prior.draws = draws;
    const auto model = fit_bayes_rex(states, runs, BinSpec::re24(), prior);
    std::vector<double> n(24, 0.0), s(24, 0.0);
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto b = assign_bin(states[i], BinSpec::re24());
        n[b] += 1.0;
        s[b] += (runs[i] - model.response_mean) / model.response_scale;
    }
    double worst = 0.0;
    for (std::size_t b = 0; b < 24; ++b) {
        const double prec = n[b] / (0.9 * 0.9) + 1.0 / (0.4 * 0.4);
        const double expected = (s[b] / (0.9 * 0.9) + 0.1 / (0.4 * 0.4)) / prec;
        double mean = 0.0;
        for (const auto& d : model.draws) mean += d.beta(static_cast<Eigen::Index>(b));
        mean /= static_cast<double>(model.draws.size());
        worst = std::max(worst, within_se(mean, expected, 1.0 / std::sqrt(prec) / std::sqrt(draws)));
    }
    o.require(worst < 3.0, "BayesREx beta");
    o.detail << "leaf " << leaf_z << " SE, sigma " << sigma_z << " SE, worst of 24 beta_g " << worst << " SE; "
             << draws << " draws each";
}

void prior_frequency(Outcome& o) {
    FeatureSchema schema;
    schema.predictors.push_back({"a", PredictorKind::Continuous, 0.0, 1.0, {}});
    schema.predictors.push_back({"b", PredictorKind::Continuous, 0.0, 1.0, {}});
    const Eigen::MatrixXd x(0, 2);
    const TreePrior prior{0.95, 2.0, 1.0};
    Rng rng(2024);
    Tree tree;
    const std::vector<int> nodes;
    const std::vector<double> residual;
    const int moves = 50000;
    int split = 0;
    for (int m = 0; m < moves; ++m) {
        const TreeData data{x, residual, nodes};
        const MoveKind kind = rng.uniform() < 0.5 ? MoveKind::Grow : MoveKind::Prune;
        const auto move = propose_tree_move(tree, kind, data, schema, prior, 1.0, rng);
        if (move && std::log(rng.uniform_open()) < move->log_ratio) {
            if (move->kind == MoveKind::Grow) tree.grow(move->node, move->rule);
            else tree.prune(move->node);
        }
        split += tree.node(Tree::root()).is_leaf() ? 0 : 1;
    }
    const double p = static_cast<double>(split) / moves;
    o.require(std::fabs(p - 0.95) <= 0.02, "root split frequency");
    o.detail << "root split frequency " << p << " over " << moves << " moves (target 0.95 +- 0.02)";
}

void sigma_calibration(Outcome& o) {
    const double lambda = calibrate_sigma_prior(3.0, 0.9);
    Rng rng(99);
    const int draws = 100000;
    int below = 0;
    for (int i = 0; i < draws; ++i) below += sample_sigma(0.0, 0, 3.0, lambda, rng) < 1.0 ? 1 : 0;
    const double p = static_cast<double>(below) / draws;
    o.require(p >= 0.89 && p <= 0.91, "P(sigma < 1)");
    o.require(std::fabs(lambda - 0.1948) < 5e-4, "lambda");
    o.detail << "lambda " << lambda << ", P(sigma<1) " << p << " over " << draws << " prior draws";
}

void exact_oracles(Outcome& o) {
    // fit_rex against a group-by average keyed by raw factors.
    Rng rng(31);
    const std::vector<BinSpec> specs = {BinSpec::re24(), BinSpec::re288(), {true, false, false}, {false, false, true}};
    int rex_mismatch = 0;
    for (int fixture = 0; fixture < 1000; ++fixture) {
        const std::size_t n = 1 + rng.index(60);
        std::vector<GameState> states;
        std::vector<double> runs;
        for (std::size_t i = 0; i < n; ++i) {
            GameState g;
            g.balls = static_cast<int>(rng.index(4));
            g.strikes = static_cast<int>(rng.index(3));
            g.outs = static_cast<int>(rng.index(3));
            g.on_first = rng.bernoulli(0.4);
            g.on_second = rng.bernoulli(0.25);
            g.on_third = rng.bernoulli(0.15);
            states.push_back(g);
            runs.push_back(static_cast<double>(rng.index(5)));
        }
        const BinSpec& spec = specs[static_cast<std::size_t>(fixture) % specs.size()];
        const RexModel m = fit_rex(states, runs, spec);
        std::map<std::tuple<int, int, int>, std::pair<double, int>> groups;
        const auto key_of = [&](const GameState& g) {
            return std::tuple<int, int, int>{spec.count ? g.balls * 3 + g.strikes : 0, spec.outs ? g.outs : 0,
                                             spec.bases ? g.base_state() : 0};
        };
        for (std::size_t i = 0; i < n; ++i) {
            groups[key_of(states[i])].first += runs[i];
            groups[key_of(states[i])].second += 1;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto& gsum = groups[key_of(states[i])];
            if (m.predict(states[i]) != gsum.first / gsum.second) ++rex_mismatch;
        }
    }
    o.require(rex_mismatch == 0, "fit_rex");

    // label_runs against a backward replay of an event log, on shuffled input.
    int label_mismatch = 0;
    for (int inning = 0; inning < 200; ++inning) {
        const int pas = 3 + static_cast<int>(rng.index(6));
        std::vector<PitchRecord> recs;
        std::vector<int> on_pitch;
        int score = static_cast<int>(rng.index(4));
        for (int pa = 1; pa <= pas; ++pa) {
            const int pitches = 1 + static_cast<int>(rng.index(6));
            for (int p = 1; p <= pitches; ++p) {
                const int scored = p == pitches && rng.index(10) >= 7 ? static_cast<int>(rng.index(4)) : 0;
                PitchRecord r = make_swing({inning, pa, p, 2019, ""}, GameState{}, Personnel{"b", "p", "c"}, Location{}, true);
                r.bat_score = score;
                r.post_bat_score = score + scored;
                score += scored;
                recs.push_back(r);
                on_pitch.push_back(scored);
            }
        }
        std::vector<int> oracle(recs.size());
        int tail = 0;
        for (std::size_t k = recs.size(); k-- > 0;) oracle[k] = tail += on_pitch[k];
        std::vector<std::size_t> perm(recs.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        std::vector<PitchRecord> shuffled;
        for (auto i : perm) shuffled.push_back(recs[i]);
        label_runs(shuffled, final_scores_from_records(shuffled));
        for (std::size_t i = 0; i < perm.size(); ++i) label_mismatch += shuffled[i].runs_rest_of_inning != oracle[perm[i]];
    }
    o.require(label_mismatch == 0, "label_runs");

    // Runs added / lost against per-pitch positive and negative parts (dyadic values).
    int metric_mismatch = 0;
    for (int fixture = 0; fixture < 500; ++fixture) {
        const auto n = static_cast<Eigen::Index>(1 + rng.index(40));
        const auto draws = static_cast<Eigen::Index>(1 + rng.index(6));
        std::vector<Decision> actual;
        for (Eigen::Index i = 0; i < n; ++i) actual.push_back(rng.bernoulli(0.5) ? Decision::Swing : Decision::Take);
        Eigen::MatrixXd ev(n, draws);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < draws; ++j) ev(i, j) = (static_cast<double>(rng.index(257)) - 128.0) / 1024.0;
        const Eigen::VectorXd added = runs_added_draws(actual, ev);
        const Eigen::VectorXd lost = runs_lost_draws(actual, ev);
        for (Eigen::Index j = 0; j < draws; ++j) {
            double a_sum = 0.0, l_sum = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double a = actual[static_cast<std::size_t>(i)] == Decision::Swing ? ev(i, j) : -ev(i, j);
                a_sum += a;
                l_sum += std::max(0.0, -a);
            }
            metric_mismatch += added(j) != a_sum || lost(j) != l_sum;
        }
    }
    o.require(metric_mismatch == 0, "runs added/lost");
    o.detail << "fit_rex 1000 fixtures, label_runs 200 half-innings, runs added/lost 500 fixtures; mismatches "
             << rex_mismatch << "/" << label_mismatch << "/" << metric_mismatch;
}

void composition_identities(Outcome& o) {
    Rng rng(101);
    const Eigen::Index n = 1000000;
    BranchDraws d;
    for (auto* v : {&d.p_contact, &d.p_strike, &d.xr_contact, &d.xr_miss, &d.xr_strike, &d.xr_ball}) v->resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        d.p_contact(j) = rng.uniform();
        d.p_strike(j) = rng.uniform();
        d.xr_contact(j) = rng.uniform(-1.0, 3.0);
        d.xr_miss(j) = rng.uniform(-1.0, 3.0);
        d.xr_strike(j) = rng.uniform(-1.0, 3.0);
        d.xr_ball(j) = rng.uniform(-1.0, 3.0);
    }
    const auto e = branch_expectations(d);
    const bool hull = (e.swing.array() >= d.xr_contact.array().min(d.xr_miss.array())).all() &&
                      (e.swing.array() <= d.xr_contact.array().max(d.xr_miss.array())).all() &&
                      (e.take.array() >= d.xr_strike.array().min(d.xr_ball.array())).all() &&
                      (e.take.array() <= d.xr_strike.array().max(d.xr_ball.array())).all();
    o.require(hull, "convex hull");

    bool antisym = true, shift = true;
    for (int trial = 0; trial < 200; ++trial) {
        BranchDraws b;
        const Eigen::Index m = 64;
        for (auto* v : {&b.p_contact, &b.p_strike}) {
            v->resize(m);
            for (Eigen::Index j = 0; j < m; ++j) (*v)(j) = static_cast<double>(rng.index(17)) / 16.0;
        }
        for (auto* v : {&b.xr_contact, &b.xr_miss, &b.xr_strike, &b.xr_ball}) {
            v->resize(m);
            for (Eigen::Index j = 0; j < m; ++j) (*v)(j) = static_cast<double>(rng.index(193)) / 64.0;
        }
        const Eigen::VectorXd ev = evdiff(branch_expectations(b));
        const BranchDraws swapped{b.p_strike, b.p_contact, b.xr_strike, b.xr_ball, b.xr_contact, b.xr_miss};
        antisym = antisym && (evdiff(branch_expectations(swapped)).array() == -ev.array()).all();
        BranchDraws shifted = b;
        shifted.xr_contact.array() += 1.0 / 32.0;
        shifted.xr_miss.array() += 1.0 / 32.0;
        const Eigen::VectorXd evs = evdiff(branch_expectations(shifted));
        shift = shift && ((evs - ev).array() == 1.0 / 32.0).all() &&
                summarize_decision(evs).p_swing_optimal >= summarize_decision(ev).p_swing_optimal;
    }
    o.require(antisym, "antisymmetry");
    o.require(shift, "delta shift");
    Eigen::VectorXd tie(4);
    tie << 0.25, -0.25, 0.5, -0.5;
    const bool tie_take = summarize_decision(tie).optimal == Decision::Take && summarize_decision(tie).mean == 0.0;
    o.require(tie_take, "tie rule");
    o.detail << "convex hull on " << n << " draws, antisymmetry and delta shift exact on 200 dyadic fixtures, "
             << "zero mean -> take";
}

void synthetic_recovery(Outcome& o) {
    SyntheticConfig sc;
    sc.rows = 20000;
    sc.seed = 20190401;
    const SyntheticData data = synthesize(sc);

    const CvDataset takes = make_cv_dataset(data.records, CvTarget::Strike);
    const CvPlan tplan = kfold_split(takes.rows.size(), 5, 11);
    const auto& ttest = tplan.folds[0];
    const auto ttrain = tplan.training_rows(0);
    std::vector<double> truth;
    for (auto i : ttest) truth.push_back(data.truth.strike_probability(context_of(takes.rows[i])));
    const auto rmse = [&](const Eigen::VectorXd& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i) s += (p(static_cast<Eigen::Index>(i)) - truth[i]) * (p(static_cast<Eigen::Index>(i)) - truth[i]);
        return std::sqrt(s / static_cast<double>(truth.size()));
    };
    ModelSpec bart;
    bart.groups = kLocation;
    bart.ensemble = EnsembleConfig::defaults(ResponseMode::Probit);
    ModelSpec constant;
    constant.kind = ModelKind::Constant;
    ModelSpec grid;
    grid.kind = ModelKind::LocationGrid;
    const double r_bart = rmse(fit_and_predict(bart, takes, ttrain, ttest, 1));
    const double r_const = rmse(fit_and_predict(constant, takes, ttrain, ttest, 1));
    const double r_grid = rmse(fit_and_predict(grid, takes, ttrain, ttest, 1));
    ModelSpec bart_all = bart;
    bart_all.groups = kAllGroups;
    const double r_all = rmse(fit_and_predict(bart_all, takes, ttrain, ttest, 1));
    o.require(r_bart < 0.05, "probit RMSE < 0.05");
    o.require(r_bart < r_const && r_bart < r_grid, "probit below baselines");

    const CvDataset runs = make_cv_dataset(data.records, CvTarget::Runs);
    const CvPlan rplan = kfold_split(runs.rows.size(), 5, 12);
    const auto& rtest = rplan.folds[0];
    const auto rtrain = rplan.training_rows(0);
    const auto mse = [&](const Eigen::VectorXd& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < rtest.size(); ++i) {
            const double e = p(static_cast<Eigen::Index>(i)) - runs.labels[rtest[i]];
            s += e * e;
        }
        return s / static_cast<double>(rtest.size());
    };
    ModelSpec rbart;
    rbart.ensemble = EnsembleConfig::defaults(ResponseMode::Regression);
    ModelSpec rex;
    rex.kind = ModelKind::Rex;
    const double m_bart = mse(fit_and_predict(rbart, runs, rtrain, rtest, 2));
    const double m_rex = mse(fit_and_predict(rex, runs, rtrain, rtest, 2));
    o.require(m_bart <= m_rex, "runs MSE <= REx(outs+bases)");
    o.detail << "strike RMSE vs truth: BART(L) " << r_bart << ", constant " << r_const << ", grid " << r_grid
             << " on " << ttest.size() << " held-out takes (all predictor groups, informational: " << r_all
             << "); runs MSE: BART " << m_bart << ", REx(outs+bases) " << m_rex
             << " on " << rtest.size() << " held-out pitches";
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

std::string slurp(const fs::path& p) { return fs::exists(p) ? read_text_file(p) : std::string("<missing>"); }

void cv_harness(Outcome& o) {
    Rng rng(4);
    bool partition_ok = true;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.index(500);
        const int k = 2 + static_cast<int>(rng.index(std::min<std::size_t>(n - 1, 20)));
        const CvPlan plan = kfold_split(n, k, rng.index(1u << 30));
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (const auto& f : plan.folds) {
            for (auto i : f) ++seen[i];
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
        }
        partition_ok = partition_ok && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }) && hi - lo <= 1;
    }
    o.require(partition_ok, "fold partition");
    o.require(relative_mse(0.123, 0.123).ratio == 1.0 && relative_mse(0.123, 0.123).percent == 0.0, "relative_mse(self)");

    // Two full CLI runs with the same seeds.
    const fs::path root = fs::temp_directory_path() / "xr_acceptance_e2e";
    fs::remove_all(root);
    std::vector<std::string> artifacts[2];
    bool commands_ok = true;
    for (int pass = 0; pass < 2; ++pass) {
        const fs::path dir = root / std::to_string(pass);
        fs::create_directories(dir);
        const std::string xr = XR_CLI_PATH, d = dir.string();
        commands_ok = commands_ok &&
            run(xr + " simulate --rows 2000 --seasons 2019,2020 --seed 7 --out " + d + "/rec.tsv") == 0 &&
            run(xr + " fit --records " + d + "/rec.tsv --store " + d + "/store --trees 20 --burn-in 40 --draws 40 --seed 8") == 0 &&
            run(xr + " cv --records " + d + "/rec.tsv --target strike --models BART:GPL,BART:L,constant,grid --folds 5 --trees 20 --burn-in 40 --draws 40 --seed 9 --out " + d + "/cv_strike") == 0 &&
            run(xr + " cv --records " + d + "/rec.tsv --target runs --models BART,REx:outs+bases,BayesREx:outs+bases --folds 5 --trees 20 --burn-in 40 --draws 40 --seed 9 --out " + d + "/cv_runs") == 0 &&
            run(xr + " score --records " + d + "/rec.tsv --store " + d + "/store --out " + d + "/scored") == 0 &&
            run(xr + " report --scored " + d + "/scored --min-pitches 10 --out " + d + "/report.tsv") == 0;
        for (const char* f : {"rec.tsv", "cv_strike/cv_folds.tsv", "cv_strike/cv_summary.tsv", "cv_runs/cv_folds.tsv",
                              "cv_runs/cv_summary.tsv", "scored/scored.tsv", "scored/evdiff.bin", "report.tsv"}) {
            artifacts[pass].push_back(slurp(dir / f));
        }
        for (const auto& entry : fs::directory_iterator(dir / "store")) {
            if (entry.path().filename() != "fit.manifest.json") artifacts[pass].push_back(slurp(entry.path()));
        }
    }
    o.require(commands_ok, "CLI commands exit 0");
    const bool identical = artifacts[0] == artifacts[1] && artifacts[0].size() >= 12;
    o.require(identical, "byte-identical artifacts");
    fs::remove_all(root);
    o.detail << "500 random (n, k) partitions, relative_mse(self) = 1, two CLI runs produce "
             << artifacts[0].size() << " byte-identical artifacts";
}

void serialization(Outcome& o) {
    SyntheticConfig sc;
    sc.rows = 2000;
    sc.seed = 3;
    const auto records = synthesize(sc).records;
    EnsembleConfig cfg = EnsembleConfig::defaults(ResponseMode::Probit);
    cfg.trees = 30;
    cfg.burn_in = 50;
    cfg.draws = 50;
    const PosteriorEnsemble strike = fit_component(records, CvTarget::Strike, cfg);
    cfg = EnsembleConfig::defaults(ResponseMode::Regression);
    cfg.trees = 30;
    cfg.burn_in = 50;
    cfg.draws = 50;
    const PosteriorEnsemble runs = fit_component(records, CvTarget::Runs, cfg);

    const fs::path dir = fs::temp_directory_path() / "xr_acceptance_store";
    fs::remove_all(dir);
    const ModelStore store(dir);
    const std::string fp = dataset_fingerprint(records), digest = dataset_digest(records);
    const ModelKey sk{model_kind::kStrikeModel, fp, config_hash(to_json(strike.config))};
    const ModelKey rk{model_kind::kRunsModel, fp, config_hash(to_json(runs.config))};
    store.store(sk, to_json(strike), digest);
    store.store(rk, to_json(runs), digest);
    const PosteriorEnsemble strike_back = ensemble_from_json(store.load(sk).payload);
    const PosteriorEnsemble runs_back = ensemble_from_json(store.load(rk).payload);
    o.require(strike_back == strike && runs_back == runs, "ensemble equality");

    std::vector<PitchContext> ctx;
    for (const auto& r : records) ctx.push_back(context_of(r));
    const bool same_strike = (event_component(strike)(ctx).array() == event_component(strike_back)(ctx).array()).all();
    std::vector<RunsQuery> q;
    for (const auto& c : ctx) for (const auto& x : outcome_queries(c.game_state)) q.push_back(x);
    const bool same_runs = (runs_component(runs)(q).array() == runs_component(runs_back)(q).array()).all();
    o.require(same_strike && same_runs, "identical predictions");

    std::vector<GameState> states;
    std::vector<double> y;
    for (const auto& r : records) {
        states.push_back(r.game_state);
        y.push_back(r.runs_rest_of_inning);
    }
    const RexModel rex = fit_rex(states, y, BinSpec::re24());
    RexPriorConfig prior;
    prior.burn_in = 50;
    prior.draws = 50;
    const BayesRexModel bayes = fit_bayes_rex(states, y, BinSpec::re24(), prior);
    const bool rex_ok = rex_from_json(Json::parse(to_json(rex).dump())) == rex &&
                        bayes_rex_from_json(Json::parse(to_json(bayes).dump())) == bayes;
    o.require(rex_ok, "REx round-trip");
    fs::remove_all(dir);
    o.detail << "store round-trip of strike and runs ensembles equal field for field; predictions identical on "
             << ctx.size() << " pitches and " << q.size() << " runs queries; REx and BayesREx round-trip";
}

void primary_only(Outcome& o, bool earlier_passed) {
    const fs::path build(XR_BUILD_DIR);
    bool ui_artifacts = false;
    for (const auto& entry : fs::recursive_directory_iterator(build)) {
        const auto name = entry.path().filename().string();
        if (name == "whatif-ui" || name == "node_modules" || entry.path().extension() == ".js") ui_artifacts = true;
    }
    o.require(!ui_artifacts, "no UI artifacts in the build tree");
    o.require(earlier_passed, "criteria above");
    o.detail << "acceptance linked against the core library only; build tree has no UI artifacts";
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void(Outcome&)> check;
    };
    bool all = true;
    const auto report = [&](const char* name, const std::function<void(Outcome&)>& check) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            check(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << " (" << secs << " s)"
                  << std::endl;
        all = all && o.pass;
    };
    const std::vector<Criterion> criteria = {
        {"conjugate oracles", conjugate_oracles},
        {"prior frequency", prior_frequency},
        {"sigma prior calibration", sigma_calibration},
        {"exact oracle equivalence", exact_oracles},
        {"composition identities", composition_identities},
        {"synthetic recovery", synthetic_recovery},
        {"cv harness", cv_harness},
        {"serialization", serialization},
    };
    for (const auto& c : criteria) report(c.name, c.check);
    const bool before = all;
    report("primary only", [&](Outcome& o) { primary_only(o, before); });
    return all ? 0 : 1;
}
