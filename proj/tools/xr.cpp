// xr: command-line pipeline for swing/take decision models.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "xr/eval.hpp"
#include "xr/random.hpp"
#include "xr/service.hpp"
#include "xr/text.hpp"

using namespace xr;
namespace fs = std::filesystem;

namespace {

std::vector<PitchRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_cache(in);
}

void save_records(const fs::path& path, const std::vector<PitchRecord>& records) {
    std::ostringstream os;
    write_cache(os, records);
    write_text_file(path, os.str());
}

std::map<std::string, std::string> load_key_values(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_key_values(in);
}

double number(const std::string& key, const std::string& text) {
    const auto v = parse_double(text);
    if (!v) throw std::runtime_error("config key '" + key + "' needs a number, got '" + text + "'");
    return *v;
}

/// Ensemble settings from key=value pairs; unknown keys are errors.
void apply_ensemble_keys(EnsembleConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "trees") cfg.trees = static_cast<int>(number(k, v));
        else if (k == "alpha") cfg.alpha = number(k, v);
        else if (k == "beta") cfg.beta = number(k, v);
        else if (k == "nu") cfg.nu = number(k, v);
        else if (k == "sigma_quantile") cfg.sigma_quantile = number(k, v);
        else if (k == "lambda") cfg.lambda = number(k, v);
        else if (k == "leaf_scale") cfg.leaf_scale = number(k, v);
        else if (k == "burn_in") cfg.burn_in = static_cast<int>(number(k, v));
        else if (k == "draws") cfg.draws = static_cast<int>(number(k, v));
        else if (k == "thin") cfg.thin = static_cast<int>(number(k, v));
        else throw std::runtime_error("unknown config key '" + k + "'");
    }
}

struct EnsembleFlags {
    std::string config_file;
    std::optional<int> trees, burn_in, draws;

    void add(CLI::App* app) {
        app->add_option("--config", config_file, "key=value ensemble settings")->check(CLI::ExistingFile);
        app->add_option("--trees", trees, "trees per ensemble");
        app->add_option("--burn-in", burn_in, "burn-in iterations");
        app->add_option("--draws", draws, "kept posterior draws");
    }

    EnsembleConfig make(ResponseMode mode, std::uint64_t seed) const {
        EnsembleConfig cfg = EnsembleConfig::defaults(mode);
        apply_ensemble_keys(cfg, load_key_values(config_file));
        if (trees) cfg.trees = *trees;
        if (burn_in) cfg.burn_in = *burn_in;
        if (draws) cfg.draws = *draws;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }
};

RunManifest start_manifest(const std::string& command, std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.seed = seed;
    return m;
}

std::string manifest_path(const std::string& flag, const fs::path& fallback) {
    return flag.empty() ? fallback.string() : flag;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : split(s, ',')) {
        const auto t = std::string(trim(part));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

/// "BART:GPL", "REx:outs+bases", "BayesREx:count+outs+bases", "constant", "grid"
ModelSpec parse_model(const std::string& text, const EnsembleConfig& ensemble) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    for (auto& c : arg) if (c == '+') c = ',';
    ModelSpec s;
    s.ensemble = ensemble;
    if (kind == "BART") {
        s.kind = ModelKind::TreeEnsemble;
        s.groups = arg.empty() ? kAllGroups : parse_groups(arg);
    } else if (kind == "REx" || kind == "BayesREx") {
        s.kind = kind == "REx" ? ModelKind::Rex : ModelKind::BayesRex;
        if (!arg.empty()) s.bins = BinSpec::parse(arg);
    } else if (kind == "constant") {
        s.kind = ModelKind::Constant;
    } else if (kind == "grid") {
        s.kind = ModelKind::LocationGrid;
    } else {
        throw std::runtime_error("unknown model '" + text + "' (BART:<groups>, REx:<bins>, BayesREx:<bins>, constant, grid)");
    }
    return s;
}

ScoredStore load_scored(const fs::path& dir) {
    ScoredStore s;
    std::ifstream tsv(dir / "scored.tsv");
    if (!tsv) throw std::runtime_error("cannot open " + (dir / "scored.tsv").string());
    s.pitches = read_scored_pitches(tsv);
    std::ifstream bin(dir / "evdiff.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + (dir / "evdiff.bin").string());
    s.evdiff = read_draws(bin);
    if (static_cast<std::size_t>(s.evdiff.rows()) != s.pitches.size()) {
        throw std::runtime_error("evdiff.bin rows do not match scored.tsv");
    }
    return s;
}

// ---------------------------------------------------------------------------------------------

struct Common {
    std::uint64_t seed = 1;
    std::string manifest;

    void add(CLI::App* app) {
        app->add_option("--seed", seed, "random seed")->capture_default_str();
        app->add_option("--manifest", manifest, "run manifest path");
    }
};

void cmd_simulate(const Common& c, std::size_t rows, const std::vector<int>& seasons, double spread,
                  const std::string& out) {
    RunManifest m = start_manifest("simulate", c.seed);
    SyntheticConfig cfg;
    cfg.rows = rows;
    cfg.seed = c.seed;
    if (!seasons.empty()) cfg.seasons = seasons;
    cfg.strike.umpire_spread = spread;
    m.config = Json{{"rows", rows}, {"seasons", cfg.seasons}, {"umpire_spread", spread}};
    m.config_hash = config_hash(m.config);
    std::vector<PitchRecord> records;
    {
        StageTimer t(m, "simulate");
        records = synthesize(cfg).records;
    }
    save_records(out, records);
    m.outputs["records"] = out;
    write_manifest(manifest_path(c.manifest, out + ".manifest.json"), m);
    std::cout << "wrote " << records.size() << " records to " << out << '\n';
}

void cmd_ingest(const Common& c, const std::string& csv, const std::string& umpires, const std::string& columns,
                const std::string& out, const std::string& diagnostics) {
    RunManifest m = start_manifest("ingest", c.seed);
    ColumnMap map;
    map.apply(load_key_values(columns));
    std::map<std::int64_t, std::string> ump;
    if (!umpires.empty()) {
        std::ifstream in(umpires);
        ump = read_umpire_table(in);
        m.inputs["umpires"] = umpires;
    }
    m.config = Json{{"columns", map.names}};
    m.config_hash = config_hash(m.config);
    m.inputs["csv"] = csv;
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot open " + csv);
    ParseResult r;
    {
        StageTimer t(m, "parse");
        r = parse_statcast_csv(in, map, umpires.empty() ? nullptr : &ump, WobaConfig{});
    }
    save_records(out, r.records);
    m.outputs["records"] = out;
    const std::string diag = diagnostics.empty() ? out + ".diagnostics.txt" : diagnostics;
    write_text_file(diag, r.diagnostics.report());
    m.outputs["diagnostics"] = diag;
    write_manifest(manifest_path(c.manifest, out + ".manifest.json"), m);
    std::cout << "kept " << r.diagnostics.rows_kept << " of " << r.diagnostics.rows_read << " rows\n";
}

void cmd_fit(const Common& c, const EnsembleFlags& flags, const std::string& records_path, const std::string& store_dir,
             const std::string& targets, const std::string& groups_text, std::optional<int> eval_year,
             const std::string& runs_years) {
    RunManifest m = start_manifest("fit", c.seed);
    m.inputs["records"] = records_path;
    const auto records = load_records(records_path);
    std::vector<PitchRecord> events = records, runs = records;
    if (eval_year || !runs_years.empty()) {
        YearRange years{2015, 2018};
        if (!runs_years.empty()) {
            const auto parts = split(runs_years, '-');
            const auto a = parts.size() == 2 ? parse_int(parts[0]) : std::nullopt;
            const auto b = parts.size() == 2 ? parse_int(parts[1]) : std::nullopt;
            if (!a || !b) throw std::runtime_error("--runs-years needs FIRST-LAST, got '" + runs_years + "'");
            years = {static_cast<int>(*a), static_cast<int>(*b)};
        }
        Partition p = partition(records, eval_year.value_or(2019), years);
        events = p.takes;
        events.insert(events.end(), p.swings.begin(), p.swings.end());
        runs = p.runs_train;
    }
    const unsigned groups = parse_groups(groups_text);
    const ModelStore store(store_dir);
    Json all_configs = Json::object();
    for (const auto& name : split_list(targets)) {
        const CvTarget target = parse_cv_target(name);
        const auto& rows = target == CvTarget::Runs ? runs : events;
        const ResponseMode mode = target == CvTarget::Runs ? ResponseMode::Regression : ResponseMode::Probit;
        const EnsembleConfig cfg = flags.make(mode, mix64(c.seed + static_cast<std::uint64_t>(target)));
        Json config = to_json(cfg);
        if (target != CvTarget::Runs) config["feature_groups"] = group_label(groups);
        PosteriorEnsemble e;
        {
            StageTimer t(m, "fit_" + name);
            e = fit_component(rows, target, cfg, target == CvTarget::Runs ? kAllGroups : groups);
        }
        const ModelKey key{component_kind(target), dataset_fingerprint(rows), config_hash(config)};
        const auto path = store.store(key, to_json(e), dataset_digest(rows), {{"seed", std::to_string(cfg.seed)}});
        m.outputs[name] = path.string();
        all_configs[name] = config;
        std::cout << name << ": " << e.draw_count() << " draws -> " << path.string() << '\n';
    }
    const Roster roster = build_roster(records);
    const ModelKey rkey{model_kind::kRoster, dataset_fingerprint(records), config_hash(Json::object())};
    m.outputs["roster"] = store.store(rkey, to_json(roster), dataset_digest(records)).string();
    m.config = all_configs;
    m.config_hash = config_hash(all_configs);
    write_manifest(manifest_path(c.manifest, (fs::path(store_dir) / "fit.manifest.json").string()), m);
}

void cmd_cv(const Common& c, const EnsembleFlags& flags, const std::string& records_path, const std::string& target_name,
            const std::string& models_text, int folds, const std::string& out_dir) {
    RunManifest m = start_manifest("cv", c.seed);
    m.inputs["records"] = records_path;
    const CvTarget target = parse_cv_target(target_name);
    const CvDataset data = make_cv_dataset(load_records(records_path), target);
    const ResponseMode mode = target == CvTarget::Runs ? ResponseMode::Regression : ResponseMode::Probit;
    const EnsembleConfig ensemble = flags.make(mode, c.seed);
    const CvPlan plan = kfold_split(data.rows.size(), folds, c.seed);
    std::vector<CvResult> results;
    for (const auto& name : split_list(models_text)) {
        const ModelSpec spec = parse_model(name, ensemble);
        StageTimer t(m, spec.label());
        results.push_back(run_cv(spec, data, plan));
        std::cout << spec.label() << ": pooled MSE " << format_double(results.back().pooled_mse) << '\n';
    }
    if (results.empty()) throw std::runtime_error("--models lists no models");
    std::ostringstream fold_table, summary;
    write_cv_report(fold_table, summary, results, 0);
    const fs::path dir(out_dir);
    write_text_file(dir / "cv_folds.tsv", fold_table.str());
    write_text_file(dir / "cv_summary.tsv", summary.str());
    m.outputs["folds"] = (dir / "cv_folds.tsv").string();
    m.outputs["summary"] = (dir / "cv_summary.tsv").string();
    m.config = Json{{"target", target_name}, {"models", models_text}, {"folds", folds}, {"ensemble", to_json(ensemble)},
                    {"label_hash", hex64(data.label_hash())}};
    m.config_hash = config_hash(m.config);
    write_manifest(manifest_path(c.manifest, (dir / "cv.manifest.json").string()), m);
}

void cmd_score(const Common& c, const std::string& records_path, const std::string& store_dir,
               const std::string& out_dir, std::optional<int> draws, double level) {
    RunManifest m = start_manifest("score", c.seed);
    m.inputs["records"] = records_path;
    m.inputs["store"] = store_dir;
    const ModelSet models = load_model_set(ModelStore(store_dir));
    const auto records = load_records(records_path);
    ScoreOptions opts;
    opts.level = level;
    if (draws) opts.draws = *draws;
    ScoredStore scored;
    {
        StageTimer t(m, "score");
        scored = score_records(models, records, opts);
    }
    const fs::path dir(out_dir);
    std::ostringstream tsv;
    write_scored_pitches(tsv, scored.pitches);
    write_text_file(dir / "scored.tsv", tsv.str());
    std::ostringstream bin;
    write_draws(bin, scored.evdiff);
    write_text_file(dir / "evdiff.bin", bin.str());
    m.outputs["scored"] = (dir / "scored.tsv").string();
    m.outputs["evdiff"] = (dir / "evdiff.bin").string();
    m.config = Json{{"level", level}, {"draws", scored.evdiff.cols()}};
    m.config_hash = config_hash(m.config);
    write_manifest(manifest_path(c.manifest, (dir / "score.manifest.json").string()), m);
    std::cout << "scored " << scored.pitches.size() << " pitches with " << scored.evdiff.cols() << " draws\n";
}

void cmd_report(const Common& c, const std::string& scored_dir, std::size_t min_pitches, double level,
                const std::string& out, const std::string& correlation_out) {
    RunManifest m = start_manifest("report", c.seed);
    m.inputs["scored"] = scored_dir;
    const ScoredStore s = load_scored(scored_dir);
    const auto reports = batter_reports(s.pitches, s.evdiff, ZoneSpec{}, min_pitches, level);
    std::ostringstream os;
    os << "batter\tseason\tpitches\tqualified\tprop_optimal\tprop_optimal_lower\tprop_optimal_upper\truns_added\t"
          "runs_added_lower\truns_added_upper\truns_lost\truns_lost_lower\truns_lost_upper\tpanel_a\tpanel_b\tpanel_c\t"
          "panel_d\to_swing\tz_swing\n";
    SeasonTable table;
    for (const auto& r : reports) {
        const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
        os << r.batter_id << '\t' << r.season << '\t' << r.pitches << '\t' << (r.qualified ? 1 : 0);
        for (const auto* ms : {&r.proportion_optimal, &r.runs_added, &r.runs_lost}) {
            os << '\t' << format_double(ms->mean) << '\t' << format_double(ms->lower) << '\t' << format_double(ms->upper);
        }
        for (auto n : r.panels.count) os << '\t' << n;
        os << '\t' << opt(r.traditional.o_swing) << '\t' << opt(r.traditional.z_swing) << '\n';
        table[r.season][r.batter_id] = {r.proportion_optimal.mean, r.pitches};
    }
    write_text_file(out, os.str());
    m.outputs["reports"] = out;
    if (!correlation_out.empty()) {
        const CorrelationMatrix cm = year_to_year_correlation(table, min_pitches);
        std::ostringstream cs;
        cs << "season";
        for (int y : cm.seasons) cs << '\t' << y;
        cs << '\n';
        for (std::size_t i = 0; i < cm.seasons.size(); ++i) {
            cs << cm.seasons[i];
            for (std::size_t j = 0; j < cm.seasons.size(); ++j) {
                cs << '\t' << format_double(cm.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
            cs << '\n';
        }
        write_text_file(correlation_out, cs.str());
        m.outputs["correlation"] = correlation_out;
    }
    m.config = Json{{"min_pitches", min_pitches}, {"level", level}};
    m.config_hash = config_hash(m.config);
    write_manifest(manifest_path(c.manifest, out + ".manifest.json"), m);
}

void cmd_serve(const std::string& store_dir, const std::string& scored_dir, const std::string& host, int port,
               std::size_t min_pitches) {
    std::optional<ModelSet> models;
    std::optional<ScoredStore> scored;
    if (!store_dir.empty()) models = load_model_set(ModelStore(store_dir));
    if (!scored_dir.empty()) {
        scored = load_scored(scored_dir);
        scored->min_pitches = min_pitches;
    }
    const Api api(models ? &*models : nullptr, scored ? &*scored : nullptr);
    std::cout << "listening on " << host << ':' << port << std::endl;
    serve(api, host, port);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Swing/take decision models: ingest, simulate, fit, cross-validate, score, report and serve"};
    app.require_subcommand(1);

    Common c;
    EnsembleFlags ens;

    auto* simulate = app.add_subcommand("simulate", "generate synthetic pitches with known surfaces");
    std::size_t rows = 20000;
    std::vector<int> seasons;
    double spread = 0.0;
    std::string out;
    simulate->add_option("--rows", rows, "pitches to generate")->capture_default_str();
    simulate->add_option("--seasons", seasons, "seasons to cycle through")->delimiter(',');
    simulate->add_option("--umpire-spread", spread, "sd of per-umpire strike logit offsets")->capture_default_str();
    simulate->add_option("--out", out, "output record cache")->required();
    c.add(simulate);

    auto* ingest = app.add_subcommand("ingest", "parse a Statcast-style CSV into a record cache");
    std::string csv, umpires, columns, diagnostics;
    ingest->add_option("--csv", csv, "input CSV")->required()->check(CLI::ExistingFile);
    ingest->add_option("--umpires", umpires, "game_pk,umpire table")->check(CLI::ExistingFile);
    ingest->add_option("--columns", columns, "key=value column-name overrides")->check(CLI::ExistingFile);
    ingest->add_option("--out", out, "output record cache")->required();
    ingest->add_option("--diagnostics", diagnostics, "drop-count report path");
    c.add(ingest);

    auto* fit_cmd = app.add_subcommand("fit", "fit component models into a model store");
    std::string records, store, targets = "strike,contact,runs", groups = "GPL", runs_years;
    std::optional<int> eval_year;
    fit_cmd->add_option("--records", records, "record cache")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--store", store, "model store directory")->required();
    fit_cmd->add_option("--targets", targets, "components to fit")->capture_default_str();
    fit_cmd->add_option("--groups", groups, "predictor groups for strike and contact (G, P, L)")->capture_default_str();
    fit_cmd->add_option("--eval-year", eval_year, "season for strike and contact models");
    fit_cmd->add_option("--runs-years", runs_years, "FIRST-LAST seasons for the runs model");
    ens.add(fit_cmd);
    c.add(fit_cmd);

    auto* cv = app.add_subcommand("cv", "k-fold cross-validation of competing models");
    std::string target = "strike", models = "BART:GPL,constant,grid", out_dir;
    int folds = 10;
    cv->add_option("--records", records, "record cache")->required()->check(CLI::ExistingFile);
    cv->add_option("--target", target, "strike, contact or runs")->capture_default_str();
    cv->add_option("--models", models, "comma-separated models; the first is the reference")->capture_default_str();
    cv->add_option("--folds", folds, "number of folds")->capture_default_str();
    cv->add_option("--out", out_dir, "output directory")->required();
    ens.add(cv);
    c.add(cv);

    auto* score = app.add_subcommand("score", "score pitches with stored models");
    std::optional<int> draws;
    double level = 0.90;
    score->add_option("--records", records, "record cache")->required()->check(CLI::ExistingFile);
    score->add_option("--store", store, "model store directory")->required()->check(CLI::ExistingDirectory);
    score->add_option("--out", out_dir, "output directory")->required();
    score->add_option("--joint-draws", draws, "joint posterior draws per pitch");
    score->add_option("--level", level, "credible interval level")->capture_default_str();
    c.add(score);

    auto* report = app.add_subcommand("report", "batter-season metrics from scored pitches");
    std::string scored_dir, correlation;
    std::size_t min_pitches = 1000;
    report->add_option("--scored", scored_dir, "directory written by score")->required()->check(CLI::ExistingDirectory);
    report->add_option("--min-pitches", min_pitches, "qualification threshold")->capture_default_str();
    report->add_option("--level", level, "credible interval level")->capture_default_str();
    report->add_option("--out", out, "output table")->required();
    report->add_option("--correlation", correlation, "year-to-year correlation table");
    c.add(report);

    auto* serve_cmd = app.add_subcommand("serve", "serve what-if and report requests over HTTP");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve_cmd->add_option("--store", store, "model store directory")->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--scored", scored_dir, "directory written by score")->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--min-pitches", min_pitches, "default listing threshold")->capture_default_str();
    c.add(serve_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) cmd_simulate(c, rows, seasons, spread, out);
        else if (*ingest) cmd_ingest(c, csv, umpires, columns, out, diagnostics);
        else if (*fit_cmd) cmd_fit(c, ens, records, store, targets, groups, eval_year, runs_years);
        else if (*cv) cmd_cv(c, ens, records, target, models, folds, out_dir);
        else if (*score) cmd_score(c, records, store, out_dir, draws, level);
        else if (*report) cmd_report(c, scored_dir, min_pitches, level, out, correlation);
        else if (*serve_cmd) cmd_serve(store, scored_dir, host, port, min_pitches);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
