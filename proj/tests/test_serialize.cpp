#include <doctest.h>

#include <filesystem>

#include "xr/random.hpp"
#include "xr/serialize.hpp"

using namespace xr;

namespace {

FeatureTable mixed_table(std::size_t n, Rng& rng, std::vector<double>& y, std::vector<double>& yb) {
    FeatureTable t;
    auto& x = t.add_numeric("x");
    auto& c = t.add_categorical("c");
    const std::vector<std::string> levels = {"l0", "l1", "l2", "l3", "l4"};
    for (std::size_t i = 0; i < n; ++i) {
        x.numeric.push_back(rng.normal());
        c.text.push_back(levels[rng.index(levels.size())]);
        const double f = x.numeric.back() * 0.7 + (c.text.back() == "l2" ? 1.0 : 0.0);
        y.push_back(f + 0.2 * rng.normal() + 1.0 / 3.0);
        yb.push_back(rng.uniform() < normal_cdf(f) ? 1.0 : 0.0);
    }
    return t;
}

template <typename T>
Json round_trip_text(const T& value) {
    return Json::parse(to_json(value).dump());
}

}  // namespace

TEST_CASE("tree ensembles round-trip bit-exactly") {
    Rng rng(10);
    std::vector<double> y, yb;
    const FeatureTable t = mixed_table(250, rng, y, yb);
    for (const auto mode : {ResponseMode::Regression, ResponseMode::Probit}) {
        EnsembleConfig cfg = EnsembleConfig::defaults(mode);
        cfg.trees = 12;
        cfg.burn_in = 40;
        cfg.draws = 25;
        cfg.seed = 5;
        PosteriorEnsemble e = fit(t, mode == ResponseMode::Probit ? yb : y, mode, cfg);
        e.metadata["feature_groups"] = 7;
        const PosteriorEnsemble back = ensemble_from_json(round_trip_text(e));
        CHECK(back == e);

        const Eigen::MatrixXd x = encode(t, e.schema);
        const Eigen::MatrixXd p1 = predict(e, x);
        const Eigen::MatrixXd p2 = predict(back, x);
        CHECK((p1.array() == p2.array()).all());
    }
}

TEST_CASE("tree node records") {
    Tree tree;
    DecisionRule cont;
    cont.predictor = 0;
    cont.threshold = 0.1 + 0.2;
    const auto [l, r] = tree.grow(0, cont);
    DecisionRule cat;
    cat.predictor = 1;
    cat.kind = PredictorKind::Categorical;
    cat.left_levels = {1, 0, 1};
    const auto [rl, rr] = tree.grow(r, cat);
    tree.node(l).value = -1.0 / 3.0;
    tree.node(rl).value = 2.5e-300;
    tree.node(rr).value = -0.0;
    const Json j = to_json(tree);
    CHECK(j.dump() == R"([[1,0,0.30000000000000004],[2,-0.3333333333333333],[3,1,"101"],[6,2.5e-300],[7,-0.0]])");
    CHECK(tree_from_json(Json::parse(j.dump())) == tree.compacted());

    CHECK_THROWS_AS(tree_from_json(Json::parse(R"([[1,0,0.5],[2,1.0],[4,2.0]])")), ModelFormatError);
    CHECK_THROWS_AS(tree_from_json(Json::parse(R"([[1,0,0.5],[2,1.0]])")), ModelFormatError);
    CHECK_THROWS_AS(tree_from_json(Json::parse(R"([[1,1.0],[2,1.0]])")), ModelFormatError);
}

TEST_CASE("run expectancy models round-trip") {
    Rng rng(2);
    std::vector<GameState> states;
    std::vector<double> runs;
    for (int i = 0; i < 400; ++i) {
        GameState g;
        g.outs = static_cast<int>(rng.index(3));
        g.on_first = rng.bernoulli(0.3);
        states.push_back(g);
        runs.push_back(static_cast<double>(rng.index(3)));
    }
    const RexModel rex = fit_rex(states, runs, BinSpec::re24());
    CHECK(rex_from_json(round_trip_text(rex)) == rex);

    RexPriorConfig cfg;
    cfg.burn_in = 20;
    cfg.draws = 30;
    cfg.fixed_tau = 0.25;
    const BayesRexModel bayes = fit_bayes_rex(states, runs, BinSpec::re24(), cfg);
    const BayesRexModel back = bayes_rex_from_json(round_trip_text(bayes));
    CHECK(back == bayes);
    CHECK((back.predict(states).array() == bayes.predict(states).array()).all());
}

TEST_CASE("envelope checks format and version, and files round-trip") {
    ModelEnvelope e{model_kind::kRex, {{"fingerprint", "abc"}}, Json{{"x", 1}}};
    const Json j = to_json(e);
    const ModelEnvelope back = envelope_from_json(j);
    CHECK(back.kind == e.kind);
    CHECK(back.info == e.info);
    CHECK(back.payload == e.payload);

    Json wrong = j;
    wrong["version"] = 99;
    CHECK_THROWS_WITH_AS(envelope_from_json(wrong), doctest::Contains("version 99"), ModelFormatError);
    wrong = j;
    wrong["format"] = "other";
    CHECK_THROWS_AS(envelope_from_json(wrong), ModelFormatError);

    const auto dir = std::filesystem::temp_directory_path() / "xr_serialize_test";
    std::filesystem::remove_all(dir);
    save_envelope(dir / "m.json", e);
    CHECK(load_envelope(dir / "m.json").payload == e.payload);
    write_text_file(dir / "bad.json", "{not json");
    CHECK_THROWS_AS(load_envelope(dir / "bad.json"), ModelFormatError);
    std::filesystem::remove_all(dir);
}
