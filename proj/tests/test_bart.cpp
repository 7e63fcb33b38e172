#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "xr/bart.hpp"
#include "xr/special.hpp"

using namespace xr;

namespace {

FeatureSchema unit_square_schema() {
    FeatureSchema s;
    s.predictors.push_back({"a", PredictorKind::Continuous, 0.0, 1.0, {}});
    s.predictors.push_back({"b", PredictorKind::Continuous, 0.0, 1.0, {}});
    return s;
}

// Independent traversal: follows explicit child indices from the root.
double traverse(const Tree& tree, const Eigen::MatrixXd& x, Eigen::Index row) {
    const auto& nodes = tree.raw_nodes();
    std::size_t k = 0;
    while (nodes[k].left >= 0) {
        const auto& rule = nodes[k].rule;
        const double v = x(row, rule.predictor);
        bool left;
        if (rule.kind == PredictorKind::Continuous) {
            left = v < rule.threshold;
        } else {
            left = v >= 0 ? rule.left_levels.at(static_cast<std::size_t>(v)) != 0 : rule.goes_left(v, nodes[k].id);
        }
        k = static_cast<std::size_t>(left ? nodes[k].left : nodes[k].right);
    }
    return nodes[k].value;
}

struct MixedData {
    FeatureTable table;
    std::vector<double> y;
    std::vector<double> y_binary;
};

MixedData mixed_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    MixedData d;
    auto& x = d.table.add_numeric("x");
    for (std::size_t i = 0; i < n; ++i) x.numeric.push_back(rng.uniform(-2.0, 2.0));
    auto& team = d.table.add_categorical("team");
    const std::vector<std::string> teams = {"ana", "bos", "chc", "det", "hou", "nym", "sea"};
    for (std::size_t i = 0; i < n; ++i) team.text.push_back(teams[rng.index(teams.size())]);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = d.table.columns[0].numeric[i];
        const std::string& t = d.table.columns[1].text[i];
        const double effect = (t == "bos" || t == "hou") ? 1.0 : (t == "sea" ? -1.0 : 0.0);
        const double f = std::sin(xi) + effect;
        d.y.push_back(f + 0.3 * rng.normal());
        d.y_binary.push_back(rng.uniform() < normal_cdf(f) ? 1.0 : 0.0);
    }
    return d;
}

}  // namespace

TEST_CASE("split probability follows alpha (1 + depth)^-beta") {
    const TreePrior prior;
    CHECK(prior.split_probability(0) == doctest::Approx(0.95));
    CHECK(prior.split_probability(1) == doctest::Approx(0.95 / 4.0));
    CHECK(prior.split_probability(2) == doctest::Approx(0.95 / 9.0));
}

TEST_CASE("leaf means: conjugate normal posterior") {
    Tree tree;
    Rng rng(21);

    SUBCASE("n=1, r=2, sigma=1, tau=1 gives N(1, 0.5)") {
        const std::vector<LeafStats> stats{{1.0, 2.0}};
        const int draws = 4000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            sample_leaf_means(tree, stats, 1.0, 1.0, rng);
            const double v = tree.node(0).value;
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / draws;
        const double var = sum_sq / draws - mean * mean;
        CHECK(std::fabs(mean - 1.0) < 3.0 * std::sqrt(0.5 / draws));
        CHECK(var == doctest::Approx(0.5).epsilon(0.08));
    }

    SUBCASE("empty leaf draws from the prior N(0, tau^2)") {
        const std::vector<LeafStats> stats{{0.0, 0.0}};
        const double tau = 0.7;
        const int draws = 4000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            sample_leaf_means(tree, stats, 1.3, tau, rng);
            sum += tree.node(0).value;
            sum_sq += tree.node(0).value * tree.node(0).value;
        }
        CHECK(std::fabs(sum / draws) < 3.0 * tau / std::sqrt(draws));
        CHECK(sum_sq / draws == doctest::Approx(tau * tau).epsilon(0.08));
    }

    SUBCASE("large n: posterior mean tends to the residual mean") {
        const double n = 1e6, rbar = 0.37;
        const double precision = n + 1.0;  // sigma = tau = 1
        const double analytic_mean = n * rbar / precision;
        CHECK(std::fabs(analytic_mean - rbar) < 1e-3);
        const std::vector<LeafStats> stats{{n, n * rbar}};
        double sum = 0.0;
        for (int i = 0; i < 200; ++i) {
            sample_leaf_means(tree, stats, 1.0, 1.0, rng);
            sum += tree.node(0).value;
        }
        CHECK(std::fabs(sum / 200 - rbar) < 1e-3);
    }
}

TEST_CASE("sigma draws: inverse-gamma posterior moments") {
    Rng rng(5);
    const double nu = 3.0, lambda = 0.25;

    SUBCASE("fixed residuals: 1/sigma^2 mean within 3 SE of the gamma mean") {
        const std::vector<double> r = {0.3, -1.2, 0.8, 0.05, -0.4, 2.1, -0.9};
        double ss = 0.0;
        for (double v : r) ss += v * v;
        const double shape = 0.5 * (nu + r.size());
        const double rate = 0.5 * (nu * lambda + ss);
        const double mean = shape / rate, sd = std::sqrt(shape) / rate;
        const int draws = 100000;
        double sum = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double s = sample_sigma(r, nu, lambda, rng);
            sum += 1.0 / (s * s);
        }
        CHECK(std::fabs(sum / draws - mean) < 3.0 * sd / std::sqrt(draws));
    }

    SUBCASE("no residuals: draws come from the prior") {
        const double shape = 0.5 * nu, rate = 0.5 * nu * lambda;
        const int draws = 100000;
        double sum = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double s = sample_sigma(std::span<const double>{}, nu, lambda, rng);
            sum += 1.0 / (s * s);
        }
        CHECK(std::fabs(sum / draws - shape / rate) < 3.0 * std::sqrt(shape) / rate / std::sqrt(draws));
    }

    SUBCASE("calibrated prior puts 90% of its mass on sigma < 1") {
        const double calibrated = calibrate_sigma_prior(3.0, 0.9);
        int below = 0;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) below += sample_sigma(0.0, 0, 3.0, calibrated, rng) < 1.0 ? 1 : 0;
        const double p = static_cast<double>(below) / draws;
        CHECK(p >= 0.89);
        CHECK(p <= 0.91);
    }
}

TEST_CASE("probit latents respect labels") {
    Rng rng(9);
    const std::vector<double> g = {-3.0, 0.0, 2.5, -8.0, 8.0, 0.4};
    const std::vector<double> y = {1, 0, 1, 1, 0, 0};
    std::vector<double> z(g.size());
    for (int rep = 0; rep < 500; ++rep) {
        sample_probit_latents(g, y, z, rng);
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (y[i] > 0.5) CHECK(z[i] > 0.0);
            else CHECK(z[i] <= 0.0);
        }
    }
}

TEST_CASE("grow then prune of the same node has log ratios summing to zero") {
    const FeatureSchema schema = unit_square_schema();
    Rng rng(17);
    Eigen::MatrixXd x(50, 2);
    std::vector<double> residual(50);
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = rng.uniform();
        x(i, 1) = rng.uniform();
        residual[static_cast<std::size_t>(i)] = x(i, 0) > 0.5 ? 1.0 + 0.1 * rng.normal() : -0.5 + 0.1 * rng.normal();
    }
    const TreePrior prior{0.95, 2.0, 0.5};
    for (int trial = 0; trial < 25; ++trial) {
        Tree tree;
        std::vector<int> nodes(50, 0);
        // Grow a random pre-existing structure first so counts are nontrivial.
        for (int pre = 0; pre < trial % 4; ++pre) {
            const TreeData data{x, residual, nodes};
            auto g = propose_tree_move(tree, MoveKind::Grow, data, schema, prior, 0.8, rng);
            REQUIRE(g);
            const auto id = tree.node(g->node).id;
            const auto [l, r] = tree.grow(g->node, g->rule);
            for (int i = 0; i < 50; ++i) {
                auto& k = nodes[static_cast<std::size_t>(i)];
                if (k == g->node) k = tree.node(g->node).rule.goes_left(x(i, g->rule.predictor), id) ? l : r;
            }
        }
        const TreeData data{x, residual, nodes};
        const auto grow = propose_tree_move(tree, MoveKind::Grow, data, schema, prior, 0.8, rng);
        REQUIRE(grow);
        Tree grown = tree;
        const auto id = grown.node(grow->node).id;
        const auto [l, r] = grown.grow(grow->node, grow->rule);
        std::vector<int> grown_nodes = nodes;
        for (int i = 0; i < 50; ++i) {
            auto& k = grown_nodes[static_cast<std::size_t>(i)];
            if (k == grow->node) k = grow->rule.goes_left(x(i, grow->rule.predictor), id) ? l : r;
        }
        const TreeData grown_data{x, residual, grown_nodes};
        const double back = prune_log_ratio(grown, grow->node, grown_data, schema, prior, 0.8);
        CHECK(grow->log_ratio + back == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
        CHECK(std::fabs(grow->log_ratio + back) < 1e-10);
    }
}

TEST_CASE("prior-only sampler reproduces the root split probability") {
    const FeatureSchema schema = unit_square_schema();
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
        REQUIRE(tree.valid(schema));
        split += tree.node(Tree::root()).is_leaf() ? 0 : 1;
    }
    const double p = static_cast<double>(split) / moves;
    CHECK(std::fabs(p - 0.95) <= 0.02);
}

TEST_CASE("prediction of constant root-only trees") {
    PosteriorEnsemble ens;
    ens.schema = unit_square_schema();
    const double c = 0.125;
    const int m = 8;
    std::vector<Tree> trees(m);
    for (auto& t : trees) t.node(0).value = c;
    ens.draws = {trees, trees};
    Eigen::MatrixXd x(3, 2);
    x << 0.1, 0.2, 0.5, 0.5, 0.9, 0.0;
    const std::vector<int> all = {0, 1};
    const Eigen::MatrixXd s = sum_of_trees(ens, x, all);
    CHECK((s.array() == m * c).all());

    SUBCASE("probit with zero leaves and zero offset predicts one half") {
        for (auto& draw : ens.draws) {
            for (auto& t : draw) t.node(0).value = 0.0;
        }
        ens.mode = ResponseMode::Probit;
        ens.offset = 0.0;
        const Eigen::MatrixXd p = predict(ens, x);
        CHECK((p.array() == 0.5).all());
    }
}

TEST_CASE("fit: predictions equal per-tree traversal sums and trees stay valid") {
    const MixedData d = mixed_data(300, 4);
    EnsembleConfig cfg = EnsembleConfig::defaults(ResponseMode::Regression);
    cfg.trees = 20;
    cfg.burn_in = 100;
    cfg.draws = 30;
    cfg.seed = 99;
    const PosteriorEnsemble ens = fit(d.table, d.y, ResponseMode::Regression, cfg);
    REQUIRE(ens.draw_count() == 30);
    REQUIRE(ens.sigma.size() == 30);
    const Eigen::MatrixXd x = encode(d.table, ens.schema);
    const Eigen::MatrixXd pred = predict(ens, x);
    for (std::size_t k = 0; k < ens.draw_count(); ++k) {
        for (const auto& tree : ens.draws[k]) {
            std::string why;
            CHECK_MESSAGE(tree.valid(ens.schema, &why), why);
        }
        for (Eigen::Index i = 0; i < x.rows(); i += 7) {
            double sum = 0.0;
            for (const auto& tree : ens.draws[k]) sum += traverse(tree, x, i);
            const double expected = ens.response_mean + ens.response_scale * sum;
            CHECK(pred(i, static_cast<Eigen::Index>(k)) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    CHECK(ens.stats.grow_accepted > 0);
    CHECK(ens.stats.prune_accepted > 0);

    // The fit should beat the mean on training rows.
    const Eigen::VectorXd mean_pred = pred.rowwise().mean();
    double sse = 0.0, sst = 0.0;
    const double ybar = std::accumulate(d.y.begin(), d.y.end(), 0.0) / d.y.size();
    for (std::size_t i = 0; i < d.y.size(); ++i) {
        sse += std::pow(d.y[i] - mean_pred(static_cast<Eigen::Index>(i)), 2);
        sst += std::pow(d.y[i] - ybar, 2);
    }
    CHECK(sse < 0.5 * sst);
}

TEST_CASE("fit is deterministic under a fixed seed") {
    const MixedData d = mixed_data(200, 8);
    EnsembleConfig cfg = EnsembleConfig::defaults(ResponseMode::Probit);
    cfg.trees = 10;
    cfg.burn_in = 50;
    cfg.draws = 20;
    cfg.seed = 1234;
    const auto a = fit(d.table, d.y_binary, ResponseMode::Probit, cfg);
    const auto b = fit(d.table, d.y_binary, ResponseMode::Probit, cfg);
    CHECK(a == b);
    cfg.seed = 1235;
    const auto c = fit(d.table, d.y_binary, ResponseMode::Probit, cfg);
    CHECK_FALSE(a == c);

    const Eigen::MatrixXd p = predict(a, d.table);
    CHECK((p.array() > 0.0).all());
    CHECK((p.array() < 1.0).all());
}

TEST_CASE("relabeling category codes leaves fitted predictions unchanged") {
    const MixedData d = mixed_data(250, 12);
    const FeatureSchema schema = infer_schema(d.table);
    const Eigen::MatrixXd x = encode(d.table, schema);

    // Permute the codes of the categorical predictor in both the data and the dictionary.
    const auto& levels = schema[1].levels;
    std::vector<int> perm(levels.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + 2, perm.end());
    FeatureSchema relabeled = schema;
    for (std::size_t c = 0; c < levels.size(); ++c) relabeled.predictors[1].levels[static_cast<std::size_t>(perm[c])] = levels[c];
    Eigen::MatrixXd x2 = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) x2(i, 1) = perm[static_cast<std::size_t>(x(i, 1))];

    EnsembleConfig cfg = EnsembleConfig::defaults(ResponseMode::Regression);
    cfg.trees = 15;
    cfg.burn_in = 60;
    cfg.draws = 15;
    const auto a = fit(x, schema, d.y, ResponseMode::Regression, cfg);
    const auto b = fit(x2, relabeled, d.y, ResponseMode::Regression, cfg);
    const Eigen::MatrixXd pa = predict(a, x);
    const Eigen::MatrixXd pb = predict(b, x2);
    CHECK((pa.array() == pb.array()).all());
}

TEST_CASE("unseen categorical levels route deterministically") {
    const MixedData d = mixed_data(200, 3);
    EnsembleConfig cfg = EnsembleConfig::defaults(ResponseMode::Regression);
    cfg.trees = 10;
    cfg.burn_in = 50;
    cfg.draws = 10;
    const auto ens = fit(d.table, d.y, ResponseMode::Regression, cfg);
    FeatureTable fresh;
    fresh.add_numeric("x").numeric = {0.0, 0.5};
    fresh.add_categorical("team").text = {"expansion", "expansion"};
    const Eigen::MatrixXd p1 = predict(ens, fresh);
    const Eigen::MatrixXd p2 = predict(ens, fresh);
    CHECK((p1.array() == p2.array()).all());
    CHECK(p1.allFinite());
}

TEST_CASE("fixed root-only regression tree matches the conjugate posterior") {
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
    cfg.draws = 2000;
    const auto ens = fit(t, y, ResponseMode::Regression, cfg);
    const double n = 5.0, sum = 9.0;
    const double precision = n + 1.0;
    const double mean = sum / precision;
    const Eigen::MatrixXd p = predict(ens, t);
    const double draw_mean = p.row(0).mean();
    CHECK(std::fabs(draw_mean - mean) < 3.0 * std::sqrt(1.0 / precision / 2000.0));
    for (const auto& draw : ens.draws) CHECK(draw[0].leaf_count() == 1);
}

TEST_CASE("fit edge cases and errors") {
    FeatureTable one;
    one.add_numeric("x").numeric = {0.3};
    EnsembleConfig cfg;
    cfg.trees = 1;
    cfg.burn_in = 0;
    cfg.draws = 1;

    SUBCASE("one row, probit") {
        const auto ens = fit(one, std::vector<double>{1.0}, ResponseMode::Probit, cfg);
        const Eigen::MatrixXd p = predict(ens, one);
        CHECK(p(0, 0) > 0.0);
        CHECK(p(0, 0) < 1.0);
    }
    SUBCASE("one row, regression without standardization") {
        cfg.standardize = false;
        const auto ens = fit(one, std::vector<double>{2.0}, ResponseMode::Regression, cfg);
        CHECK(std::isfinite(predict(ens, one)(0, 0)));
    }
    SUBCASE("errors") {
        FeatureTable empty;
        empty.add_numeric("x");
        CHECK_THROWS_AS(fit(empty, std::vector<double>{}, ResponseMode::Regression, cfg), std::invalid_argument);
        FeatureTable two;
        two.add_numeric("x").numeric = {0.0, 1.0};
        CHECK_THROWS_AS(fit(two, std::vector<double>{3.0, 3.0}, ResponseMode::Regression, cfg), DegenerateDataError);
        CHECK_THROWS_AS(fit(two, std::vector<double>{0.0, 2.0}, ResponseMode::Probit, cfg), std::invalid_argument);

        const auto ens = fit(two, std::vector<double>{0.0, 1.0}, ResponseMode::Probit, cfg);
        FeatureTable wrong;
        wrong.add_categorical("x").text = {"a"};
        CHECK_THROWS_WITH_AS(predict(ens, wrong), doctest::Contains("'x'"), PredictorMismatch);
        FeatureTable renamed;
        renamed.add_numeric("z").numeric = {0.0};
        CHECK_THROWS_WITH_AS(predict(ens, renamed), doctest::Contains("'x'"), PredictorMismatch);
    }
}
