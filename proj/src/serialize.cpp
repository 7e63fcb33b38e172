#include "xr/serialize.hpp"

#include <fstream>
#include <sstream>

namespace xr {

namespace {

template <typename T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

const char* kind_name(PredictorKind k) { return k == PredictorKind::Continuous ? "continuous" : "categorical"; }

PredictorKind parse_kind(const std::string& s) {
    if (s == "continuous") return PredictorKind::Continuous;
    if (s == "categorical") return PredictorKind::Categorical;
    throw ModelFormatError("unknown predictor kind '" + s + "'");
}

}  // namespace

Json to_json(const ModelEnvelope& e) {
    return Json{{"format", kModelFormat}, {"version", kModelVersion}, {"kind", e.kind}, {"info", e.info},
                {"payload", e.payload}};
}

ModelEnvelope envelope_from_json(const Json& j) {
    if (!j.is_object() || j.value("format", "") != kModelFormat) throw ModelFormatError("not an xr model file");
    if (j.value("version", 0) != kModelVersion) {
        throw ModelFormatError("unsupported model file version " + std::to_string(j.value("version", 0)));
    }
    ModelEnvelope e;
    e.kind = j.at("kind").get<std::string>();
    e.info = j.at("info").get<std::map<std::string, std::string>>();
    e.payload = j.at("payload");
    return e;
}

Json to_json(const FeatureSchema& s) {
    Json out = Json::array();
    for (const auto& p : s.predictors) {
        Json o{{"name", p.name}, {"kind", kind_name(p.kind)}};
        if (p.kind == PredictorKind::Continuous) {
            o["lo"] = p.lo;
            o["hi"] = p.hi;
        } else {
            o["levels"] = p.levels;
        }
        out.push_back(std::move(o));
    }
    return out;
}

FeatureSchema schema_from_json(const Json& j) {
    FeatureSchema s;
    for (const auto& o : j) {
        Predictor p;
        p.name = o.at("name").get<std::string>();
        p.kind = parse_kind(o.at("kind").get<std::string>());
        if (p.kind == PredictorKind::Continuous) {
            p.lo = o.at("lo").get<double>();
            p.hi = o.at("hi").get<double>();
        } else {
            p.levels = o.at("levels").get<std::vector<std::string>>();
        }
        s.predictors.push_back(std::move(p));
    }
    return s;
}

Json to_json(const Tree& tree) {
    const Tree t = tree.compacted();
    Json out = Json::array();
    for (const auto& n : t.raw_nodes()) {
        if (n.is_leaf()) {
            out.push_back(Json::array({n.id, n.value}));
        } else if (n.rule.kind == PredictorKind::Continuous) {
            out.push_back(Json::array({n.id, n.rule.predictor, n.rule.threshold}));
        } else {
            std::string mask;
            for (auto b : n.rule.left_levels) mask += b ? '1' : '0';
            out.push_back(Json::array({n.id, n.rule.predictor, mask}));
        }
    }
    return out;
}

namespace {

// Rebuilds the preorder record list starting at `at`; returns the index after the subtree.
std::size_t build_subtree(const Json& records, std::size_t at, int parent, int depth, std::uint64_t expected_id,
                          std::vector<Tree::Node>& nodes) {
    if (at >= records.size()) throw ModelFormatError("tree record list ends inside a subtree");
    const Json& r = records[at];
    if (!r.is_array() || r.size() < 2) throw ModelFormatError("malformed tree node record");
    Tree::Node n;
    n.id = r[0].get<std::uint64_t>();
    if (n.id != expected_id) throw ModelFormatError("tree node ids are not in heap order");
    n.parent = parent;
    n.depth = depth;
    const int slot = static_cast<int>(nodes.size());
    if (r.size() == 2) {
        n.value = r[1].get<double>();
        nodes.push_back(n);
        return at + 1;
    }
    n.rule.predictor = r[1].get<int>();
    if (r[2].is_string()) {
        n.rule.kind = PredictorKind::Categorical;
        for (char c : r[2].get<std::string>()) n.rule.left_levels.push_back(c == '1' ? 1 : 0);
    } else {
        n.rule.threshold = r[2].get<double>();
    }
    nodes.push_back(n);
    nodes[static_cast<std::size_t>(slot)].left = static_cast<int>(nodes.size());
    std::size_t next = build_subtree(records, at + 1, slot, depth + 1, 2 * expected_id, nodes);
    nodes[static_cast<std::size_t>(slot)].right = static_cast<int>(nodes.size());
    next = build_subtree(records, next, slot, depth + 1, 2 * expected_id + 1, nodes);
    return next;
}

}  // namespace

Tree tree_from_json(const Json& j) {
    std::vector<Tree::Node> nodes;
    const std::size_t end = build_subtree(j, 0, -1, 0, 1, nodes);
    if (end != j.size()) throw ModelFormatError("trailing tree node records");
    return Tree::from_nodes(std::move(nodes));
}

Json to_json(const EnsembleConfig& c) {
    return Json{{"trees", c.trees},
                {"alpha", c.alpha},
                {"beta", c.beta},
                {"leaf_scale", optional_json(c.leaf_scale)},
                {"nu", c.nu},
                {"lambda", optional_json(c.lambda)},
                {"sigma_quantile", c.sigma_quantile},
                {"probit_offset", optional_json(c.probit_offset)},
                {"burn_in", c.burn_in},
                {"draws", c.draws},
                {"thin", c.thin},
                {"seed", c.seed},
                {"update_structure", c.update_structure},
                {"fixed_sigma", optional_json(c.fixed_sigma)},
                {"standardize", c.standardize}};
}

EnsembleConfig ensemble_config_from_json(const Json& j) {
    EnsembleConfig c;
    c.trees = j.at("trees").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.leaf_scale = optional_from<double>(j, "leaf_scale");
    c.nu = j.at("nu").get<double>();
    c.lambda = optional_from<double>(j, "lambda");
    c.sigma_quantile = j.at("sigma_quantile").get<double>();
    c.probit_offset = optional_from<double>(j, "probit_offset");
    c.burn_in = j.at("burn_in").get<int>();
    c.draws = j.at("draws").get<int>();
    c.thin = j.at("thin").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.update_structure = j.at("update_structure").get<bool>();
    c.fixed_sigma = optional_from<double>(j, "fixed_sigma");
    c.standardize = j.at("standardize").get<bool>();
    return c;
}

Json to_json(const PosteriorEnsemble& e) {
    Json draws = Json::array();
    for (const auto& draw : e.draws) {
        Json trees = Json::array();
        for (const auto& t : draw) trees.push_back(to_json(t));
        draws.push_back(std::move(trees));
    }
    return Json{{"mode", to_string(e.mode)},
                {"config", to_json(e.config)},
                {"schema", to_json(e.schema)},
                {"response_mean", e.response_mean},
                {"response_scale", e.response_scale},
                {"offset", e.offset},
                {"leaf_scale", e.leaf_scale},
                {"lambda", e.lambda},
                {"sigma", e.sigma},
                {"metadata", e.metadata},
                {"stats",
                 {{"grow_proposed", e.stats.grow_proposed},
                  {"grow_accepted", e.stats.grow_accepted},
                  {"prune_proposed", e.stats.prune_proposed},
                  {"prune_accepted", e.stats.prune_accepted},
                  {"skipped", e.stats.skipped}}},
                {"draws", std::move(draws)}};
}

PosteriorEnsemble ensemble_from_json(const Json& j) {
    PosteriorEnsemble e;
    e.mode = parse_response_mode(j.at("mode").get<std::string>());
    e.config = ensemble_config_from_json(j.at("config"));
    e.schema = schema_from_json(j.at("schema"));
    e.response_mean = j.at("response_mean").get<double>();
    e.response_scale = j.at("response_scale").get<double>();
    e.offset = j.at("offset").get<double>();
    e.leaf_scale = j.at("leaf_scale").get<double>();
    e.lambda = j.at("lambda").get<double>();
    e.sigma = j.at("sigma").get<std::vector<double>>();
    e.metadata = j.at("metadata").get<std::map<std::string, double>>();
    const Json& s = j.at("stats");
    e.stats.grow_proposed = s.at("grow_proposed").get<std::uint64_t>();
    e.stats.grow_accepted = s.at("grow_accepted").get<std::uint64_t>();
    e.stats.prune_proposed = s.at("prune_proposed").get<std::uint64_t>();
    e.stats.prune_accepted = s.at("prune_accepted").get<std::uint64_t>();
    e.stats.skipped = s.at("skipped").get<std::uint64_t>();
    for (const auto& draw : j.at("draws")) {
        std::vector<Tree> trees;
        trees.reserve(draw.size());
        for (const auto& t : draw) {
            Tree tree = tree_from_json(t);
            std::string why;
            if (!tree.valid(e.schema, &why)) throw ModelFormatError("invalid stored tree: " + why);
            trees.push_back(std::move(tree));
        }
        e.draws.push_back(std::move(trees));
    }
    return e;
}

namespace {

Json to_json(const BinSpec& s) { return Json{{"count", s.count}, {"outs", s.outs}, {"bases", s.bases}}; }

BinSpec bin_spec_from_json(const Json& j) {
    BinSpec s{j.at("count").get<bool>(), j.at("outs").get<bool>(), j.at("bases").get<bool>()};
    s.validate();
    return s;
}

}  // namespace

Json to_json(const RexModel& m) {
    return Json{{"spec", to_json(m.spec)},
                {"means", m.means},
                {"counts", m.counts},
                {"global_mean", m.global_mean},
                {"response_sd", m.response_sd}};
}

RexModel rex_from_json(const Json& j) {
    RexModel m;
    m.spec = bin_spec_from_json(j.at("spec"));
    m.means = j.at("means").get<std::vector<double>>();
    m.counts = j.at("counts").get<std::vector<std::size_t>>();
    m.global_mean = j.at("global_mean").get<double>();
    m.response_sd = j.at("response_sd").get<double>();
    if (m.means.size() != m.spec.bin_count() || m.counts.size() != m.spec.bin_count()) {
        throw ModelFormatError("run expectancy table does not match its bin spec");
    }
    return m;
}

Json to_json(const RexPriorConfig& c) {
    return Json{{"grand_mean_variance", c.grand_mean_variance},
                {"half_t_df", c.half_t_df},
                {"half_t_scale", c.half_t_scale},
                {"nu", c.nu},
                {"lambda", optional_json(c.lambda)},
                {"sigma_quantile", c.sigma_quantile},
                {"burn_in", c.burn_in},
                {"draws", c.draws},
                {"thin", c.thin},
                {"seed", c.seed},
                {"fixed_tau", optional_json(c.fixed_tau)},
                {"fixed_sigma", optional_json(c.fixed_sigma)},
                {"fixed_grand_mean", optional_json(c.fixed_grand_mean)}};
}

RexPriorConfig rex_prior_from_json(const Json& j) {
    RexPriorConfig c;
    c.grand_mean_variance = j.at("grand_mean_variance").get<double>();
    c.half_t_df = j.at("half_t_df").get<double>();
    c.half_t_scale = j.at("half_t_scale").get<double>();
    c.nu = j.at("nu").get<double>();
    c.lambda = optional_from<double>(j, "lambda");
    c.sigma_quantile = j.at("sigma_quantile").get<double>();
    c.burn_in = j.at("burn_in").get<int>();
    c.draws = j.at("draws").get<int>();
    c.thin = j.at("thin").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.fixed_tau = optional_from<double>(j, "fixed_tau");
    c.fixed_sigma = optional_from<double>(j, "fixed_sigma");
    c.fixed_grand_mean = optional_from<double>(j, "fixed_grand_mean");
    return c;
}

Json to_json(const BayesRexModel& m) {
    Json draws = Json::array();
    for (const auto& d : m.draws) {
        draws.push_back(Json{{"beta", std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size())},
                             {"grand_mean", d.grand_mean},
                             {"tau", d.tau},
                             {"sigma", d.sigma}});
    }
    return Json{{"spec", to_json(m.spec)},
                {"config", to_json(m.config)},
                {"response_mean", m.response_mean},
                {"response_scale", m.response_scale},
                {"lambda", m.lambda},
                {"counts", m.counts},
                {"draws", std::move(draws)}};
}

BayesRexModel bayes_rex_from_json(const Json& j) {
    BayesRexModel m;
    m.spec = bin_spec_from_json(j.at("spec"));
    m.config = rex_prior_from_json(j.at("config"));
    m.response_mean = j.at("response_mean").get<double>();
    m.response_scale = j.at("response_scale").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.counts = j.at("counts").get<std::vector<std::size_t>>();
    for (const auto& d : j.at("draws")) {
        BayesRexState s;
        const auto beta = d.at("beta").get<std::vector<double>>();
        if (beta.size() != m.spec.bin_count()) throw ModelFormatError("draw has the wrong number of bins");
        s.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        s.grand_mean = d.at("grand_mean").get<double>();
        s.tau = d.at("tau").get<double>();
        s.sigma = d.at("sigma").get<double>();
        m.draws.push_back(std::move(s));
    }
    return m;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << text;
        if (!out.flush()) throw std::runtime_error("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

void save_envelope(const std::filesystem::path& path, const ModelEnvelope& e) {
    write_text_file(path, to_json(e).dump());
}

ModelEnvelope load_envelope(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_text_file(path));
    } catch (const Json::parse_error& err) {
        throw ModelFormatError("'" + path.string() + "' is not valid JSON: " + err.what());
    }
    return envelope_from_json(j);
}

}  // namespace xr
