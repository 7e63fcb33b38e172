#include "xr/bart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xr/special.hpp"
#include "xr/truncnorm.hpp"

namespace xr {

// ---------------------------------------------------------------------------------------------
// Rules and trees

bool DecisionRule::goes_left(double value, std::uint64_t node_id) const {
    if (kind == PredictorKind::Continuous) return value < threshold;
    if (value < 0.0) {
        // Level unseen in training.
        const auto code = static_cast<std::uint64_t>(-static_cast<std::int64_t>(value));
        return (mix64(code ^ mix64(node_id)) & 1ULL) != 0;
    }
    const auto code = static_cast<std::size_t>(value);
    return code < left_levels.size() && left_levels[code] != 0;
}

std::vector<int> Tree::leaves() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        if (nodes_[k].live && nodes_[k].is_leaf()) out.push_back(static_cast<int>(k));
    }
    return out;
}

std::vector<int> Tree::prunable() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const Node& n = nodes_[k];
        if (n.live && !n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf()) {
            out.push_back(static_cast<int>(k));
        }
    }
    return out;
}

std::size_t Tree::leaf_count() const { return leaves().size(); }

int Tree::depth() const {
    int d = 0;
    for (const auto& n : nodes_) {
        if (n.live) d = std::max(d, n.depth);
    }
    return d;
}

std::pair<int, int> Tree::grow(int leaf, DecisionRule rule) {
    auto allocate = [this]() {
        if (!free_.empty()) {
            const int k = free_.back();
            free_.pop_back();
            return k;
        }
        nodes_.emplace_back();
        return static_cast<int>(nodes_.size() - 1);
    };
    const int l = allocate();
    const int r = allocate();
    Node& parent = node(leaf);
    parent.rule = std::move(rule);
    parent.left = l;
    parent.right = r;
    parent.value = 0.0;
    for (const auto& [slot, side] : {std::pair{l, 0ULL}, std::pair{r, 1ULL}}) {
        Node child;
        child.parent = leaf;
        child.depth = parent.depth + 1;
        child.id = 2 * parent.id + side;
        nodes_[static_cast<std::size_t>(slot)] = child;
    }
    return {l, r};
}

void Tree::prune(int k) {
    Node& n = node(k);
    for (int c : {n.left, n.right}) {
        node(c).live = false;
        free_.push_back(c);
    }
    n.left = n.right = -1;
    n.rule = DecisionRule{};
}

double Tree::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Index row) const {
    return node(leaf_for([&](int j) { return x(row, j); })).value;
}

Tree Tree::compacted() const {
    struct Pending {
        int old;
        int parent;
        bool left;
    };
    Tree out;
    out.nodes_.clear();
    std::vector<Pending> stack{{root(), -1, false}};
    while (!stack.empty()) {
        const Pending p = stack.back();
        stack.pop_back();
        const int slot = static_cast<int>(out.nodes_.size());
        Node n = node(p.old);
        n.parent = p.parent;
        out.nodes_.push_back(n);
        if (p.parent >= 0) {
            Node& parent = out.nodes_[static_cast<std::size_t>(p.parent)];
            (p.left ? parent.left : parent.right) = slot;
        }
        if (!n.is_leaf()) {
            stack.push_back({n.right, slot, false});
            stack.push_back({n.left, slot, true});
        }
    }
    return out;
}

Tree Tree::from_nodes(std::vector<Node> nodes) {
    if (nodes.empty()) throw std::invalid_argument("tree needs at least a root node");
    Tree t;
    t.nodes_ = std::move(nodes);
    for (std::size_t k = 0; k < t.nodes_.size(); ++k) {
        if (!t.nodes_[k].live) t.free_.push_back(static_cast<int>(k));
    }
    return t;
}

bool Tree::valid(const FeatureSchema& schema, std::string* why) const {
    const auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (nodes_.empty() || !node(root()).live || node(root()).parent != -1 || node(root()).id != 1) {
        return fail("bad root");
    }
    std::vector<int> stack{root()};
    std::size_t visited = 0;
    while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        ++visited;
        const Node& n = node(k);
        if (!n.live) return fail("dead node reachable");
        if (n.is_leaf()) {
            if (n.right >= 0) return fail("leaf with one child");
            if (!std::isfinite(n.value)) return fail("non-finite leaf value");
            continue;
        }
        if (n.right < 0 || n.left >= static_cast<int>(nodes_.size()) || n.right >= static_cast<int>(nodes_.size())) {
            return fail("internal node without two children");
        }
        for (const auto& [c, side] : {std::pair{n.left, 0ULL}, std::pair{n.right, 1ULL}}) {
            const Node& child = node(c);
            if (child.parent != k || child.depth != n.depth + 1 || child.id != 2 * n.id + side) {
                return fail("inconsistent child links");
            }
        }
        const int j = n.rule.predictor;
        if (j < 0 || j >= static_cast<int>(schema.size())) return fail("rule predictor out of range");
        if (n.rule.kind != schema[static_cast<std::size_t>(j)].kind) return fail("rule kind mismatch");
        const NodeAvailability avail = availability(*this, k, schema);
        const auto ju = static_cast<std::size_t>(j);
        if (n.rule.kind == PredictorKind::Continuous) {
            if (!(n.rule.threshold > avail.lo[ju] && n.rule.threshold <= avail.hi[ju])) {
                return fail("threshold outside the node interval");
            }
        } else {
            const auto& levels = avail.levels[ju];
            std::size_t left = 0;
            for (int code : levels) {
                if (static_cast<std::size_t>(code) < n.rule.left_levels.size() && n.rule.left_levels[static_cast<std::size_t>(code)]) ++left;
            }
            std::size_t total_left = 0;
            for (auto b : n.rule.left_levels) total_left += b ? 1 : 0;
            if (left == 0 || left == levels.size() || total_left != left) {
                return fail("categorical left set is not a nonempty proper subset of the node's levels");
            }
        }
        stack.push_back(n.left);
        stack.push_back(n.right);
    }
    std::size_t live = 0;
    for (const auto& n : nodes_) live += n.live ? 1 : 0;
    if (live != visited) return fail("unreachable live nodes");
    return true;
}

// ---------------------------------------------------------------------------------------------
// Prior, availability, moves

double TreePrior::split_probability(int depth) const {
    return alpha * std::pow(1.0 + depth, -beta);
}

LevelOrder level_name_order(const FeatureSchema& schema) {
    LevelOrder order(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& p = schema[j];
        if (p.kind != PredictorKind::Categorical) continue;
        auto& o = order[j];
        o.resize(p.levels.size());
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) {
            return p.levels[static_cast<std::size_t>(a)] < p.levels[static_cast<std::size_t>(b)];
        });
    }
    return order;
}

namespace {

bool predictor_usable(const NodeAvailability& a, const FeatureSchema& schema, std::size_t j) {
    if (schema[j].kind == PredictorKind::Continuous) return a.hi[j] > a.lo[j];
    return a.levels[j].size() >= 2;
}

void refresh_usable(NodeAvailability& a, const FeatureSchema& schema) {
    a.usable.clear();
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (predictor_usable(a, schema, j)) a.usable.push_back(static_cast<int>(j));
    }
}

// Narrows availability from a parent to one of its children.
void descend(NodeAvailability& a, const DecisionRule& rule, bool left) {
    const auto j = static_cast<std::size_t>(rule.predictor);
    if (rule.kind == PredictorKind::Continuous) {
        if (left) a.hi[j] = std::min(a.hi[j], rule.threshold);
        else a.lo[j] = std::max(a.lo[j], rule.threshold);
    } else {
        auto& levels = a.levels[j];
        std::erase_if(levels, [&](int code) {
            const bool in_left = static_cast<std::size_t>(code) < rule.left_levels.size() &&
                                 rule.left_levels[static_cast<std::size_t>(code)] != 0;
            return in_left != left;
        });
    }
}

}  // namespace

NodeAvailability availability(const Tree& tree, int node, const FeatureSchema& schema, const LevelOrder* order) {
    NodeAvailability a;
    const std::size_t p = schema.size();
    a.lo.assign(p, 0.0);
    a.hi.assign(p, 0.0);
    a.levels.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        if (schema[j].kind == PredictorKind::Continuous) {
            a.lo[j] = schema[j].lo;
            a.hi[j] = schema[j].hi;
        } else if (order && j < order->size() && (*order)[j].size() == schema[j].levels.size()) {
            a.levels[j] = (*order)[j];
        } else {
            a.levels[j].resize(schema[j].levels.size());
            std::iota(a.levels[j].begin(), a.levels[j].end(), 0);
        }
    }
    std::vector<int> path;
    for (int k = node; k >= 0; k = tree.node(k).parent) path.push_back(k);
    for (std::size_t i = path.size(); i-- > 1;) {
        const auto& parent = tree.node(path[i]);
        descend(a, parent.rule, parent.left == path[i - 1]);
    }
    refresh_usable(a, schema);
    return a;
}

double leaf_log_marginal(const LeafStats& s, double sigma, double leaf_scale) {
    const double s2 = sigma * sigma;
    const double t2 = leaf_scale * leaf_scale;
    return -0.5 * std::log1p(s.count * t2 / s2) + t2 * s.sum * s.sum / (2.0 * s2 * (s2 + s.count * t2));
}

namespace {

DecisionRule draw_rule(const NodeAvailability& a, const FeatureSchema& schema, Rng& rng) {
    DecisionRule rule;
    const int j = a.usable[rng.index(a.usable.size())];
    const auto ju = static_cast<std::size_t>(j);
    rule.predictor = j;
    rule.kind = schema[ju].kind;
    if (rule.kind == PredictorKind::Continuous) {
        double c;
        do { c = rng.uniform(a.lo[ju], a.hi[ju]); } while (!(c > a.lo[ju]));
        rule.threshold = c;
    } else {
        const auto& levels = a.levels[ju];
        rule.left_levels.assign(schema[ju].levels.size(), 0);
        for (;;) {
            std::size_t left = 0;
            for (int code : levels) {
                const bool go_left = rng.uniform() < 0.5;
                rule.left_levels[static_cast<std::size_t>(code)] = go_left ? 1 : 0;
                left += go_left ? 1 : 0;
            }
            if (left > 0 && left < levels.size()) break;
        }
    }
    return rule;
}

struct SplitStats {
    LeafStats parent, left, right;
};

// Sufficient statistics of the rows in `node`, split by `rule` (or by the node's existing
// children when rule is null).
SplitStats split_stats(const Tree& tree, int node, const DecisionRule* rule, const TreeData& data) {
    SplitStats s;
    const auto& n = tree.node(node);
    const std::size_t rows = data.node_of_row.size();
    for (std::size_t i = 0; i < rows; ++i) {
        const int k = data.node_of_row[i];
        bool left;
        if (rule) {
            if (k != node) continue;
            left = rule->goes_left(data.x(static_cast<Eigen::Index>(i), rule->predictor), n.id);
        } else {
            if (k != n.left && k != n.right) continue;
            left = k == n.left;
        }
        const double r = data.residual[i];
        LeafStats& side = left ? s.left : s.right;
        side.count += 1.0;
        side.sum += r;
    }
    s.parent = {s.left.count + s.right.count, s.left.sum + s.right.sum};
    return s;
}

// log of [p(big) q(big -> small)] / [p(small) q(small -> big)] where big = small with `node`
// split; the rule density cancels between prior and proposal.
double grow_ratio(int depth, bool left_usable, bool right_usable, std::size_t growable_small,
                  std::size_t prunable_big, const SplitStats& s, const TreePrior& prior, double sigma) {
    const double p_node = prior.split_probability(depth);
    const double p_child = prior.split_probability(depth + 1);
    const double p_left = left_usable ? p_child : 0.0;
    const double p_right = right_usable ? p_child : 0.0;
    double r = std::log(p_node) + std::log1p(-p_left) + std::log1p(-p_right) - std::log1p(-p_node);
    r += std::log(static_cast<double>(growable_small)) - std::log(static_cast<double>(prunable_big));
    r += leaf_log_marginal(s.left, sigma, prior.leaf_scale) + leaf_log_marginal(s.right, sigma, prior.leaf_scale) -
         leaf_log_marginal(s.parent, sigma, prior.leaf_scale);
    return r;
}

bool child_usable(const NodeAvailability& parent, const FeatureSchema& schema, const DecisionRule& rule, bool left) {
    const auto j = static_cast<std::size_t>(rule.predictor);
    for (int u : parent.usable) {
        if (static_cast<std::size_t>(u) != j) return true;
    }
    NodeAvailability child = parent;
    descend(child, rule, left);
    return predictor_usable(child, schema, j);
}

std::size_t count_growable(const Tree& tree, const FeatureSchema& schema, const LevelOrder* order) {
    std::size_t n = 0;
    for (int leaf : tree.leaves()) n += availability(tree, leaf, schema, order).can_split() ? 1 : 0;
    return n;
}

bool is_prunable(const Tree& tree, int k) {
    const auto& n = tree.node(k);
    return !n.is_leaf() && tree.node(n.left).is_leaf() && tree.node(n.right).is_leaf();
}

}  // namespace

std::optional<MoveProposal> propose_tree_move(const Tree& tree, MoveKind kind, const TreeData& data,
                                              const FeatureSchema& schema, const TreePrior& prior, double sigma,
                                              Rng& rng) {
    const LevelOrder* order = data.level_order;
    if (kind == MoveKind::Grow) {
        std::vector<int> growable;
        std::vector<NodeAvailability> avail;
        for (int leaf : tree.leaves()) {
            NodeAvailability a = availability(tree, leaf, schema, order);
            if (a.can_split()) {
                growable.push_back(leaf);
                avail.push_back(std::move(a));
            }
        }
        if (growable.empty()) return std::nullopt;
        const std::size_t pick = rng.index(growable.size());
        const int leaf = growable[pick];
        const NodeAvailability& a = avail[pick];
        MoveProposal m{MoveKind::Grow, leaf, draw_rule(a, schema, rng), 0.0};

        std::size_t prunable_big = tree.prunable().size() + 1;
        const int parent = tree.node(leaf).parent;
        if (parent >= 0 && is_prunable(tree, parent)) --prunable_big;
        const SplitStats s = split_stats(tree, leaf, &m.rule, data);
        m.log_ratio = grow_ratio(tree.node(leaf).depth, child_usable(a, schema, m.rule, true),
                                 child_usable(a, schema, m.rule, false), growable.size(), prunable_big, s, prior,
                                 sigma);
        return m;
    }
    const std::vector<int> candidates = tree.prunable();
    if (candidates.empty()) return std::nullopt;
    const int node = candidates[rng.index(candidates.size())];
    MoveProposal m{MoveKind::Prune, node, {}, prune_log_ratio(tree, node, data, schema, prior, sigma)};
    return m;
}

double prune_log_ratio(const Tree& grown, int node, const TreeData& data, const FeatureSchema& schema,
                       const TreePrior& prior, double sigma) {
    const LevelOrder* order = data.level_order;
    const auto& n = grown.node(node);
    const NodeAvailability a = availability(grown, node, schema, order);
    const bool left_usable = availability(grown, n.left, schema, order).can_split();
    const bool right_usable = availability(grown, n.right, schema, order).can_split();
    // Growable leaves once pruned: the children drop out, the node itself comes back.
    std::size_t growable_small = count_growable(grown, schema, order) + (a.can_split() ? 1 : 0);
    growable_small -= (left_usable ? 1 : 0) + (right_usable ? 1 : 0);
    const std::size_t prunable_big = grown.prunable().size();
    const SplitStats s = split_stats(grown, node, nullptr, data);
    return -grow_ratio(n.depth, left_usable, right_usable, growable_small, prunable_big, s, prior, sigma);
}

void sample_leaf_means(Tree& tree, std::span<const LeafStats> stats_by_slot, double sigma, double leaf_scale,
                       Rng& rng) {
    const double s2 = sigma * sigma;
    const double prior_precision = 1.0 / (leaf_scale * leaf_scale);
    for (int leaf : tree.leaves()) {
        const auto k = static_cast<std::size_t>(leaf);
        const LeafStats s = k < stats_by_slot.size() ? stats_by_slot[k] : LeafStats{};
        const double precision = s.count / s2 + prior_precision;
        const double mean = (s.sum / s2) / precision;
        tree.node(leaf).value = mean + rng.normal() / std::sqrt(precision);
    }
}

double sample_sigma(double sum_squares, std::size_t n, double nu, double lambda, Rng& rng) {
    const double shape = 0.5 * (nu + static_cast<double>(n));
    const double scale = 0.5 * (nu * lambda + sum_squares);
    return std::sqrt(rng.inverse_gamma(shape, scale));
}

double sample_sigma(std::span<const double> residuals, double nu, double lambda, Rng& rng) {
    double ss = 0.0;
    for (double r : residuals) ss += r * r;
    return sample_sigma(ss, residuals.size(), nu, lambda, rng);
}

void sample_probit_latents(std::span<const double> linear_predictor, std::span<const double> labels,
                           std::span<double> latents, Rng& rng) {
    for (std::size_t i = 0; i < latents.size(); ++i) {
        latents[i] = truncated_normal_by_sign(rng, linear_predictor[i], labels[i] > 0.5);
    }
}

// ---------------------------------------------------------------------------------------------
// Ensemble fitting

std::string to_string(ResponseMode m) { return m == ResponseMode::Probit ? "probit" : "regression"; }

ResponseMode parse_response_mode(const std::string& s) {
    if (s == "probit") return ResponseMode::Probit;
    if (s == "regression") return ResponseMode::Regression;
    throw std::invalid_argument("unknown response mode '" + s + "'");
}

EnsembleConfig EnsembleConfig::defaults(ResponseMode mode) {
    EnsembleConfig c;
    c.trees = mode == ResponseMode::Probit ? 50 : 200;
    return c;
}

void EnsembleConfig::validate() const {
    if (trees < 1) throw std::invalid_argument("tree count must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be > 0");
    if (lambda && !(*lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    if (!(sigma_quantile > 0.0 && sigma_quantile < 1.0)) throw std::invalid_argument("sigma quantile must lie in (0, 1)");
    if (leaf_scale && !(*leaf_scale > 0.0)) throw std::invalid_argument("leaf scale must be > 0");
    if (fixed_sigma && !(*fixed_sigma > 0.0)) throw std::invalid_argument("fixed sigma must be > 0");
    if (burn_in < 0 || draws < 1 || thin < 1) throw std::invalid_argument("iteration counts must be burn_in >= 0, draws >= 1, thin >= 1");
}

PosteriorEnsemble fit(const FeatureTable& features, std::span<const double> response, ResponseMode mode,
                      const EnsembleConfig& config) {
    const FeatureSchema schema = infer_schema(features);
    return fit(encode(features, schema), schema, response, mode, config);
}

PosteriorEnsemble fit(const Eigen::MatrixXd& x, const FeatureSchema& schema, std::span<const double> response,
                      ResponseMode mode, const EnsembleConfig& config) {
    config.validate();
    const std::size_t n = static_cast<std::size_t>(x.rows());
    if (n == 0) throw std::invalid_argument("cannot fit a tree ensemble to zero rows");
    if (response.size() != n) throw std::invalid_argument("response length does not match the predictor rows");
    if (static_cast<std::size_t>(x.cols()) != schema.size()) throw PredictorMismatch("predictor count does not match the schema");
    for (double y : response) {
        if (!std::isfinite(y)) throw std::invalid_argument("response contains a non-finite value");
        if (mode == ResponseMode::Probit && y != 0.0 && y != 1.0) {
            throw std::invalid_argument("probit response must be binary (0/1)");
        }
    }

    PosteriorEnsemble ens;
    ens.mode = mode;
    ens.config = config;
    ens.schema = schema;
    const auto m = static_cast<std::size_t>(config.trees);
    const double root_m = std::sqrt(static_cast<double>(m));

    std::vector<double> target(response.begin(), response.end());
    double sigma = 1.0;
    if (mode == ResponseMode::Regression) {
        const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double y : target) ss += (y - mean) * (y - mean);
        const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        if (config.standardize) {
            if (!(sd > 0.0)) throw DegenerateDataError("regression response is constant; cannot standardize");
            ens.response_mean = mean;
            ens.response_scale = sd;
            for (double& y : target) y = (y - mean) / sd;
        }
        const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
        const double range = *hi - *lo;
        ens.leaf_scale = config.leaf_scale.value_or(range > 0.0 ? range / (6.0 * root_m) : 1.0 / root_m);
        ens.lambda = config.lambda.value_or(calibrate_sigma_prior(config.nu, config.sigma_quantile));
        sigma = config.fixed_sigma.value_or(1.0);
    } else {
        const double rate = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
        const double bound = 0.5 / static_cast<double>(n);
        ens.offset = config.probit_offset.value_or(normal_quantile(std::clamp(rate, bound, 1.0 - bound)));
        ens.leaf_scale = config.leaf_scale.value_or(3.0 / (3.0 * root_m));
        ens.lambda = 0.0;
    }

    Rng rng(config.seed);
    const LevelOrder order = level_name_order(schema);
    const TreePrior prior{config.alpha, config.beta, ens.leaf_scale};

    std::vector<Tree> trees(m);
    std::vector<std::vector<int>> node_of_row(m, std::vector<int>(n, Tree::root()));
    std::vector<double> latent;
    std::vector<double> residual(n);
    if (mode == ResponseMode::Probit) {
        latent.resize(n);
        std::vector<double> g(n, ens.offset);
        sample_probit_latents(g, target, latent, rng);
        for (std::size_t i = 0; i < n; ++i) residual[i] = latent[i] - ens.offset;
    } else {
        residual = target;
    }

    std::vector<LeafStats> stats;
    const auto accumulate_stats = [&](const Tree& tree, const std::vector<int>& nodes) {
        stats.assign(tree.slot_count(), LeafStats{});
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = stats[static_cast<std::size_t>(nodes[i])];
            s.count += 1.0;
            s.sum += residual[i];
        }
    };

    const int total = config.burn_in + config.draws * config.thin;
    ens.draws.reserve(static_cast<std::size_t>(config.draws));
    for (int iter = 0; iter < total; ++iter) {
        for (std::size_t t = 0; t < m; ++t) {
            Tree& tree = trees[t];
            auto& nodes = node_of_row[t];
            for (std::size_t i = 0; i < n; ++i) residual[i] += tree.node(nodes[i]).value;

            if (config.update_structure) {
                const MoveKind kind = rng.uniform() < 0.5 ? MoveKind::Grow : MoveKind::Prune;
                const TreeData data{x, residual, nodes, &order};
                const auto move = propose_tree_move(tree, kind, data, schema, prior, sigma, rng);
                if (!move) {
                    ++ens.stats.skipped;
                } else {
                    const bool grow = move->kind == MoveKind::Grow;
                    ++(grow ? ens.stats.grow_proposed : ens.stats.prune_proposed);
                    if (std::log(rng.uniform_open()) < move->log_ratio) {
                        ++(grow ? ens.stats.grow_accepted : ens.stats.prune_accepted);
                        if (grow) {
                            const std::uint64_t id = tree.node(move->node).id;
                            const auto [l, r] = tree.grow(move->node, move->rule);
                            const auto& rule = tree.node(move->node).rule;
                            for (std::size_t i = 0; i < n; ++i) {
                                if (nodes[i] == move->node) {
                                    nodes[i] = rule.goes_left(x(static_cast<Eigen::Index>(i), rule.predictor), id) ? l : r;
                                }
                            }
                        } else {
                            const int l = tree.node(move->node).left;
                            const int r = tree.node(move->node).right;
                            tree.prune(move->node);
                            for (auto& k : nodes) {
                                if (k == l || k == r) k = move->node;
                            }
                        }
                    }
                }
            }
            accumulate_stats(tree, nodes);
            sample_leaf_means(tree, stats, sigma, ens.leaf_scale, rng);
            for (std::size_t i = 0; i < n; ++i) residual[i] -= tree.node(nodes[i]).value;
        }

        if (mode == ResponseMode::Regression) {
            if (!config.fixed_sigma) sigma = sample_sigma(residual, config.nu, ens.lambda, rng);
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double fitted = latent[i] - ens.offset - residual[i];
                latent[i] = truncated_normal_by_sign(rng, ens.offset + fitted, target[i] > 0.5);
                residual[i] = latent[i] - ens.offset - fitted;
            }
        }

        if (iter >= config.burn_in && (iter - config.burn_in) % config.thin == 0) {
            std::vector<Tree> kept;
            kept.reserve(m);
            for (const auto& tree : trees) kept.push_back(tree.compacted());
            ens.draws.push_back(std::move(kept));
            ens.sigma.push_back(mode == ResponseMode::Regression ? sigma * ens.response_scale : 1.0);
        }
    }
    return ens;
}

// ---------------------------------------------------------------------------------------------
// Prediction

Eigen::MatrixXd sum_of_trees(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& x, std::span<const int> draws) {
    if (static_cast<std::size_t>(x.cols()) != ensemble.schema.size()) {
        throw PredictorMismatch("expected " + std::to_string(ensemble.schema.size()) + " predictors, got " +
                                std::to_string(x.cols()));
    }
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(draws.size()));
    for (std::size_t d = 0; d < draws.size(); ++d) {
        const auto k = static_cast<std::size_t>(draws[d]);
        if (k >= ensemble.draws.size()) throw std::out_of_range("draw index out of range");
        const auto& trees = ensemble.draws[k];
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double sum = 0.0;
            for (const auto& tree : trees) sum += tree.evaluate(x, i);
            out(i, static_cast<Eigen::Index>(d)) = sum;
        }
    }
    return out;
}

Eigen::MatrixXd predict(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& x, std::span<const int> draws) {
    Eigen::MatrixXd out = sum_of_trees(ensemble, x, draws);
    if (ensemble.mode == ResponseMode::Regression) {
        out = (out.array() * ensemble.response_scale + ensemble.response_mean).matrix();
    } else {
        constexpr double lo = std::numeric_limits<double>::min();
        const double hi = std::nextafter(1.0, 0.0);
        out = out.unaryExpr([&](double s) { return std::clamp(normal_cdf(s + ensemble.offset), lo, hi); });
    }
    return out;
}

Eigen::MatrixXd predict(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& x) {
    std::vector<int> all(ensemble.draws.size());
    std::iota(all.begin(), all.end(), 0);
    return predict(ensemble, x, all);
}

Eigen::MatrixXd predict(const PosteriorEnsemble& ensemble, const FeatureTable& features) {
    return predict(ensemble, encode(features, ensemble.schema));
}

}  // namespace xr
