#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xr/features.hpp"
#include "xr/random.hpp"

namespace xr {

class DegenerateDataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------------------------
// Trees

/// Split rule. Continuous rows go left iff x < threshold; categorical rows go left iff their
/// level is in the left set. Levels unseen at training time are routed by a hash of
/// (level code, node id).
struct DecisionRule {
    int predictor = -1;
    PredictorKind kind = PredictorKind::Continuous;
    double threshold = 0.0;
    std::vector<std::uint8_t> left_levels;  // membership mask over the predictor's dictionary

    bool goes_left(double value, std::uint64_t node_id) const;
    bool operator==(const DecisionRule&) const = default;
};

class Tree {
public:
    struct Node {
        int left = -1;
        int right = -1;
        int parent = -1;
        int depth = 0;
        std::uint64_t id = 1;  // heap numbering: root 1, children 2k and 2k+1
        DecisionRule rule;
        double value = 0.0;  // leaf mean
        bool live = true;

        bool is_leaf() const { return left < 0; }
        bool operator==(const Node&) const = default;
    };

    Tree() { nodes_.push_back(Node{}); }

    static constexpr int root() { return 0; }
    const Node& node(int k) const { return nodes_[static_cast<std::size_t>(k)]; }
    Node& node(int k) { return nodes_[static_cast<std::size_t>(k)]; }
    std::size_t slot_count() const { return nodes_.size(); }

    std::vector<int> leaves() const;
    /// Internal nodes whose children are both leaves.
    std::vector<int> prunable() const;
    std::size_t leaf_count() const;
    int depth() const;

    /// Splits a leaf; returns the (left, right) child slots.
    std::pair<int, int> grow(int leaf, DecisionRule rule);
    /// Collapses a node whose children are leaves.
    void prune(int node);

    template <typename Row>
    int leaf_for(const Row& row) const {
        int k = root();
        while (!nodes_[static_cast<std::size_t>(k)].is_leaf()) {
            const Node& n = nodes_[static_cast<std::size_t>(k)];
            k = n.rule.goes_left(row(n.rule.predictor), n.id) ? n.left : n.right;
        }
        return k;
    }

    double evaluate(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Index row) const;

    /// Dense copy holding live nodes only, in preorder.
    Tree compacted() const;

    /// Structural check: two children per internal node, consistent parents and ids, categorical
    /// left sets nonempty proper subsets of the levels reaching the node, continuous thresholds
    /// inside the interval reaching the node.
    bool valid(const FeatureSchema& schema, std::string* why = nullptr) const;

    const std::vector<Node>& raw_nodes() const { return nodes_; }
    static Tree from_nodes(std::vector<Node> nodes);

    bool operator==(const Tree&) const = default;

private:
    std::vector<Node> nodes_;
    std::vector<int> free_;
};

// ---------------------------------------------------------------------------------------------
// Tree prior and moves

struct TreePrior {
    double alpha = 0.95;
    double beta = 2.0;
    double leaf_scale = 1.0;  // tau_leaf

    /// alpha (1 + depth)^(-beta)
    double split_probability(int depth) const;
};

/// Which rules are available at a node given its ancestors.
struct NodeAvailability {
    std::vector<double> lo, hi;                 // continuous intervals
    std::vector<std::vector<int>> levels;       // categorical levels reaching the node
    std::vector<int> usable;                    // predictors with at least one legal rule

    bool can_split() const { return !usable.empty(); }
};

/// Per categorical predictor, its level codes sorted by level text (empty for continuous).
/// Rule draws visit levels in this order so fits do not depend on how codes were assigned.
using LevelOrder = std::vector<std::vector<int>>;
LevelOrder level_name_order(const FeatureSchema& schema);

NodeAvailability availability(const Tree& tree, int node, const FeatureSchema& schema,
                              const LevelOrder* order = nullptr);

/// Rows routed into one tree. residual has one entry per row of x; node_of_row holds each
/// row's current leaf slot.
struct TreeData {
    const Eigen::MatrixXd& x;
    std::span<const double> residual;
    std::span<const int> node_of_row;
    const LevelOrder* level_order = nullptr;
};

enum class MoveKind : std::uint8_t { Grow, Prune };

struct MoveProposal {
    MoveKind kind;
    int node = -1;       // leaf to grow or node to prune
    DecisionRule rule;   // grow only
    double log_ratio = 0.0;
};

struct LeafStats {
    double count = 0.0;
    double sum = 0.0;
};

/// Log marginal likelihood of a leaf's residuals with its mean integrated out, dropping terms
/// shared by every tree.
double leaf_log_marginal(const LeafStats& s, double sigma, double leaf_scale);

/// Proposes a GROW or PRUNE move and its log Metropolis-Hastings ratio (tree prior ratio,
/// proposal ratio and integrated likelihood ratio). nullopt when no legal move of that kind
/// exists.
std::optional<MoveProposal> propose_tree_move(const Tree& tree, MoveKind kind, const TreeData& data,
                                              const FeatureSchema& schema, const TreePrior& prior, double sigma,
                                              Rng& rng);

/// Log ratio of the reverse move: PRUNE of `node` in `grown` back to the tree it came from.
double prune_log_ratio(const Tree& grown, int node, const TreeData& data, const FeatureSchema& schema,
                       const TreePrior& prior, double sigma);

/// Draws every leaf mean from its conjugate posterior given per-leaf residual sums.
void sample_leaf_means(Tree& tree, std::span<const LeafStats> stats_by_slot, double sigma, double leaf_scale,
                       Rng& rng);

/// sigma^2 ~ InverseGamma((nu + n)/2, (nu lambda + sum r^2)/2); returns sigma.
double sample_sigma(std::span<const double> residuals, double nu, double lambda, Rng& rng);
double sample_sigma(double sum_squares, std::size_t n, double nu, double lambda, Rng& rng);

/// z_i ~ N(g_i, 1) truncated to (0, inf) when y_i = 1 and (-inf, 0] when y_i = 0.
void sample_probit_latents(std::span<const double> linear_predictor, std::span<const double> labels,
                           std::span<double> latents, Rng& rng);

// ---------------------------------------------------------------------------------------------
// Ensemble

enum class ResponseMode : std::uint8_t { Regression, Probit };

std::string to_string(ResponseMode m);
ResponseMode parse_response_mode(const std::string& s);

struct EnsembleConfig {
    int trees = 200;
    double alpha = 0.95;
    double beta = 2.0;
    std::optional<double> leaf_scale;     // default: +-3 sqrt(m) tau spans the standardized range / +-3
    double nu = 3.0;
    std::optional<double> lambda;         // default: P(sigma < 1) = sigma_quantile
    double sigma_quantile = 0.9;
    std::optional<double> probit_offset;  // default: Phi^-1(training base rate)
    int burn_in = 1000;
    int draws = 1000;
    int thin = 1;
    std::uint64_t seed = 1;
    bool update_structure = true;
    std::optional<double> fixed_sigma;    // standardized scale; regression only
    bool standardize = true;

    static EnsembleConfig defaults(ResponseMode mode);
    void validate() const;
    bool operator==(const EnsembleConfig&) const = default;
};

struct SamplerStats {
    std::uint64_t grow_proposed = 0;
    std::uint64_t grow_accepted = 0;
    std::uint64_t prune_proposed = 0;
    std::uint64_t prune_accepted = 0;
    std::uint64_t skipped = 0;
    bool operator==(const SamplerStats&) const = default;
};

struct PosteriorEnsemble {
    ResponseMode mode = ResponseMode::Regression;
    EnsembleConfig config;
    FeatureSchema schema;
    double response_mean = 0.0;   // regression standardization
    double response_scale = 1.0;
    double offset = 0.0;          // probit
    double leaf_scale = 0.0;
    double lambda = 0.0;
    std::vector<std::vector<Tree>> draws;  // [kept draw][tree]
    std::vector<double> sigma;             // per kept draw, response scale (regression)
    std::map<std::string, double> metadata;
    SamplerStats stats;

    std::size_t draw_count() const { return draws.size(); }
    bool operator==(const PosteriorEnsemble&) const = default;
};

/// Fits a sum-of-trees model by backfitting MCMC.
PosteriorEnsemble fit(const FeatureTable& features, std::span<const double> response, ResponseMode mode,
                      const EnsembleConfig& config);
PosteriorEnsemble fit(const Eigen::MatrixXd& x, const FeatureSchema& schema, std::span<const double> response,
                      ResponseMode mode, const EnsembleConfig& config);

/// rows x kept draws. Regression: de-standardized sum of trees. Probit: Phi(sum + offset),
/// clamped strictly inside (0, 1).
Eigen::MatrixXd predict(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& x);
Eigen::MatrixXd predict(const PosteriorEnsemble& ensemble, const FeatureTable& features);
/// Restricted to the given kept-draw indices, in that order.
Eigen::MatrixXd predict(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& x, std::span<const int> draws);

/// Raw per-draw sum of tree outputs on the internal scale.
Eigen::MatrixXd sum_of_trees(const PosteriorEnsemble& ensemble, const Eigen::MatrixXd& x,
                             std::span<const int> draws);

}  // namespace xr
