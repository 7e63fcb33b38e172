#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xr/data.hpp"
#include "xr/special.hpp"

namespace xr {

/// Which game-state factors define a run-expectancy bin. Bin ids are mixed-radix with the count
/// (balls * 3 + strikes) most significant, then outs, then the base state (first base = bit 0).
struct BinSpec {
    bool count = false;
    bool outs = true;
    bool bases = true;

    std::size_t bin_count() const;
    std::string label() const;  // e.g. "outs+bases"
    void validate() const;
    bool operator==(const BinSpec&) const = default;

    static BinSpec parse(const std::string& text);  // "count,outs,bases" in any order
    static BinSpec re24() { return {false, true, true}; }
    static BinSpec re288() { return {true, true, true}; }
};

std::size_t assign_bin(const GameState& g, const BinSpec& spec);

/// Plain bin averages.
struct RexModel {
    BinSpec spec;
    std::vector<double> means;        // per bin; the global mean where the bin is empty
    std::vector<std::size_t> counts;
    double global_mean = 0.0;
    double response_sd = 0.0;

    double predict(const GameState& g) const;
    bool operator==(const RexModel&) const = default;
};

RexModel fit_rex(std::span<const GameState> states, std::span<const double> runs, const BinSpec& spec);
RexModel fit_rex(const std::vector<PitchRecord>& records, const BinSpec& spec);

struct RexPriorConfig {
    double grand_mean_variance = 100.0;  // tau_betabar^2
    double half_t_df = 7.0;
    double half_t_scale = 1.0;
    double nu = 3.0;
    std::optional<double> lambda;
    double sigma_quantile = 0.9;
    int burn_in = 1000;
    int draws = 1000;
    int thin = 1;
    std::uint64_t seed = 1;
    // Hold a parameter fixed instead of sampling it (standardized scale).
    std::optional<double> fixed_tau;
    std::optional<double> fixed_sigma;
    std::optional<double> fixed_grand_mean;

    void validate() const;
    bool operator==(const RexPriorConfig&) const = default;
};

/// One Gibbs draw, standardized scale.
struct BayesRexState {
    Eigen::VectorXd beta;
    double grand_mean = 0.0;
    double tau = 1.0;
    double sigma = 1.0;

    bool operator==(const BayesRexState& o) const {
        return beta == o.beta && grand_mean == o.grand_mean && tau == o.tau && sigma == o.sigma;
    }
};

struct BayesRexModel {
    BinSpec spec;
    RexPriorConfig config;
    double response_mean = 0.0;
    double response_scale = 1.0;
    double lambda = 0.0;
    std::vector<std::size_t> counts;
    std::vector<BayesRexState> draws;

    /// Per-draw bin value in runs: beta_g * scale + mean.
    Eigen::VectorXd predict(const GameState& g) const;
    /// rows x draws
    Eigen::MatrixXd predict(std::span<const GameState> states) const;
    Eigen::VectorXd posterior_mean_by_bin() const;  // runs scale
    bool operator==(const BayesRexModel&) const = default;
};

/// Mean of beta_g given the other parameters: the precision-weighted average of the bin's
/// standardized sample mean and the grand mean.
double conditional_bin_mean(double n, double sum, double sigma, double tau, double grand_mean);

BayesRexModel fit_bayes_rex(std::span<const GameState> states, std::span<const double> runs, const BinSpec& spec,
                            const RexPriorConfig& priors);
BayesRexModel fit_bayes_rex(const std::vector<PitchRecord>& records, const BinSpec& spec,
                            const RexPriorConfig& priors);

}  // namespace xr
