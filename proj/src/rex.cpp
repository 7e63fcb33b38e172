#include "xr/rex.hpp"

#include <cmath>
#include <stdexcept>

#include "xr/random.hpp"

namespace xr {

std::size_t BinSpec::bin_count() const {
    return (count ? 12u : 1u) * (outs ? 3u : 1u) * (bases ? 8u : 1u);
}

std::string BinSpec::label() const {
    std::string s;
    const auto add = [&](const char* part) {
        if (!s.empty()) s += '+';
        s += part;
    };
    if (count) add("count");
    if (outs) add("outs");
    if (bases) add("bases");
    return s;
}

void BinSpec::validate() const {
    if (!count && !outs && !bases) throw std::invalid_argument("bin spec must include at least one factor");
}

BinSpec BinSpec::parse(const std::string& text) {
    BinSpec spec{false, false, false};
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find_first_of(",+", start);
        if (end == std::string::npos) end = text.size();
        const std::string part = text.substr(start, end - start);
        if (part == "count") spec.count = true;
        else if (part == "outs") spec.outs = true;
        else if (part == "bases" || part == "baserunners") spec.bases = true;
        else if (!part.empty()) throw std::invalid_argument("unknown bin factor '" + part + "'");
        start = end + 1;
    }
    spec.validate();
    return spec;
}

std::size_t assign_bin(const GameState& g, const BinSpec& spec) {
    std::size_t id = 0;
    if (spec.count) id = static_cast<std::size_t>(g.balls * 3 + g.strikes);
    if (spec.outs) id = id * 3 + static_cast<std::size_t>(g.outs);
    if (spec.bases) id = id * 8 + static_cast<std::size_t>(g.base_state());
    return id;
}

namespace {

void check_inputs(std::span<const GameState> states, std::span<const double> runs, const BinSpec& spec) {
    spec.validate();
    if (states.empty()) throw std::invalid_argument("run expectancy fit needs at least one record");
    if (states.size() != runs.size()) throw std::invalid_argument("states and runs differ in length");
    for (const auto& g : states) {
        if (!g.valid()) throw std::invalid_argument("invalid game state in run expectancy data");
    }
}

std::pair<std::vector<GameState>, std::vector<double>> unpack(const std::vector<PitchRecord>& records) {
    std::vector<GameState> states;
    std::vector<double> runs;
    states.reserve(records.size());
    runs.reserve(records.size());
    for (const auto& r : records) {
        states.push_back(r.game_state);
        runs.push_back(static_cast<double>(r.runs_rest_of_inning));
    }
    return {std::move(states), std::move(runs)};
}

double sample_sd(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double RexModel::predict(const GameState& g) const {
    const std::size_t b = assign_bin(g, spec);
    return counts[b] > 0 ? means[b] : global_mean;
}

RexModel fit_rex(std::span<const GameState> states, std::span<const double> runs, const BinSpec& spec) {
    check_inputs(states, runs, spec);
    RexModel m;
    m.spec = spec;
    const std::size_t bins = spec.bin_count();
    std::vector<double> sums(bins, 0.0);
    m.counts.assign(bins, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const std::size_t b = assign_bin(states[i], spec);
        sums[b] += runs[i];
        ++m.counts[b];
        total += runs[i];
    }
    m.global_mean = total / static_cast<double>(states.size());
    m.response_sd = sample_sd(runs, m.global_mean);
    m.means.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        m.means[b] = m.counts[b] > 0 ? sums[b] / static_cast<double>(m.counts[b]) : m.global_mean;
    }
    return m;
}

RexModel fit_rex(const std::vector<PitchRecord>& records, const BinSpec& spec) {
    const auto [states, runs] = unpack(records);
    return fit_rex(states, runs, spec);
}

// ---------------------------------------------------------------------------------------------

void RexPriorConfig::validate() const {
    if (!(grand_mean_variance > 0.0)) throw std::invalid_argument("grand mean prior variance must be > 0");
    if (!(half_t_df > 0.0) || !(half_t_scale > 0.0)) throw std::invalid_argument("half-t parameters must be > 0");
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be > 0");
    if (lambda && !(*lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    if (!(sigma_quantile > 0.0 && sigma_quantile < 1.0)) throw std::invalid_argument("sigma quantile must be in (0, 1)");
    if (burn_in < 0 || draws < 1 || thin < 1) throw std::invalid_argument("invalid Gibbs iteration counts");
    if (fixed_tau && !(*fixed_tau > 0.0)) throw std::invalid_argument("fixed tau must be > 0");
    if (fixed_sigma && !(*fixed_sigma > 0.0)) throw std::invalid_argument("fixed sigma must be > 0");
}

double conditional_bin_mean(double n, double sum, double sigma, double tau, double grand_mean) {
    const double s2 = sigma * sigma, t2 = tau * tau;
    return (sum / s2 + grand_mean / t2) / (n / s2 + 1.0 / t2);
}

Eigen::VectorXd BayesRexModel::predict(const GameState& g) const {
    const auto b = static_cast<Eigen::Index>(assign_bin(g, spec));
    Eigen::VectorXd out(static_cast<Eigen::Index>(draws.size()));
    for (std::size_t k = 0; k < draws.size(); ++k) {
        out(static_cast<Eigen::Index>(k)) = draws[k].beta(b) * response_scale + response_mean;
    }
    return out;
}

Eigen::MatrixXd BayesRexModel::predict(std::span<const GameState> states) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(draws.size()));
    for (std::size_t i = 0; i < states.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = predict(states[i]).transpose();
    return out;
}

Eigen::VectorXd BayesRexModel::posterior_mean_by_bin() const {
    const auto bins = static_cast<Eigen::Index>(spec.bin_count());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(bins);
    for (const auto& d : draws) mean += d.beta;
    mean /= static_cast<double>(draws.size());
    return mean.array() * response_scale + response_mean;
}

BayesRexModel fit_bayes_rex(std::span<const GameState> states, std::span<const double> runs, const BinSpec& spec,
                            const RexPriorConfig& priors) {
    check_inputs(states, runs, spec);
    priors.validate();

    BayesRexModel model;
    model.spec = spec;
    model.config = priors;
    model.lambda = priors.lambda.value_or(calibrate_sigma_prior(priors.nu, priors.sigma_quantile));

    const std::size_t n = states.size();
    double total = 0.0;
    for (double r : runs) total += r;
    model.response_mean = total / static_cast<double>(n);
    const double sd = sample_sd(runs, model.response_mean);
    model.response_scale = sd > 0.0 ? sd : 1.0;

    // Sufficient statistics of the standardized response per bin.
    const auto bins = static_cast<Eigen::Index>(spec.bin_count());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(bins), sum = Eigen::VectorXd::Zero(bins),
                    sum_sq = Eigen::VectorXd::Zero(bins);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = static_cast<Eigen::Index>(assign_bin(states[i], spec));
        const double z = (runs[i] - model.response_mean) / model.response_scale;
        count(b) += 1.0;
        sum(b) += z;
        sum_sq(b) += z * z;
    }
    model.counts.resize(static_cast<std::size_t>(bins));
    for (Eigen::Index b = 0; b < bins; ++b) model.counts[static_cast<std::size_t>(b)] = static_cast<std::size_t>(count(b));

    Rng rng(priors.seed);
    BayesRexState s;
    s.beta = (count.array() > 0).select(sum.array() / count.array().max(1.0), 0.0);
    s.grand_mean = priors.fixed_grand_mean.value_or(0.0);
    s.tau = priors.fixed_tau.value_or(1.0);
    s.sigma = priors.fixed_sigma.value_or(1.0);
    double aux = 1.0;  // half-t mixing variable
    const double df = priors.half_t_df;
    const double a2 = priors.half_t_scale * priors.half_t_scale;
    const double g = static_cast<double>(bins);

    const int total_iter = priors.burn_in + priors.draws * priors.thin;
    model.draws.reserve(static_cast<std::size_t>(priors.draws));
    for (int it = 0; it < total_iter; ++it) {
        const double s2 = s.sigma * s.sigma, t2 = s.tau * s.tau;
        for (Eigen::Index b = 0; b < bins; ++b) {
            const double precision = count(b) / s2 + 1.0 / t2;
            const double mean = (sum(b) / s2 + s.grand_mean / t2) / precision;
            s.beta(b) = rng.normal(mean, 1.0 / std::sqrt(precision));
        }
        if (!priors.fixed_grand_mean) {
            const double precision = g / t2 + 1.0 / priors.grand_mean_variance;
            s.grand_mean = rng.normal((s.beta.sum() / t2) / precision, 1.0 / std::sqrt(precision));
        }
        if (!priors.fixed_sigma) {
            const double ss = (sum_sq.array() - 2.0 * s.beta.array() * sum.array() +
                               count.array() * s.beta.array().square()).sum();
            const double shape = 0.5 * (priors.nu + static_cast<double>(n));
            const double scale = 0.5 * (priors.nu * model.lambda + std::max(ss, 0.0));
            s.sigma = std::sqrt(rng.inverse_gamma(shape, scale));
        }
        if (!priors.fixed_tau) {
            const double spread = (s.beta.array() - s.grand_mean).square().sum();
            const double tau2 = rng.inverse_gamma(0.5 * (df + g), df / aux + 0.5 * spread);
            aux = rng.inverse_gamma(0.5 * (df + 1.0), df / tau2 + 1.0 / a2);
            s.tau = std::sqrt(tau2);
        }
        if (it >= priors.burn_in && (it - priors.burn_in) % priors.thin == 0) model.draws.push_back(s);
    }
    return model;
}

BayesRexModel fit_bayes_rex(const std::vector<PitchRecord>& records, const BinSpec& spec,
                            const RexPriorConfig& priors) {
    const auto [states, runs] = unpack(records);
    return fit_bayes_rex(states, runs, spec, priors);
}

}  // namespace xr
