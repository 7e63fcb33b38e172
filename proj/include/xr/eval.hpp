#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xr/bart.hpp"
#include "xr/data.hpp"
#include "xr/features.hpp"
#include "xr/rex.hpp"

namespace xr {

// ---------------------------------------------------------------------------------------------
// Folds

struct CvPlan {
    int k = 10;
    std::uint64_t seed = 0;
    std::vector<int> fold_of_row;
    std::vector<std::vector<std::size_t>> folds;  // held-out rows per fold, ascending

    std::vector<std::size_t> training_rows(int fold) const;
};

/// Seeded permutation of 0..n-1 cut into k contiguous chunks; the first n mod k folds get one
/// extra row.
CvPlan kfold_split(std::size_t n, int k, std::uint64_t seed);

struct RelativeMse {
    double ratio = 1.0;
    double percent = 0.0;  // (ratio - 1) * 100
};
RelativeMse relative_mse(double candidate, double reference);

// ---------------------------------------------------------------------------------------------
// Models under comparison

enum class CvTarget : std::uint8_t { Strike, Contact, Runs };
std::string to_string(CvTarget t);
CvTarget parse_cv_target(const std::string& s);

enum class ModelKind : std::uint8_t { TreeEnsemble, Rex, BayesRex, Constant, LocationGrid };
std::string to_string(ModelKind k);

/// Cell-mean probabilities on a fixed grid over the plate region, global mean for empty cells.
struct LocationGrid {
    int nx = 20;
    int nz = 20;
    double x_lo = -2.0, x_hi = 2.0;
    double z_lo = 0.5, z_hi = 4.5;
    std::vector<double> cell_mean;
    std::vector<std::size_t> cell_count;
    double global_mean = 0.0;

    int cell(const Location& l) const;  // locations outside the grid use the nearest edge cell
    double predict(const Location& l) const;
};

LocationGrid fit_location_grid(const std::vector<Location>& locations, std::span<const double> y, int nx = 20,
                               int nz = 20);

struct ModelSpec {
    ModelKind kind = ModelKind::TreeEnsemble;
    unsigned groups = kAllGroups;  // tree ensembles on event targets
    BinSpec bins = BinSpec::re24();
    EnsembleConfig ensemble;
    RexPriorConfig rex_prior;

    /// "BART(GPL)", "REx(outs+bases)", ...
    std::string label() const;
};

/// Rows and labels for one target: takes for Strike, swings for Contact, all rows for Runs.
struct CvDataset {
    CvTarget target = CvTarget::Strike;
    std::vector<PitchRecord> rows;
    std::vector<double> labels;

    std::uint64_t label_hash() const;
};

CvDataset make_cv_dataset(const std::vector<PitchRecord>& records, CvTarget target);

/// Fits on train rows and returns posterior-mean predictions for test rows.
Eigen::VectorXd fit_and_predict(const ModelSpec& spec, const CvDataset& data, const std::vector<std::size_t>& train,
                                const std::vector<std::size_t>& test, std::uint64_t seed);

struct CvResult {
    std::string model;
    std::vector<double> fold_mse;
    std::vector<std::size_t> fold_rows;
    double pooled_mse = 0.0;
    std::uint64_t label_hash = 0;
};

CvResult run_cv(const ModelSpec& spec, const CvDataset& data, const CvPlan& plan);

/// Per-fold table and a summary relative to `reference` (an index into results).
void write_cv_report(std::ostream& folds, std::ostream& summary, const std::vector<CvResult>& results,
                     std::size_t reference);

double mean_squared_error(std::span<const double> prediction, std::span<const double> truth);

// ---------------------------------------------------------------------------------------------
// Synthetic pitches

struct StrikeSurface {
    double center_x = 0.0;
    double center_z = 2.5;
    double half_width = 0.83;
    double half_height = 1.0;
    double sharpness = 5.0;        // logit slope in normalized distance
    double umpire_spread = 0.0;    // sd of per-umpire logit offsets

    double probability(const Location& l, double umpire_offset = 0.0) const;
};

struct ContactSurface {
    double base_logit = 2.0;
    double distance_slope = 1.2;   // logit drop per unit squared normalized distance
    double quality_slope = 8.0;    // logit per unit of batter wOBA above 0.320

    double probability(const Location& l, const StrikeSurface& zone, double batter_quality) const;
};

/// Per-pitch outcome probabilities of the half-inning simulator, used after the labeled pitch.
struct InningProcess {
    double p_ball = 0.38;
    double p_called_strike = 0.16;
    double p_swinging_strike = 0.09;
    double p_foul = 0.17;
    // in play: remaining mass
    double p_single = 0.21;   // per ball in play
    double p_double = 0.07;
    double p_triple = 0.005;
    double p_home_run = 0.05;  // remaining in-play mass is an out
    double p_advance_on_out = 0.35;

    void validate() const;
};

struct SyntheticConfig {
    std::size_t rows = 20000;
    std::uint64_t seed = 1;
    std::vector<int> seasons = {2019};
    StrikeSurface strike;
    ContactSurface contact;
    InningProcess inning;
    int batters = 40;
    int pitchers = 30;
    int catchers = 10;
    int umpires = 8;

    void validate() const;
};

struct SyntheticTruth {
    StrikeSurface strike;
    ContactSurface contact;
    std::map<std::string, double> umpire_offset;

    double strike_probability(const PitchContext& c) const;
    double contact_probability(const PitchContext& c) const;
};

struct SyntheticData {
    std::vector<PitchRecord> records;
    SyntheticTruth truth;
};

SyntheticData synthesize(const SyntheticConfig& config);

/// Runs scored from a state to the end of the half-inning under the simulator.
int simulate_rest_of_inning(GameState state, const InningProcess& process, Rng& rng);

}  // namespace xr
