#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xr/bart.hpp"
#include "xr/data.hpp"
#include "xr/decision.hpp"
#include "xr/eval.hpp"
#include "xr/metrics.hpp"
#include "xr/serialize.hpp"

namespace xr {

// ---------------------------------------------------------------------------------------------
// Model store

std::string hex64(std::uint64_t v);

/// Content hash of a record set, independent of how it was stored.
std::string dataset_fingerprint(const std::vector<PitchRecord>& records);
std::string config_hash(const Json& config);

struct ModelKey {
    std::string kind;
    std::string fingerprint;
    std::string config_hash;

    std::string file_name() const;  // kind-fingerprint-confighash.json
    bool operator==(const ModelKey&) const = default;
};

class ModelStoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Versioned model files in one directory. Storing a different payload under an existing key
/// is refused; storing the same one again is a no-op.
class ModelStore {
public:
    explicit ModelStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path_of(const ModelKey& key) const { return dir_ / key.file_name(); }

    /// `dataset_digest` guards the fingerprint: a second dataset hashing to the same
    /// fingerprint is reported as a collision.
    std::filesystem::path store(const ModelKey& key, const Json& payload, const std::string& dataset_digest,
                                std::map<std::string, std::string> info = {}) const;
    ModelEnvelope load(const ModelKey& key) const;
    std::vector<ModelKey> list() const;
    /// The single stored model of a kind; ambiguous or missing kinds are errors.
    ModelKey find(const std::string& kind) const;

private:
    std::filesystem::path dir_;
};

/// Second, independent hash of the same content as dataset_fingerprint.
std::string dataset_digest(const std::vector<PitchRecord>& records);

// ---------------------------------------------------------------------------------------------
// Loaded models

namespace model_kind {
inline constexpr const char* kStrikeModel = "strike_ensemble";
inline constexpr const char* kContactModel = "contact_ensemble";
inline constexpr const char* kRunsModel = "runs_ensemble";
inline constexpr const char* kRoster = "roster";
}  // namespace model_kind

struct RosterEntry {
    Hand hand = Hand::Right;
    double quality = 0.0;  // median over the player's pitches

    bool operator==(const RosterEntry&) const = default;
};

/// Batters and pitchers seen at fit time.
struct Roster {
    std::map<std::string, RosterEntry> batters;
    std::map<std::string, RosterEntry> pitchers;
    double median_batter_quality = 0.0;
    double median_pitcher_quality = 0.0;

    bool operator==(const Roster&) const = default;
};

Roster build_roster(const std::vector<PitchRecord>& records);
Json to_json(const Roster& r);
Roster roster_from_json(const Json& j);

struct ModelSet {
    PosteriorEnsemble strike;
    PosteriorEnsemble contact;
    PosteriorEnsemble runs;
    Roster roster;
};

ModelSet load_model_set(const ModelStore& store);

/// Fits one component on its partition of `records` (takes, swings or all rows) and records
/// the predictor groups and league-median qualities in the ensemble metadata.
PosteriorEnsemble fit_component(const std::vector<PitchRecord>& records, CvTarget target, const EnsembleConfig& config,
                                unsigned groups = kAllGroups);
const char* component_kind(CvTarget target);

/// Sorted, distinct draw indices: all of 0..available-1 when wanted >= available.
std::vector<int> subsample_draws(int available, int wanted, std::uint64_t seed);

// ---------------------------------------------------------------------------------------------
// What-if queries

class ServiceError : public std::runtime_error {
public:
    ServiceError(std::string code, const std::string& message, int status)
        : std::runtime_error(message), code_(std::move(code)), status_(status) {}
    const std::string& code() const { return code_; }
    int status() const { return status_; }

private:
    std::string code_;
    int status_;
};

/// A player by id, or "generic" with explicit hand and optional quality.
struct PlayerSpec {
    std::string id = "generic";
    std::optional<Hand> hand;
    std::optional<double> quality;  // generic players default to the league median
};

struct GridSpec {
    double x_lo = -1.5, x_hi = 1.5;
    double z_lo = 1.0, z_hi = 4.0;
    int nx = 31, nz = 31;

    double x(int i) const;
    double z(int j) const;
};

inline constexpr int kMaxGridSide = 101;

struct WhatIfQuery {
    GameState game_state;
    PlayerSpec batter;
    PlayerSpec pitcher;
    std::string catcher_id = "generic";
    std::string umpire_id = "generic";
    std::optional<Location> location;  // a single pitch; otherwise `grid`
    GridSpec grid;
    int draws = 200;
    std::uint64_t seed = 0;
    double level = 0.90;

    void validate() const;
};

struct WhatIfCell {
    Location location;
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double p_swing_optimal = 0.0;
    Decision optimal = Decision::Take;
    PitchComponents components;
};

struct WhatIfGrid {
    int nx = 1, nz = 1;
    int draws = 0;
    std::vector<WhatIfCell> cells;  // x varies fastest
};

/// Resolves query personnel against the roster and model levels.
Personnel resolve_personnel(const WhatIfQuery& query, const ModelSet& models);

WhatIfGrid handle_whatif(const WhatIfQuery& query, const ModelSet& models);
/// Same, for callers holding component functions directly (no personnel resolution).
WhatIfGrid handle_whatif(const WhatIfQuery& query, const Personnel& personnel, const ComponentModels& models);

// ---------------------------------------------------------------------------------------------
// Scored pitches and reports

struct ScoredStore {
    std::vector<ScoredPitch> pitches;
    Eigen::MatrixXd evdiff;  // pitches x draws
    ZoneSpec zone;
    std::size_t min_pitches = 1000;
    double level = 0.90;
};

/// Scores records with the loaded models; rows of evdiff align with pitches.
ScoredStore score_records(const ModelSet& models, const std::vector<PitchRecord>& records,
                          const ScoreOptions& options = {});

void write_scored_pitches(std::ostream& out, const std::vector<ScoredPitch>& pitches);
std::vector<ScoredPitch> read_scored_pitches(std::istream& in);

/// "XRDRAWS1", rows and cols as little-endian uint64, then row-major doubles.
void write_draws(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_draws(std::istream& in);

struct BatterReportResponse {
    BatterReport report;
    std::vector<ScoredPitch> pitches;
};

BatterReportResponse handle_batter_report(const ScoredStore& store, const std::string& batter_id, int season);

struct BatterListing {
    std::string batter_id;
    int season = 0;
    std::size_t pitches = 0;
};

std::vector<BatterListing> list_batters(const ScoredStore& store, std::size_t min_pitches);

// ---------------------------------------------------------------------------------------------
// JSON views and the request router

Json to_json(const WhatIfGrid& g);
WhatIfQuery whatif_query_from_json(const Json& j);
Json to_json(const BatterReport& r);
Json to_json(const ScoredPitch& p);
Json to_json(const BatterReportResponse& r);

struct ApiResponse {
    int status = 200;
    Json body;
};

/// Pure request handling shared by the HTTP server and tests. Either pointer may be null, in
/// which case the endpoints that need it answer "unavailable".
class Api {
public:
    Api(const ModelSet* models, const ScoredStore* scored) : models_(models), scored_(scored) {}

    ApiResponse handle(const std::string& method, const std::string& path,
                       const std::map<std::string, std::string>& params, const std::string& body) const;

private:
    const ModelSet* models_;
    const ScoredStore* scored_;
};

/// Blocks serving `api` until the process is stopped.
void serve(const Api& api, const std::string& host, int port);

// ---------------------------------------------------------------------------------------------
// Run manifests

struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::map<std::string, std::string> inputs;   // name -> path
    std::map<std::string, std::string> outputs;  // name -> path
    std::map<std::string, double> seconds;       // stage -> wall time
    Json config;
};

Json to_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);

class StageTimer {
public:
    explicit StageTimer(RunManifest& m, std::string stage)
        : m_(m), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        m_.seconds[stage_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    RunManifest& m_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace xr
