#pragma once

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xr/data.hpp"

namespace xr {

enum class PredictorKind : std::uint8_t { Continuous, Categorical };

/// One predictor column as seen by the tree ensemble.
struct Predictor {
    std::string name;
    PredictorKind kind = PredictorKind::Continuous;
    double lo = 0.0;  // training range (continuous)
    double hi = 0.0;
    std::vector<std::string> levels;  // categorical dictionary; a level's code is its index

    bool operator==(const Predictor&) const = default;
};

struct FeatureSchema {
    std::vector<Predictor> predictors;

    std::size_t size() const { return predictors.size(); }
    const Predictor& operator[](std::size_t j) const { return predictors[j]; }
    bool operator==(const FeatureSchema&) const = default;
};

/// Raw named columns; categorical columns carry level strings.
struct FeatureTable {
    struct Column {
        std::string name;
        PredictorKind kind = PredictorKind::Continuous;
        std::vector<double> numeric;
        std::vector<std::string> text;

        std::size_t size() const { return kind == PredictorKind::Continuous ? numeric.size() : text.size(); }
    };
    std::deque<Column> columns;  // references returned by add_* stay valid

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    Column& add_numeric(std::string name);
    Column& add_categorical(std::string name);
};

class PredictorMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Training schema: ranges of continuous columns and sorted level dictionaries.
FeatureSchema infer_schema(const FeatureTable& table);

/// Encodes a table against a schema. Categorical levels map to their dictionary code; a level
/// missing from the dictionary gets a negative code derived from a hash of its text, which the
/// trees route deterministically. Throws PredictorMismatch naming the offending predictor.
Eigen::MatrixXd encode(const FeatureTable& table, const FeatureSchema& schema);

std::int64_t unseen_level_code(const std::string& level);

// ---------------------------------------------------------------------------------------------
// Pitch feature views

enum FeatureGroup : unsigned {
    kGame = 1u,
    kPersonnel = 2u,
    kLocation = 4u,
    kAllGroups = kGame | kPersonnel | kLocation,
};

std::string group_label(unsigned groups);
unsigned parse_groups(const std::string& text);  // e.g. "G,P,L" or "GL"

struct PitchContext {
    GameState game_state;
    Personnel personnel;
    Location location;
};

PitchContext context_of(const PitchRecord& r);

/// Predictors for the strike and contact models.
FeatureTable event_features(const std::vector<PitchContext>& pitches, unsigned groups = kAllGroups);
FeatureTable event_features(const std::vector<PitchRecord>& pitches, unsigned groups = kAllGroups);

/// Predictors for the runs model: pre-pitch game state plus swing and post-pitch gstate.
struct RunsQuery {
    GameState game_state;
    bool swing;
    GState gstate;
};
FeatureTable runs_features(const std::vector<RunsQuery>& queries);
FeatureTable runs_features(const std::vector<PitchRecord>& pitches);

}  // namespace xr
