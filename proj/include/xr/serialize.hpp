#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "xr/bart.hpp"
#include "xr/rex.hpp"

namespace xr {

using Json = nlohmann::json;

inline constexpr const char* kModelFormat = "xr-model";
inline constexpr int kModelVersion = 1;

namespace model_kind {
inline constexpr const char* kTreeEnsemble = "tree_ensemble";
inline constexpr const char* kRex = "rex";
inline constexpr const char* kBayesRex = "bayes_rex";
}  // namespace model_kind

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// {"format", "version", "kind", "info", "payload"}
struct ModelEnvelope {
    std::string kind;
    std::map<std::string, std::string> info;  // provenance: fingerprint, config hash, seed, ...
    Json payload;
};

Json to_json(const ModelEnvelope& e);
/// Checks format and version.
ModelEnvelope envelope_from_json(const Json& j);

Json to_json(const FeatureSchema& s);
FeatureSchema schema_from_json(const Json& j);

/// Trees are written in preorder as explicit node records: leaves [id, value], continuous
/// splits [id, predictor, threshold], categorical splits [id, predictor, "0110..."].
Json to_json(const Tree& t);
Tree tree_from_json(const Json& j);

Json to_json(const EnsembleConfig& c);
EnsembleConfig ensemble_config_from_json(const Json& j);

Json to_json(const PosteriorEnsemble& e);
PosteriorEnsemble ensemble_from_json(const Json& j);

Json to_json(const RexModel& m);
RexModel rex_from_json(const Json& j);

Json to_json(const RexPriorConfig& c);
RexPriorConfig rex_prior_from_json(const Json& j);

Json to_json(const BayesRexModel& m);
BayesRexModel bayes_rex_from_json(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

void save_envelope(const std::filesystem::path& path, const ModelEnvelope& e);
ModelEnvelope load_envelope(const std::filesystem::path& path);

}  // namespace xr
