#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace xr {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataIntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Hand : std::uint8_t { Left, Right };

struct GameState {
    int balls = 0;
    int strikes = 0;
    int outs = 0;
    bool on_first = false;
    bool on_second = false;
    bool on_third = false;
    int score_diff = 0;  // batting minus fielding
    int inning = 1;
    bool top_inning = true;

    /// 0..7, first base is bit 0.
    int base_state() const { return (on_first ? 1 : 0) | (on_second ? 2 : 0) | (on_third ? 4 : 0); }
    bool valid() const;
    bool operator==(const GameState&) const = default;
};

struct Personnel {
    std::string batter_id;
    std::string pitcher_id;
    std::string catcher_id;
    std::string umpire_id = "UNKNOWN";
    Hand batter_hand = Hand::Right;
    Hand pitcher_hand = Hand::Right;
    double batter_quality = 0.0;
    double pitcher_quality = 0.0;

    bool operator==(const Personnel&) const = default;
};

struct Location {
    double plate_x = 0.0;  // feet from plate center, catcher's view
    double plate_z = 0.0;  // feet above ground

    bool plausible() const;
    bool operator==(const Location&) const = default;
};

/// Post-pitch game-state category; a called strike and a swinging miss share Strike.
enum class GState : std::uint8_t { Ball, Strike, Contact };

struct PitchKey {
    std::int64_t game_pk = 0;
    int at_bat = 0;
    int pitch_number = 0;
    int year = 0;
    std::string game_date;  // ISO date when known; orders games within a season

    bool operator==(const PitchKey&) const = default;
};

struct PitchRecord {
    PitchKey key;
    GameState game_state;
    Personnel personnel;
    Location location;
    bool swing = false;
    std::optional<bool> contact;        // present iff swing
    std::optional<bool> called_strike;  // present iff !swing
    int runs_rest_of_inning = 0;        // R
    int bat_score = 0;                  // batting team score when the pitch is thrown
    std::optional<int> post_bat_score;
    std::optional<double> sz_top;
    std::optional<double> sz_bot;
    std::string event;  // plate-appearance result on the final pitch of a PA, else empty

    GState gstate() const;
    bool consistent() const;
    bool operator==(const PitchRecord&) const = default;
};

PitchRecord make_take(PitchKey key, GameState g, Personnel p, Location l, bool called_strike);
PitchRecord make_swing(PitchKey key, GameState g, Personnel p, Location l, bool contact);

std::string to_string(GState g);
GState parse_gstate(const std::string& s);
char hand_code(Hand h);

// ---------------------------------------------------------------------------------------------
// wOBA

struct WobaConfig {
    double walk = 0.69;
    double hit_by_pitch = 0.72;
    double single = 0.89;
    double double_ = 1.27;
    double triple = 1.62;
    double home_run = 2.10;
    bool count_intentional_walk = false;
    bool count_sac_bunt = false;
    bool count_catcher_interference = false;
    double default_league_prior = 0.320;
    std::map<int, double> league_prior;  // season -> previous-season league wOBA

    double prior_for(int season) const;
    void validate() const;
};

/// One plate-appearance outcome for a player, in game order.
struct PlateAppearance {
    std::string player_id;
    std::int64_t game_pk = 0;
    int season = 0;
    std::string game_date;
    std::string event;
};

struct WobaDiagnostics {
    std::map<std::string, std::size_t> unknown_events;
};

/// Per player-season game log of wOBA values, answering "quality going into game g".
class QualityTable {
public:
    /// Mean of per-game wOBA over the player's games in `season` ordered strictly before
    /// (game_date, game_pk); the league prior when there are none.
    double quality(const std::string& player_id, int season, const std::string& game_date,
                   std::int64_t game_pk) const;

    void add_game(const std::string& player_id, int season, const std::string& game_date,
                  std::int64_t game_pk, std::optional<double> woba);
    void set_config(const WobaConfig& config) { config_ = config; }

private:
    struct GameEntry {
        std::string game_date;
        std::int64_t game_pk;
        std::optional<double> woba;
    };
    WobaConfig config_;
    std::map<std::pair<std::string, int>, std::vector<GameEntry>> games_;
};

/// Running wOBA over a plate-appearance history (any order).
QualityTable running_woba(const std::vector<PlateAppearance>& history, const WobaConfig& config,
                          WobaDiagnostics* diagnostics = nullptr);

/// Per-game wOBA of a set of events; nullopt when nothing counts toward the denominator.
std::optional<double> game_woba(const std::vector<std::string>& events, const WobaConfig& config,
                                WobaDiagnostics* diagnostics = nullptr);

// ---------------------------------------------------------------------------------------------
// Run labels

struct HalfInningKey {
    std::int64_t game_pk;
    int inning;
    bool top;
    auto operator<=>(const HalfInningKey&) const = default;
};

HalfInningKey half_inning_of(const PitchRecord& r);

/// Sets runs_rest_of_inning = final batting score of the half-inning minus the score when the
/// pitch was thrown. Throws DataIntegrityError on a decreasing score or a final score below a
/// pitch's score.
void label_runs(std::vector<PitchRecord>& records, const std::map<HalfInningKey, int>& final_scores);

/// Final batting score per half-inning from post_bat_score (falling back to bat_score).
std::map<HalfInningKey, int> final_scores_from_records(const std::vector<PitchRecord>& records);

// ---------------------------------------------------------------------------------------------
// Ingest

struct IngestDiagnostics {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t missing_location = 0;
    std::size_t implausible_location = 0;
    std::size_t undecidable_outcome = 0;
    std::size_t malformed_numeric = 0;
    std::size_t invalid_game_state = 0;
    std::map<std::string, std::size_t> unknown_descriptions;
    WobaDiagnostics woba;
    std::vector<std::string> messages;

    std::string report() const;
};

/// Maps the logical column names used here onto the header names of the input file.
struct ColumnMap {
    std::map<std::string, std::string> names;

    ColumnMap();  // identity over the Statcast names
    const std::string& operator[](const std::string& logical) const;
    /// Applies key=value overrides.
    void apply(const std::map<std::string, std::string>& overrides);
};

enum class SwingOutcome : std::uint8_t { TakeBall, TakeStrike, SwingMiss, SwingContact };

/// Description string to decision and outcome; nullopt when the description is not a pitch
/// outcome we can classify.
std::optional<SwingOutcome> classify_description(const std::string& description, int strikes);

struct ParseResult {
    std::vector<PitchRecord> records;
    IngestDiagnostics diagnostics;
};

/// Parses a Statcast-style CSV. Umpires come from an optional game_pk -> umpire_id table.
/// Runs labels and running-wOBA qualities are filled in.
ParseResult parse_statcast_csv(std::istream& source, const ColumnMap& columns,
                               const std::map<std::int64_t, std::string>* umpires,
                               const WobaConfig& woba);

std::map<std::int64_t, std::string> read_umpire_table(std::istream& source);

/// key=value lines, '#' comments.
std::map<std::string, std::string> read_key_values(std::istream& source);

// ---------------------------------------------------------------------------------------------
// Partition

struct YearRange {
    int first;
    int last;
    bool contains(int y) const { return y >= first && y <= last; }
};

struct Partition {
    std::vector<PitchRecord> takes;
    std::vector<PitchRecord> swings;
    std::vector<PitchRecord> runs_train;
};

Partition partition(const std::vector<PitchRecord>& records, int evaluation_year = 2019,
                    YearRange runs_years = {2015, 2018});

// ---------------------------------------------------------------------------------------------
// Cache file (tab-separated, versioned header)

inline constexpr const char* kCacheMagic = "#xr-pitch-cache";
inline constexpr int kCacheVersion = 1;

void write_cache(std::ostream& out, const std::vector<PitchRecord>& records);
std::vector<PitchRecord> read_cache(std::istream& in);

}  // namespace xr
