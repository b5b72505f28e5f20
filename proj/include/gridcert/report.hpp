#pragma once

#include "gridcert/image.hpp"
#include "gridcert/network.hpp"
#include "gridcert/scheduler.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gridcert {

/*
  Sweep configuration, one JSON object. Relative paths are resolved against
  the directory holding the config file.
*/
struct SweepConfig
{
    std::string networkPath;
    std::string datasetPath; // manifest
    Vector epsilons;
    Vector betas;
    Vector gammas;
    double mu = 0.2585;
    Budget queryBudget;
    double anchorSeconds = 600.0; // grid and contrast each get this much per anchor
    std::size_t falsifierSamples = 256;
    std::uint64_t seed = 0;
    std::string outputDir = "out";
    std::optional<std::size_t> maxAnchors;

    void validate() const;
    ParamGrid grid() const { return ParamGrid{ betas, epsilons }; }
    SchedulerOptions schedulerOptions() const;
};

SweepConfig parseSweepConfig( const std::string &document, const std::string &baseDir );
SweepConfig loadSweepConfig( const std::string &path );

struct AnchorResult
{
    std::size_t index = 0;
    std::size_t label = 0;
    std::size_t predicted = 0;
    bool skipped = false;
    std::string skipReason; // "misclassified" or "tied"
    std::optional<VerdictGrid> grid;
    std::optional<ContrastResult> contrast;
    double gridSeconds = 0.0;
    double contrastSeconds = 0.0;

    /// Some cell was left UNKNOWN because the per-anchor budget ran out.
    bool exhausted() const;
};

/// Grid walk and contrast search for one anchor, or a skip record.
AnchorResult runAnchor( const std::shared_ptr<const Network> &net,
                        const LabeledImage &anchor,
                        std::size_t index,
                        const SweepConfig &config );

/// Parameters that must match for a stored result to be reused on resume.
std::string configKey( const SweepConfig &config );

std::string anchorResultToJson( const AnchorResult &result, const std::string &key );
/// Returns nullopt when the document was produced under a different key.
std::optional<AnchorResult> anchorResultFromJson( const std::string &document, const std::string &key );

/// Writes through a temporary file in the same directory and renames it into place.
void writeFileAtomic( const std::string &path, const std::string &content );
std::string readFile( const std::string &path );

struct CellCounts
{
    std::size_t satVerified = 0, satDeduced = 0, satFalsified = 0;
    std::size_t unsatVerified = 0, unsatDeduced = 0;
    std::size_t unknown = 0;
    std::size_t verifierCalls = 0;
    double verifierSeconds = 0.0;

    std::size_t sat() const { return satVerified + satDeduced + satFalsified; }
    std::size_t unsat() const { return unsatVerified + unsatDeduced; }
    std::size_t total() const { return sat() + unsat() + unknown; }
    double percentUnsat() const { return total() ? 100.0 * double( unsat() ) / double( total() ) : 0.0; }
};

struct SweepSummary
{
    Vector betas, epsilons, gammas;
    std::size_t anchors = 0; // dataset entries considered
    std::vector<std::size_t> misclassified;
    std::vector<std::size_t> exhausted;
    std::vector<CellCounts> grid; // index b * epsilons.size() + e
    std::vector<CellCounts> contrast;
    SweepStats gridTotals;
    SweepStats contrastTotals;

    std::size_t verifiedAnchors() const { return anchors - misclassified.size(); }
    const CellCounts &cell( std::size_t b, std::size_t e ) const { return grid[b * epsilons.size() + e]; }
};

SweepSummary summarize( const SweepConfig &config, const std::vector<AnchorResult> &results );

std::string gridCsv( const AnchorResult &result, const Vector &betas, const Vector &epsilons );
/// Statuses indexed [b][e] from a per-anchor grid CSV.
std::vector<std::vector<Status>> parseGridCsv( const std::string &csv );

std::string aggregateCsv( const SweepSummary &summary );
std::string gammaCsv( const SweepSummary &summary );
/// Overall / deduced / verified rows per parameter, SAT and UNSAT, plus UNKNOWN.
std::string gridTableCsv( const SweepSummary &summary );
std::string contrastTableCsv( const SweepSummary &summary );
std::string summaryJson( const SweepSummary &summary );
/// Wall times, kept apart from the deterministic outputs.
std::string timingsCsv( const SweepConfig &config, const std::vector<AnchorResult> &results );
std::string formatTables( const SweepSummary &summary );

/// Writes every CSV and summary.json into config.outputDir.
void exportResults( const SweepConfig &config, const std::vector<AnchorResult> &results, const SweepSummary &summary );

struct RunOptions
{
    std::size_t jobs = 1;
    bool resume = false;
    std::function<void( const AnchorResult & )> progress;
};

struct RunOutcome
{
    std::vector<AnchorResult> results;
    SweepSummary summary;
    std::size_t reused = 0;
};

/// Runs all anchors, persisting each result as it completes, then exports.
RunOutcome runSweep( const SweepConfig &config, const RunOptions &options );

/// Reads the per-anchor results stored under config.outputDir.
std::vector<AnchorResult> loadResults( const SweepConfig &config );

} // namespace gridcert
