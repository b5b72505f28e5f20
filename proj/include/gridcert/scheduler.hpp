#pragma once

#include "gridcert/image.hpp"
#include "gridcert/network.hpp"
#include "gridcert/verifier.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace gridcert {

/// Brightness values (columns) and noise values (rows), each strictly increasing.
struct ParamGrid
{
    Vector betas;
    Vector epsilons;

    void validate() const;
};

enum class Provenance
{
    Verified,   // decided by a probe: verifier call or direct evaluation
    Deduced,    // implied by a decided cell through monotonicity
    Falsified,  // SAT from a validated falsifier hit
    Unresolved, // never decided before the per-anchor budget ran out (status UNKNOWN)
};

const char *toString( Provenance provenance );
std::optional<Provenance> parseProvenance( const std::string &text );

enum class ProbeMethod { Verifier, Falsifier, Direct };

const char *toString( ProbeMethod method );

/// What one probe of a cell produced. Witness present for SAT when one is available.
struct ProbeOutcome
{
    Status status = Status::UNKNOWN;
    ProbeMethod method = ProbeMethod::Verifier;
    std::optional<Vector> witness;
    VerifierStats stats;
};

enum class ProbeStage { Walk, Search };

struct CallRecord
{
    std::size_t betaIndex = 0;
    std::size_t epsilonIndex = 0;
    Status status = Status::UNKNOWN;
    ProbeMethod method = ProbeMethod::Verifier;
    ProbeStage stage = ProbeStage::Walk;
    VerifierStats stats;
};

struct GridCell
{
    bool decided = false;
    Status status = Status::UNKNOWN;
    Provenance provenance = Provenance::Unresolved;
    /// For Deduced cells: the probed cell ( beta index, epsilon index ) that implies this one.
    std::optional<std::pair<std::size_t, std::size_t>> source;
    std::optional<Vector> witness;
};

/*
  Verdicts over B x E. Cell ( b, e ) pairs betas[b] with epsilons[e]; SAT
  propagates to larger parameters, UNSAT to smaller ones.
*/
class VerdictGrid
{
public:
    VerdictGrid( std::size_t betaCount, std::size_t epsilonCount );

    std::size_t betaCount() const { return _betaCount; }
    std::size_t epsilonCount() const { return _epsilonCount; }
    std::size_t size() const { return _cells.size(); }

    GridCell &cell( std::size_t b, std::size_t e ) { return _cells[b * _epsilonCount + e]; }
    const GridCell &cell( std::size_t b, std::size_t e ) const { return _cells[b * _epsilonCount + e]; }

    std::vector<CallRecord> callLog;

    std::size_t probes( std::optional<ProbeStage> stage = std::nullopt ) const;
    std::size_t verifierCalls() const;

private:
    std::size_t _betaCount;
    std::size_t _epsilonCount;
    std::vector<GridCell> _cells;
};

using CellProbe = std::function<ProbeOutcome( std::size_t betaIndex, std::size_t epsilonIndex )>;

/// Returns false once the per-anchor budget is gone; remaining cells become Unresolved.
using BudgetCheck = std::function<bool()>;

/// Incremental grid walk over an abstract probe. Used directly with mock verifiers.
VerdictGrid incrementalGrid( std::size_t betaCount,
                             std::size_t epsilonCount,
                             const CellProbe &probe,
                             const BudgetCheck &budgetLeft = nullptr );

struct ContrastResult
{
    Vector gammas;
    std::vector<Status> statuses;
    std::vector<Provenance> provenance;
    std::vector<std::optional<Vector>> witnesses;
    std::vector<CallRecord> callLog; // betaIndex holds the gamma index
    /// Index of the largest UNSAT gamma.
    std::optional<std::size_t> boundary;

    std::size_t probes() const { return callLog.size(); }
    std::size_t verifierCalls() const;
};

using LineProbe = std::function<ProbeOutcome( std::size_t index )>;

/// Monotone binary search over a line of increasing parameters: UNSAT below, SAT above.
ContrastResult contrastSearch( std::size_t count, const LineProbe &probe, const BudgetCheck &budgetLeft = nullptr );

struct SchedulerOptions
{
    Budget queryBudget;
    double anchorSeconds = 60.0;
    std::size_t falsifierSamples = 256;
    std::uint64_t seed = 0;
};

/// Noise + brightness grid for one anchor, with the falsifier run before every verifier call.
VerdictGrid incrementalGrid( const std::shared_ptr<const Network> &net,
                             const Image &anchor,
                             std::size_t label,
                             const ParamGrid &grid,
                             const SchedulerOptions &options );

ContrastResult contrastSearch( const std::shared_ptr<const Network> &net,
                               const Image &anchor,
                               std::size_t label,
                               const Vector &gammas,
                               double mu,
                               const SchedulerOptions &options );

struct SweepStats
{
    std::size_t cells = 0;
    std::size_t verified = 0;  // SAT/UNSAT decided by a probe
    std::size_t deduced = 0;
    std::size_t falsified = 0;
    std::size_t unknown = 0;   // any provenance
    std::size_t satVerified = 0, satDeduced = 0, satFalsified = 0;
    std::size_t unsatVerified = 0, unsatDeduced = 0;
    std::size_t probes = 0;
    std::size_t verifierCalls = 0;

    double deducedFraction() const { return cells ? double( deduced ) / double( cells ) : 0.0; }
};

SweepStats stats( const VerdictGrid &grid );
SweepStats stats( const ContrastResult &result );

/// Seed for one probe, derived from the master seed and the probe coordinates.
std::uint64_t deriveSeed( std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c );

} // namespace gridcert
