#include "gridcert/scheduler.hpp"

#include "gridcert/error.hpp"
#include "gridcert/falsifier.hpp"
#include "gridcert/perturb.hpp"

#include <chrono>

namespace gridcert {

const char *toString( Provenance provenance )
{
    switch ( provenance )
    {
    case Provenance::Verified:
        return "Verified";
    case Provenance::Deduced:
        return "Deduced";
    case Provenance::Falsified:
        return "Falsified";
    case Provenance::Unresolved:
        return "Unresolved";
    }
    return "?";
}

std::optional<Provenance> parseProvenance( const std::string &text )
{
    for ( Provenance p : { Provenance::Verified, Provenance::Deduced, Provenance::Falsified, Provenance::Unresolved } )
        if ( text == toString( p ) )
            return p;
    return std::nullopt;
}

const char *toString( ProbeMethod method )
{
    switch ( method )
    {
    case ProbeMethod::Verifier:
        return "verifier";
    case ProbeMethod::Falsifier:
        return "falsifier";
    case ProbeMethod::Direct:
        return "direct";
    }
    return "?";
}

void ParamGrid::validate() const
{
    if ( betas.empty() || epsilons.empty() )
        throw Error( ErrorCode::Precondition, "parameter grid is empty" );
    for ( const Vector *axis : { &betas, &epsilons } )
        for ( std::size_t i = 0; i < axis->size(); ++i )
        {
            if ( ( *axis )[i] < 0.0 )
                throw Error( ErrorCode::Range, "grid parameters must be non-negative" );
            if ( i > 0 && !( ( *axis )[i - 1] < ( *axis )[i] ) )
                throw Error( ErrorCode::Precondition, "grid parameters must be strictly increasing" );
        }
}

VerdictGrid::VerdictGrid( std::size_t betaCount, std::size_t epsilonCount )
    : _betaCount( betaCount )
    , _epsilonCount( epsilonCount )
    , _cells( betaCount * epsilonCount )
{
}

std::size_t VerdictGrid::probes( std::optional<ProbeStage> stage ) const
{
    std::size_t n = 0;
    for ( const CallRecord &c : callLog )
        if ( !stage || c.stage == *stage )
            ++n;
    return n;
}

std::size_t VerdictGrid::verifierCalls() const
{
    std::size_t n = 0;
    for ( const CallRecord &c : callLog )
        if ( c.method == ProbeMethod::Verifier )
            ++n;
    return n;
}

std::size_t ContrastResult::verifierCalls() const
{
    std::size_t n = 0;
    for ( const CallRecord &c : callLog )
        if ( c.method == ProbeMethod::Verifier )
            ++n;
    return n;
}

namespace {

class GridWalker
{
public:
    GridWalker( std::size_t betaCount, std::size_t epsilonCount, const CellProbe &probe, const BudgetCheck &budgetLeft )
        : _grid( betaCount, epsilonCount )
        , _probe( probe )
        , _budgetLeft( budgetLeft )
    {
    }

    VerdictGrid run();

private:
    // Not yet decided and never probed.
    bool open( std::size_t b, std::size_t e ) const
    {
        const GridCell &c = _grid.cell( b, e );
        return !c.decided && c.provenance == Provenance::Unresolved;
    }

    bool resolved( std::size_t b, std::size_t e, Status s ) const
    {
        const GridCell &c = _grid.cell( b, e );
        return c.decided && c.status == s;
    }

    std::optional<Status> probeCell( std::size_t b, std::size_t e, ProbeStage stage );
    void deduce( std::size_t b, std::size_t e, Status status );
    void searchLine( const std::vector<std::pair<std::size_t, std::size_t>> &line, std::size_t lo, std::size_t hi );

    VerdictGrid _grid;
    const CellProbe &_probe;
    const BudgetCheck &_budgetLeft;
    bool _exhausted = false;
};

std::optional<Status> GridWalker::probeCell( std::size_t b, std::size_t e, ProbeStage stage )
{
    if ( _exhausted || ( _budgetLeft && !_budgetLeft() ) )
    {
        _exhausted = true;
        return std::nullopt;
    }
    ProbeOutcome out = _probe( b, e );
    _grid.callLog.push_back( { b, e, out.status, out.method, stage, out.stats } );

    GridCell &cell = _grid.cell( b, e );
    cell.provenance = out.method == ProbeMethod::Falsifier ? Provenance::Falsified : Provenance::Verified;
    cell.status = out.status;
    if ( out.status == Status::UNKNOWN )
        return Status::UNKNOWN;
    cell.decided = true;
    cell.witness = std::move( out.witness );
    deduce( b, e, out.status );
    return out.status;
}

// SAT fills the quadrant of larger parameters, UNSAT the quadrant of smaller
// ones. Decided cells are never overwritten; UNKNOWN probes are.
void GridWalker::deduce( std::size_t b, std::size_t e, Status status )
{
    std::size_t bLo = status == Status::SAT ? b : 0;
    std::size_t bHi = status == Status::SAT ? _grid.betaCount() - 1 : b;
    std::size_t eLo = status == Status::SAT ? e : 0;
    std::size_t eHi = status == Status::SAT ? _grid.epsilonCount() - 1 : e;
    for ( std::size_t i = bLo; i <= bHi; ++i )
        for ( std::size_t j = eLo; j <= eHi; ++j )
        {
            GridCell &c = _grid.cell( i, j );
            if ( c.decided )
                continue;
            c.decided = true;
            c.status = status;
            c.provenance = Provenance::Deduced;
            c.source = std::make_pair( b, e );
        }
}

void GridWalker::searchLine( const std::vector<std::pair<std::size_t, std::size_t>> &line,
                             std::size_t lo,
                             std::size_t hi )
{
    if ( lo > hi || hi >= line.size() )
        return;
    std::vector<std::size_t> candidates;
    for ( std::size_t i = lo; i <= hi; ++i )
        if ( open( line[i].first, line[i].second ) )
            candidates.push_back( i );
    if ( candidates.empty() || _exhausted )
        return;
    std::size_t mid = candidates[candidates.size() / 2];
    if ( !probeCell( line[mid].first, line[mid].second, ProbeStage::Search ) )
        return;
    if ( mid > lo )
        searchLine( line, lo, mid - 1 );
    searchLine( line, mid + 1, hi );
}

VerdictGrid GridWalker::run()
{
    const std::size_t nb = _grid.betaCount();
    const std::size_t ne = _grid.epsilonCount();
    if ( nb == 0 || ne == 0 )
        throw Error( ErrorCode::Precondition, "parameter grid is empty" );

    std::size_t b = 0;
    std::ptrdiff_t e = std::ptrdiff_t( ne ) - 1;
    while ( b < nb && e >= 0 && !_exhausted )
    {
        std::size_t ue = std::size_t( e );
        if ( resolved( b, ue, Status::SAT ) )
        {
            --e;
            continue;
        }
        if ( resolved( b, ue, Status::UNSAT ) || !open( b, ue ) )
        {
            ++b;
            continue;
        }
        if ( b == nb - 1 )
        {
            std::vector<std::pair<std::size_t, std::size_t>> column;
            for ( std::size_t j = 0; j <= ue; ++j )
                column.emplace_back( b, j );
            searchLine( column, 0, ue );
            break;
        }
        if ( ue == 0 )
        {
            std::vector<std::pair<std::size_t, std::size_t>> row;
            for ( std::size_t i = b; i < nb; ++i )
                row.emplace_back( i, 0 );
            searchLine( row, 0, row.size() - 1 );
            break;
        }

        auto status = probeCell( b, ue, ProbeStage::Walk );
        if ( !status )
            break;
        if ( *status == Status::SAT )
            --e;
        else if ( *status == Status::UNSAT )
            ++b;
        else
        {
            // Column b above e is already SAT; settle the cells below by search.
            std::vector<std::pair<std::size_t, std::size_t>> column;
            for ( std::size_t j = 0; j < ue; ++j )
                column.emplace_back( b, j );
            searchLine( column, 0, ue - 1 );
            ++b;
        }
    }

    for ( std::size_t i = 0; i < nb; ++i )
        for ( std::size_t j = 0; j < ne; ++j )
        {
            GridCell &c = _grid.cell( i, j );
            if ( c.decided || c.provenance != Provenance::Unresolved )
                continue;
            if ( !_exhausted )
                throw Error( ErrorCode::Internal, "grid walk left a cell undecided" );
            c.status = Status::UNKNOWN;
        }
    return std::move( _grid );
}

class LineSearcher
{
public:
    LineSearcher( std::size_t count, const LineProbe &probe, const BudgetCheck &budgetLeft )
        : _probe( probe )
        , _budgetLeft( budgetLeft )
        , _decided( count, false )
    {
        _result.statuses.assign( count, Status::UNKNOWN );
        _result.provenance.assign( count, Provenance::Unresolved );
        _result.witnesses.resize( count );
    }

    ContrastResult run()
    {
        if ( !_decided.empty() )
            search( 0, _decided.size() - 1 );
        for ( std::size_t i = 0; i < _decided.size(); ++i )
            if ( _decided[i] && _result.statuses[i] == Status::UNSAT )
                _result.boundary = i;
        return std::move( _result );
    }

private:
    bool open( std::size_t i ) const { return !_decided[i] && _result.provenance[i] == Provenance::Unresolved; }

    void search( std::size_t lo, std::size_t hi )
    {
        std::vector<std::size_t> candidates;
        for ( std::size_t i = lo; i <= hi; ++i )
            if ( open( i ) )
                candidates.push_back( i );
        if ( candidates.empty() || _exhausted )
            return;
        if ( _budgetLeft && !_budgetLeft() )
        {
            _exhausted = true;
            return;
        }
        std::size_t mid = candidates[candidates.size() / 2];
        ProbeOutcome out = _probe( mid );
        _result.callLog.push_back( { mid, 0, out.status, out.method, ProbeStage::Search, out.stats } );
        _result.statuses[mid] = out.status;
        _result.provenance[mid] = out.method == ProbeMethod::Falsifier ? Provenance::Falsified : Provenance::Verified;
        if ( out.status != Status::UNKNOWN )
        {
            _decided[mid] = true;
            _result.witnesses[mid] = std::move( out.witness );
            std::size_t from = out.status == Status::SAT ? mid + 1 : 0;
            std::size_t to = out.status == Status::SAT ? _decided.size() : mid;
            for ( std::size_t i = from; i < to; ++i )
                if ( !_decided[i] )
                {
                    _decided[i] = true;
                    _result.statuses[i] = out.status;
                    _result.provenance[i] = Provenance::Deduced;
                }
        }
        if ( mid > lo )
            search( lo, mid - 1 );
        if ( mid < hi )
            search( mid + 1, hi );
    }

    const LineProbe &_probe;
    const BudgetCheck &_budgetLeft;
    std::vector<bool> _decided;
    ContrastResult _result;
    bool _exhausted = false;
};

using Clock = std::chrono::steady_clock;

BudgetCheck deadlineCheck( double seconds )
{
    auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>( std::chrono::duration<double>( seconds ) );
    return [deadline]() { return Clock::now() < deadline; };
}

ProbeOutcome probeQuery( const VerificationQuery &query, const SchedulerOptions &options, std::uint64_t seed )
{
    ProbeOutcome out;
    if ( options.falsifierSamples > 0 )
    {
        AttackReport attack = sampleAttack( query, options.falsifierSamples, seed );
        // The falsifier is only a hint; its witness is checked again here.
        if ( attack.found && validateWitness( query, *attack.found ) )
        {
            out.status = Status::SAT;
            out.method = ProbeMethod::Falsifier;
            out.witness = std::move( attack.found );
            return out;
        }
    }
    Verdict verdict = verify( query, options.queryBudget );
    out.status = verdict.status;
    out.method = ProbeMethod::Verifier;
    out.witness = std::move( verdict.witness );
    out.stats = verdict.stats;
    return out;
}

} // namespace

VerdictGrid incrementalGrid( std::size_t betaCount,
                             std::size_t epsilonCount,
                             const CellProbe &probe,
                             const BudgetCheck &budgetLeft )
{
    GridWalker walker( betaCount, epsilonCount, probe, budgetLeft );
    return walker.run();
}

ContrastResult contrastSearch( std::size_t count, const LineProbe &probe, const BudgetCheck &budgetLeft )
{
    if ( count == 0 )
        throw Error( ErrorCode::Precondition, "contrast search needs at least one gamma" );
    LineSearcher searcher( count, probe, budgetLeft );
    return searcher.run();
}

std::uint64_t deriveSeed( std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c )
{
    // splitmix64 over the combined coordinates
    std::uint64_t x = master;
    for ( std::uint64_t v : { a, b, c } )
    {
        x += 0x9E3779B97F4A7C15ULL + v;
        x = ( x ^ ( x >> 30 ) ) * 0xBF58476D1CE4E5B9ULL;
        x = ( x ^ ( x >> 27 ) ) * 0x94D049BB133111EBULL;
        x ^= x >> 31;
    }
    return x;
}

VerdictGrid incrementalGrid( const std::shared_ptr<const Network> &net,
                             const Image &anchor,
                             std::size_t label,
                             const ParamGrid &grid,
                             const SchedulerOptions &options )
{
    grid.validate();
    options.queryBudget.validate();
    requireStrictlyClassified( *net, anchor, label );

    auto augmented = brightnessNetwork( *net );
    auto specFor = [&]( std::size_t b, std::size_t e ) {
        return PerturbationSpec{ PerturbationKind::NoiseAndBrightness, grid.epsilons[e], grid.betas[b], 0.0, 0.0, anchor, label };
    };

    CellProbe probe = [&]( std::size_t b, std::size_t e ) {
        if ( grid.betas[b] == 0.0 && grid.epsilons[e] == 0.0 )
        {
            // The anchor itself: strictly classified, so robust.
            ProbeOutcome out;
            out.status = Status::UNSAT;
            out.method = ProbeMethod::Direct;
            return out;
        }
        VerificationQuery query = brightnessQuery( *net, augmented, specFor( b, e ) );
        return probeQuery( query, options, deriveSeed( options.seed, 0, b, e ) );
    };

    VerdictGrid result = incrementalGrid( grid.betas.size(), grid.epsilons.size(), probe, deadlineCheck( options.anchorSeconds ) );

    // Deduced SAT cells reuse their source witness when it is valid for their own query.
    for ( std::size_t b = 0; b < result.betaCount(); ++b )
        for ( std::size_t e = 0; e < result.epsilonCount(); ++e )
        {
            GridCell &c = result.cell( b, e );
            if ( c.provenance != Provenance::Deduced || c.status != Status::SAT || !c.source )
                continue;
            const auto &src = result.cell( c.source->first, c.source->second ).witness;
            if ( !src )
                continue;
            VerificationQuery query = brightnessQuery( *net, augmented, specFor( b, e ) );
            if ( validateWitness( query, *src ) )
                c.witness = src;
        }
    return result;
}

ContrastResult contrastSearch( const std::shared_ptr<const Network> &net,
                               const Image &anchor,
                               std::size_t label,
                               const Vector &gammas,
                               double mu,
                               const SchedulerOptions &options )
{
    if ( gammas.empty() )
        throw Error( ErrorCode::Precondition, "contrast search needs at least one gamma" );
    for ( std::size_t i = 0; i < gammas.size(); ++i )
    {
        if ( !( gammas[i] > 0.0 && gammas[i] <= 1.0 ) )
            throw Error( ErrorCode::Range, "gamma values must lie in (0, 1]" );
        if ( i > 0 && !( gammas[i - 1] < gammas[i] ) )
            throw Error( ErrorCode::Precondition, "gamma values must be strictly increasing" );
    }
    options.queryBudget.validate();
    requireStrictlyClassified( *net, anchor, label );

    LineProbe probe = [&]( std::size_t i ) {
        PerturbationSpec spec{ PerturbationKind::Contrast, 0.0, 0.0, gammas[i], mu, anchor, label };
        return probeQuery( contrastQuery( net, spec ), options, deriveSeed( options.seed, 1, i, 0 ) );
    };
    ContrastResult result = contrastSearch( gammas.size(), probe, deadlineCheck( options.anchorSeconds ) );
    result.gammas = gammas;
    return result;
}

namespace {

void tally( SweepStats &s, Status status, Provenance provenance )
{
    ++s.cells;
    if ( status == Status::UNKNOWN )
    {
        ++s.unknown;
        return;
    }
    bool sat = status == Status::SAT;
    switch ( provenance )
    {
    case Provenance::Verified:
        ++s.verified;
        ++( sat ? s.satVerified : s.unsatVerified );
        break;
    case Provenance::Deduced:
        ++s.deduced;
        ++( sat ? s.satDeduced : s.unsatDeduced );
        break;
    case Provenance::Falsified:
        ++s.falsified;
        ++s.satFalsified;
        break;
    case Provenance::Unresolved:
        break;
    }
}

} // namespace

SweepStats stats( const VerdictGrid &grid )
{
    SweepStats s;
    for ( std::size_t b = 0; b < grid.betaCount(); ++b )
        for ( std::size_t e = 0; e < grid.epsilonCount(); ++e )
            tally( s, grid.cell( b, e ).status, grid.cell( b, e ).provenance );
    s.probes = grid.probes();
    s.verifierCalls = grid.verifierCalls();
    return s;
}

SweepStats stats( const ContrastResult &result )
{
    SweepStats s;
    for ( std::size_t i = 0; i < result.statuses.size(); ++i )
        tally( s, result.statuses[i], result.provenance[i] );
    s.probes = result.probes();
    s.verifierCalls = result.verifierCalls();
    return s;
}

} // namespace gridcert
