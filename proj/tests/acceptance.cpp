#include "gridcert/falsifier.hpp"
#include "gridcert/image.hpp"
#include "gridcert/numfmt.hpp"
#include "gridcert/report.hpp"
#include "gridcert/scheduler.hpp"
#include "gridcert/verifier.hpp"

#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <unistd.h>

using namespace gridcert;
using namespace gridcert::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since( Clock::time_point t )
{
    return std::chrono::duration<double>( Clock::now() - t ).count();
}

int failures = 0;

void report( int id, bool ok, double seconds, const std::string &detail )
{
    std::printf( "%s criterion %d (%.3f s): %s\n", ok ? "PASS" : "FAIL", id, seconds, detail.c_str() );
    std::fflush( stdout );
    if ( !ok )
        ++failures;
}

std::string str( std::ostringstream &s )
{
    return s.str();
}

void criterion1()
{
    Network net = toyDnn();
    auto t = Clock::now();
    Vector y = evaluate( net, Vector{ 2.0, -1.0 } );
    double s = since( t );
    bool ok = y == Vector{ 2.0 } && s < 1e-3;
    std::ostringstream d;
    d << "toy network on (2, -1) gives " << ( y.empty() ? std::string( "nothing" ) : formatDouble( y[0] ) );
    report( 1, ok, s, str( d ) );
}

void criterion2()
{
    Rng rng( 1001 );
    auto t = Clock::now();
    std::size_t bad = 0;
    for ( int k = 0; k < 1000; ++k )
    {
        std::size_t n = rng.index( 1, 8 );
        Network net = randomNetwork( rng, n, randomWidths( rng, 2, 8, 16 ), rng.index( 2, 5 ) );
        Image anchor = randomImage( rng, n, 1 );
        double beta = rng.uniform( -0.5, 0.5 );
        Vector z = anchor.pixels();
        for ( double &v : z )
            v += rng.uniform( -0.2, 0.2 );
        Vector in = z;
        in.push_back( beta );
        if ( evaluate( *brightnessNetwork( net ), in ) != evaluate( net, brighten( z, beta ) ) )
            ++bad;
        double mu = rng.uniform( 0.0, 1.0 ), c = rng.uniform( 0.1, 1.9 );
        if ( evaluate( *contrastNetwork( net, anchor, mu ), Vector{ c } ) != evaluate( net, applyContrast( anchor.pixels(), c, mu ) ) )
            ++bad;
    }
    double s = since( t );
    std::ostringstream d;
    d << bad << " of 1000 triples differ in either encoding";
    report( 2, bad == 0 && s < 10.0, s, str( d ) );
}

struct VerifiedQuery
{
    VerificationQuery query;
    Status status;
};

std::vector<VerifiedQuery> criterion3()
{
    Rng rng( 1003 );
    Budget budget;
    budget.maxSeconds = 600;
    budget.maxBranches = 10000000;
    std::vector<VerifiedQuery> out;
    std::size_t mismatches = 0, badWitness = 0, sat = 0, unsat = 0;
    auto t = Clock::now();
    for ( int k = 0; k < 500; ++k )
    {
        VerificationQuery q = randomVerifierQuery( rng );
        Verdict v = verify( q, budget );
        Verdict o = enumerateOracle( q );
        if ( v.status != o.status || v.status == Status::UNKNOWN )
            ++mismatches;
        if ( v.status == Status::SAT )
        {
            ++sat;
            if ( !v.witness || !validateWitness( q, *v.witness ) )
                ++badWitness;
        }
        if ( v.status == Status::UNSAT )
            ++unsat;
        out.push_back( { std::move( q ), v.status } );
    }
    double s = since( t );
    std::ostringstream d;
    d << ( 500 - mismatches ) << "/500 agree with the enumeration oracle (" << sat << " SAT, " << unsat
      << " UNSAT), " << badWitness << " invalid witnesses";
    report( 3, mismatches == 0 && badWitness == 0 && s < 600.0, s, str( d ) );
    return out;
}

void criterion4( const std::vector<VerifiedQuery> &queries )
{
    Rng rng( 1004 );
    auto t = Clock::now();
    std::size_t checked = 0, hits = 0;
    for ( const VerifiedQuery &vq : queries )
    {
        if ( vq.status != Status::UNSAT )
            continue;
        ++checked;
        const Network &net = *vq.query.network;
        for ( int i = 0; i < 1000000; ++i )
            if ( vq.query.property.satisfiedBy( evaluate( net, sampleBox( rng, vq.query.inputBox ) ) ) )
            {
                ++hits;
                break;
            }
    }
    double s = since( t );
    std::ostringstream d;
    d << checked << " UNSAT queries x 1e6 samples, " << hits << " with a satisfying sample";
    report( 4, hits == 0 && s < 300.0, s, str( d ) );
}

struct StepGraph
{
    std::vector<std::size_t> threshold; // cell ( b, e ) is SAT iff e >= threshold[b]

    Status at( std::size_t b, std::size_t e ) const { return e >= threshold[b] ? Status::SAT : Status::UNSAT; }
};

StepGraph randomStepGraph( Rng &rng, std::size_t nb, std::size_t ne )
{
    StepGraph g{ std::vector<std::size_t>( nb ) };
    std::size_t t = rng.index( 0, ne );
    for ( std::size_t b = 0; b < nb; ++b )
    {
        if ( rng.coin( 0.4 ) )
            t = rng.index( 0, t );
        g.threshold[b] = t;
    }
    return g;
}

void criterion5()
{
    Rng rng( 1005 );
    auto t = Clock::now();
    std::size_t mismatched = 0, overBound = 0, unknown = 0;
    for ( int k = 0; k < 10000; ++k )
    {
        std::size_t nb = rng.index( 1, 8 ), ne = rng.index( 1, 8 );
        StepGraph truth = randomStepGraph( rng, nb, ne );
        VerdictGrid g = incrementalGrid( nb, ne, [&]( std::size_t b, std::size_t e ) {
            ProbeOutcome o;
            o.status = truth.at( b, e );
            return o;
        } );
        bool same = true;
        for ( std::size_t b = 0; b < nb; ++b )
            for ( std::size_t e = 0; e < ne; ++e )
            {
                if ( g.cell( b, e ).status == Status::UNKNOWN )
                    ++unknown;
                same = same && g.cell( b, e ).status == truth.at( b, e );
            }
        if ( !same )
            ++mismatched;
        std::size_t walk = g.probes( ProbeStage::Walk );
        if ( walk > nb + ne - 1 )
            ++overBound;
    }
    double s = since( t );
    std::ostringstream d;
    d << "10000 grids: " << mismatched << " mismatched, " << overBound << " over the |B|+|E|-1 walk bound, " << unknown
      << " UNKNOWN cells";
    report( 5, mismatched == 0 && overBound == 0 && unknown == 0 && s < 30.0, s, str( d ) );
}

void criterion6()
{
    Rng rng( 1006 );
    auto t = Clock::now();
    std::size_t wrong = 0, badCitations = 0, unknownCells = 0;
    for ( int k = 0; k < 10000; ++k )
    {
        std::size_t nb = rng.index( 1, 8 ), ne = rng.index( 1, 8 );
        StepGraph truth = randomStepGraph( rng, nb, ne );
        std::map<std::pair<std::size_t, std::size_t>, Status> answered;
        VerdictGrid g = incrementalGrid( nb, ne, [&]( std::size_t b, std::size_t e ) {
            ProbeOutcome o;
            o.status = rng.coin( 0.1 ) ? Status::UNKNOWN : truth.at( b, e );
            answered[{ b, e }] = o.status;
            return o;
        } );
        for ( std::size_t b = 0; b < nb; ++b )
            for ( std::size_t e = 0; e < ne; ++e )
            {
                const GridCell &c = g.cell( b, e );
                if ( c.status == Status::UNKNOWN )
                {
                    ++unknownCells;
                    continue;
                }
                if ( c.status != truth.at( b, e ) )
                    ++wrong;
                if ( c.provenance != Provenance::Deduced )
                    continue;
                if ( !c.source )
                {
                    ++badCitations;
                    continue;
                }
                auto it = answered.find( *c.source );
                if ( it == answered.end() || it->second == Status::UNKNOWN || it->second != c.status )
                    ++badCitations;
            }
    }
    double s = since( t );
    std::ostringstream d;
    d << "10000 grids with 10% UNKNOWN responses: " << wrong << " wrong cells, " << badCitations
      << " deductions citing an UNKNOWN or missing probe (" << unknownCells << " cells left UNKNOWN)";
    report( 6, wrong == 0 && badCitations == 0, s, str( d ) );
}

void criterion7()
{
    Rng rng( 1007 );
    auto t = Clock::now();
    std::size_t wrong = 0, overBound = 0, maxProbes = 0;
    for ( int k = 0; k < 10000; ++k )
    {
        std::size_t unsatCount = rng.index( 0, 9 );
        ContrastResult r = contrastSearch( 9, [&]( std::size_t i ) {
            ProbeOutcome o;
            o.status = i < unsatCount ? Status::UNSAT : Status::SAT;
            return o;
        } );
        for ( std::size_t i = 0; i < 9; ++i )
            if ( r.statuses[i] != ( i < unsatCount ? Status::UNSAT : Status::SAT ) )
            {
                ++wrong;
                break;
            }
        maxProbes = std::max( maxProbes, r.probes() );
        if ( r.probes() > 5 )
            ++overBound;
    }
    double s = since( t );
    std::ostringstream d;
    d << "10000 arrays of 9: " << wrong << " mismatched, at most " << maxProbes << " probes";
    report( 7, wrong == 0 && overBound == 0, s, str( d ) );
}

// Every deterministic output, keyed by path relative to the output directory.
std::map<std::string, std::string> deterministicOutputs( const std::string &dir )
{
    std::map<std::string, std::string> files;
    for ( const auto &entry : fs::recursive_directory_iterator( dir ) )
    {
        if ( !entry.is_regular_file() )
            continue;
        std::string rel = fs::relative( entry.path(), dir ).generic_string();
        if ( rel == "timings.csv" || rel.rfind( "anchors/", 0 ) == 0 )
            continue;
        files[rel] = readFile( entry.path().string() );
    }
    return files;
}

// Percent UNSAT per ( b, e ) recomputed from the per-anchor grid CSVs.
std::vector<std::vector<std::string>> aggregateFromGrids( const std::string &dir, const SweepSummary &s )
{
    std::size_t nb = s.betas.size(), ne = s.epsilons.size();
    std::vector<std::vector<std::size_t>> unsat( nb, std::vector<std::size_t>( ne ) );
    std::size_t anchors = 0;
    for ( const auto &entry : fs::directory_iterator( fs::path( dir ) / "grids" ) )
    {
        auto st = parseGridCsv( readFile( entry.path().string() ) );
        ++anchors;
        for ( std::size_t b = 0; b < nb; ++b )
            for ( std::size_t e = 0; e < ne; ++e )
                unsat[b][e] += st.at( b ).at( e ) == Status::UNSAT;
    }
    std::vector<std::vector<std::string>> out( nb, std::vector<std::string>( ne ) );
    for ( std::size_t b = 0; b < nb; ++b )
        for ( std::size_t e = 0; e < ne; ++e )
        {
            char buf[32];
            std::snprintf( buf, sizeof( buf ), "%.2f", anchors ? 100.0 * double( unsat[b][e] ) / double( anchors ) : 0.0 );
            out[b][e] = buf;
        }
    return out;
}

std::string pct( double p )
{
    char buf[32];
    std::snprintf( buf, sizeof( buf ), "%.2f", p );
    return buf;
}

// Solves every cell of a few anchors independently: falsifier, then the verifier.
std::size_t crossCheck( const SweepConfig &config, const RunOutcome &run, std::size_t anchors, std::size_t &compared )
{
    auto net = std::make_shared<const Network>( loadNetworkFile( config.networkPath ) );
    auto augmented = brightnessNetwork( *net );
    std::vector<LabeledImage> data = loadDataset( config.datasetPath );
    std::size_t disagreements = 0, done = 0;
    for ( const AnchorResult &r : run.results )
    {
        if ( r.skipped || !r.grid || done == anchors )
            continue;
        ++done;
        const LabeledImage &a = data[r.index];
        for ( std::size_t b = 0; b < config.betas.size(); ++b )
            for ( std::size_t e = 0; e < config.epsilons.size(); ++e )
            {
                Status stored = r.grid->cell( b, e ).status;
                if ( stored == Status::UNKNOWN )
                    continue;
                PerturbationSpec spec{ PerturbationKind::NoiseAndBrightness, config.epsilons[e], config.betas[b], 0, 0,
                                       a.image, a.label };
                VerificationQuery q = brightnessQuery( *net, augmented, spec );
                Status fresh = Status::UNKNOWN;
                AttackReport hit = sampleAttack( q, config.falsifierSamples, deriveSeed( 77, r.index, b, e ) );
                if ( hit.found )
                    fresh = Status::SAT;
                else
                    fresh = verify( q, config.queryBudget ).status;
                if ( fresh == Status::UNKNOWN )
                    continue;
                ++compared;
                disagreements += fresh != stored;
            }
        for ( std::size_t g = 0; g < config.gammas.size(); ++g )
        {
            Status stored = r.contrast->statuses[g];
            if ( stored == Status::UNKNOWN )
                continue;
            PerturbationSpec spec{ PerturbationKind::Contrast, 0, 0, config.gammas[g], config.mu, a.image, a.label };
            Status fresh = verify( contrastQuery( net, spec ), config.queryBudget ).status;
            if ( fresh == Status::UNKNOWN )
                continue;
            ++compared;
            disagreements += fresh != stored;
        }
    }
    return disagreements;
}

struct SweepFindings
{
    bool ran = false;
    SweepSummary summary;
};

SweepFindings criterion8()
{
    SweepFindings f;
    auto t = Clock::now();
    std::ostringstream d;
    bool ok = true;
    try
    {
        SweepConfig config = loadSweepConfig( std::string( GRIDCERT_CONFIG_DIR ) + "/paper-grid.json" );
        fs::path root = fs::temp_directory_path() / ( "gridcert_acceptance_" + std::to_string( ::getpid() ) );
        fs::remove_all( root );

        Network net = loadNetworkFile( config.networkPath );
        std::size_t relus = net.reluCount();
        bool shape = net.outputDim() == 4 && net.layers().size() == 3 && relus <= 64;
        std::size_t dataset = loadDataset( config.datasetPath ).size();
        if ( !shape || dataset != 50 )
        {
            ok = false;
            d << "fixture shape wrong (" << net.layers().size() - 1 << " hidden layers, " << relus << " ReLUs, "
              << dataset << " anchors); ";
        }

        SweepConfig a = config, b = config;
        a.outputDir = ( root / "first" ).string();
        b.outputDir = ( root / "second" ).string();
        auto t1 = Clock::now();
        RunOutcome first = runSweep( a, RunOptions{} );
        double s1 = since( t1 );
        auto t2 = Clock::now();
        RunOutcome second = runSweep( b, RunOptions{} );
        double s2 = since( t2 );
        f.ran = true;
        f.summary = first.summary;
        const SweepSummary &s = first.summary;

        bool fast = s1 < 900.0 && s2 < 900.0;
        ok = ok && fast;
        d << "sweeps took " << pct( s1 ) << " s and " << pct( s2 ) << " s; ";

        bool identical = deterministicOutputs( a.outputDir ) == deterministicOutputs( b.outputDir );
        ok = ok && identical;
        d << ( identical ? "outputs byte-identical" : "outputs DIFFER" ) << "; ";

        bool monotone = true;
        for ( std::size_t bi = 0; bi < s.betas.size(); ++bi )
            for ( std::size_t e = 0; e < s.epsilons.size(); ++e )
            {
                double p = s.cell( bi, e ).percentUnsat();
                if ( e + 1 < s.epsilons.size() && s.cell( bi, e + 1 ).percentUnsat() > p )
                    monotone = false;
                if ( bi + 1 < s.betas.size() && s.cell( bi + 1, e ).percentUnsat() > p )
                    monotone = false;
            }
        ok = ok && monotone;
        d << ( monotone ? "% UNSAT non-increasing in epsilon and beta" : "% UNSAT NOT monotone" ) << "; ";

        auto recomputed = aggregateFromGrids( a.outputDir, s );
        bool consistent = s.verifiedAnchors() > 0;
        for ( std::size_t bi = 0; bi < s.betas.size(); ++bi )
            for ( std::size_t e = 0; e < s.epsilons.size(); ++e )
                consistent = consistent && recomputed[bi][e] == pct( s.cell( bi, e ).percentUnsat() );
        ok = ok && consistent;
        d << ( consistent ? "summary matches per-anchor grids" : "summary DISAGREES with per-anchor grids" ) << "; ";

        std::size_t compared = 0;
        std::size_t disagreements = crossCheck( a, first, 5, compared );
        ok = ok && disagreements == 0;
        d << compared << " cells re-solved independently, " << disagreements << " disagreements; ";

        d << "anchors " << s.anchors << " (skipped " << s.misclassified.size() << ", budget-exhausted "
          << s.exhausted.size() << "); deduced " << pct( 100.0 * s.gridTotals.deducedFraction() )
          << "% of grid cells (published 59%), " << pct( 100.0 * s.contrastTotals.deducedFraction() )
          << "% of contrast cells (published 62%)";

        std::printf( "aggregate %% UNSAT, rows epsilon descending, columns beta:\n%s", aggregateCsv( s ).c_str() );
        std::printf( "%% UNSAT per gamma:\n%s", gammaCsv( s ).c_str() );
        fs::remove_all( root );
    }
    catch ( const std::exception &e )
    {
        ok = false;
        d << "exception: " << e.what();
    }
    report( 8, ok, since( t ), str( d ) );
    return f;
}

void criterion9( const SweepFindings &f )
{
    if ( !f.ran )
    {
        report( 9, false, 0.0, "no sweep results" );
        return;
    }
    const SweepSummary &s = f.summary;
    double epsDrop = 0.0, betaDrop = 0.0;
    std::size_t epsSteps = 0, betaSteps = 0;
    for ( std::size_t b = 0; b < s.betas.size(); ++b )
        for ( std::size_t e = 0; e + 1 < s.epsilons.size(); ++e, ++epsSteps )
            epsDrop += s.cell( b, e ).percentUnsat() - s.cell( b, e + 1 ).percentUnsat();
    for ( std::size_t e = 0; e < s.epsilons.size(); ++e )
        for ( std::size_t b = 0; b + 1 < s.betas.size(); ++b, ++betaSteps )
            betaDrop += s.cell( b, e ).percentUnsat() - s.cell( b + 1, e ).percentUnsat();
    epsDrop /= double( std::max<std::size_t>( 1, epsSteps ) );
    betaDrop /= double( std::max<std::size_t>( 1, betaSteps ) );
    std::ostringstream d;
    d << "mean drop per epsilon step " << pct( epsDrop ) << " points, per beta step " << pct( betaDrop ) << " points";
    report( 9, epsDrop > betaDrop, 0.0, str( d ) );
}

} // namespace

int main()
{
    criterion1();
    criterion2();
    auto queries = criterion3();
    criterion4( queries );
    criterion5();
    criterion6();
    criterion7();
    SweepFindings sweep = criterion8();
    criterion9( sweep );
    std::printf( "%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures );
    return failures ? 1 : 0;
}
