#include "gridcert/report.hpp"

#include "gridcert/error.hpp"
#include "gridcert/numfmt.hpp"
#include "gridcert/perturb.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace gridcert {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

double readNumber( const json &value, const std::string &what )
{
    if ( value.is_number() )
        return value.get<double>();
    if ( value.is_string() )
        if ( auto d = parseDouble( value.get<std::string>() ) )
            return *d;
    throw Error( ErrorCode::Format, "config: " + what + " must be a number" );
}

Vector readArray( const json &value, const std::string &what )
{
    if ( !value.is_array() )
        throw Error( ErrorCode::Format, "config: " + what + " must be an array" );
    Vector out;
    for ( const auto &v : value )
        out.push_back( readNumber( v, what ) );
    return out;
}

std::uint64_t readCount( const json &value, const std::string &what )
{
    if ( !value.is_number_integer() || value.get<std::int64_t>() < 0 )
        throw Error( ErrorCode::Format, "config: " + what + " must be a non-negative integer" );
    return value.get<std::uint64_t>();
}

std::string resolvePath( const std::string &path, const std::string &baseDir )
{
    fs::path p( path );
    if ( p.is_absolute() || baseDir.empty() )
        return p.lexically_normal().string();
    return ( fs::path( baseDir ) / p ).lexically_normal().string();
}

void requireIncreasing( const Vector &v, const std::string &what )
{
    if ( v.empty() )
        throw Error( ErrorCode::Precondition, "config: " + what + " is empty" );
    for ( std::size_t i = 1; i < v.size(); ++i )
        if ( !( v[i - 1] < v[i] ) )
            throw Error( ErrorCode::Precondition, "config: " + what + " must be strictly increasing" );
}

std::uint64_t fnv1a( const std::string &bytes )
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for ( unsigned char c : bytes )
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

json numberArray( const Vector &v )
{
    json out = json::array();
    for ( double x : v )
        out.push_back( formatDouble( x ) );
    return out;
}

json witnessJson( const std::optional<Vector> &w )
{
    return w ? numberArray( *w ) : json( nullptr );
}

std::optional<Vector> witnessFrom( const json &value )
{
    if ( value.is_null() )
        return std::nullopt;
    return readArray( value, "witness" );
}

Status statusFrom( const json &value )
{
    auto s = parseStatus( value.get<std::string>() );
    if ( !s )
        throw Error( ErrorCode::Format, "result: bad status " + value.dump() );
    return *s;
}

Provenance provenanceFrom( const json &value )
{
    auto p = parseProvenance( value.get<std::string>() );
    if ( !p )
        throw Error( ErrorCode::Format, "result: bad provenance " + value.dump() );
    return *p;
}

ProbeMethod methodFrom( const json &value )
{
    for ( ProbeMethod m : { ProbeMethod::Verifier, ProbeMethod::Falsifier, ProbeMethod::Direct } )
        if ( value.get<std::string>() == toString( m ) )
            return m;
    throw Error( ErrorCode::Format, "result: bad probe method " + value.dump() );
}

json callsJson( const std::vector<CallRecord> &calls )
{
    json out = json::array();
    for ( const CallRecord &c : calls )
    {
        json j;
        j["b"] = c.betaIndex;
        j["e"] = c.epsilonIndex;
        j["status"] = toString( c.status );
        j["method"] = toString( c.method );
        j["stage"] = c.stage == ProbeStage::Walk ? "walk" : "search";
        j["branches"] = c.stats.branches;
        j["leaf_checks"] = c.stats.leafChecks;
        j["seconds"] = c.stats.seconds;
        out.push_back( std::move( j ) );
    }
    return out;
}

std::vector<CallRecord> callsFrom( const json &value )
{
    std::vector<CallRecord> out;
    for ( const auto &j : value )
    {
        CallRecord c;
        c.betaIndex = j.at( "b" ).get<std::size_t>();
        c.epsilonIndex = j.at( "e" ).get<std::size_t>();
        c.status = statusFrom( j.at( "status" ) );
        c.method = methodFrom( j.at( "method" ) );
        c.stage = j.at( "stage" ).get<std::string>() == "walk" ? ProbeStage::Walk : ProbeStage::Search;
        c.stats.branches = j.at( "branches" ).get<std::uint64_t>();
        c.stats.leafChecks = j.at( "leaf_checks" ).get<std::uint64_t>();
        c.stats.seconds = j.at( "seconds" ).get<double>();
        out.push_back( c );
    }
    return out;
}

std::string anchorFileName( std::size_t index )
{
    char buf[32];
    std::snprintf( buf, sizeof( buf ), "anchor_%05zu", index );
    return buf;
}

std::string percent( double p )
{
    char buf[32];
    std::snprintf( buf, sizeof( buf ), "%.2f", p );
    return buf;
}

std::string cellText( Status s, Provenance p )
{
    return std::string( toString( s ) ) + ":" + toString( p );
}

std::vector<std::string> splitCsv( const std::string &line )
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in( line );
    while ( std::getline( in, field, ',' ) )
        out.push_back( field );
    if ( !line.empty() && line.back() == ',' )
        out.emplace_back();
    return out;
}

using Clock = std::chrono::steady_clock;

double secondsSince( Clock::time_point start )
{
    return std::chrono::duration<double>( Clock::now() - start ).count();
}

void addCell( CellCounts &c, Status status, Provenance provenance )
{
    if ( status == Status::UNKNOWN )
        ++c.unknown;
    else if ( status == Status::SAT )
    {
        if ( provenance == Provenance::Deduced )
            ++c.satDeduced;
        else if ( provenance == Provenance::Falsified )
            ++c.satFalsified;
        else
            ++c.satVerified;
    }
    else if ( provenance == Provenance::Deduced )
        ++c.unsatDeduced;
    else
        ++c.unsatVerified;
}

void addStats( SweepStats &total, const SweepStats &s )
{
    total.cells += s.cells;
    total.verified += s.verified;
    total.deduced += s.deduced;
    total.falsified += s.falsified;
    total.unknown += s.unknown;
    total.satVerified += s.satVerified;
    total.satDeduced += s.satDeduced;
    total.satFalsified += s.satFalsified;
    total.unsatVerified += s.unsatVerified;
    total.unsatDeduced += s.unsatDeduced;
    total.probes += s.probes;
    total.verifierCalls += s.verifierCalls;
}

json statsJson( const SweepStats &s )
{
    json j;
    j["cells"] = s.cells;
    j["verified"] = s.verified;
    j["deduced"] = s.deduced;
    j["falsified"] = s.falsified;
    j["unknown"] = s.unknown;
    j["probes"] = s.probes;
    j["verifier_calls"] = s.verifierCalls;
    j["deduced_percent"] = percent( 100.0 * s.deducedFraction() );
    return j;
}

// Overall / deduced / verified rows for one set of parameter columns.
void tableRows( std::ostringstream &out, const std::string &prefix, const std::vector<const CellCounts *> &cells )
{
    auto row = [&]( const char *name, auto get ) {
        out << prefix << name;
        for ( const CellCounts *c : cells )
            out << ',' << get( *c );
        out << '\n';
    };
    row( "SAT Overall", []( const CellCounts &c ) { return c.sat(); } );
    row( "SAT deduced", []( const CellCounts &c ) { return c.satDeduced; } );
    row( "SAT verified", []( const CellCounts &c ) { return c.satVerified + c.satFalsified; } );
    row( "SAT of which falsified", []( const CellCounts &c ) { return c.satFalsified; } );
    row( "UNSAT Overall", []( const CellCounts &c ) { return c.unsat(); } );
    row( "UNSAT deduced", []( const CellCounts &c ) { return c.unsatDeduced; } );
    row( "UNSAT verified", []( const CellCounts &c ) { return c.unsatVerified; } );
    row( "UNKNOWN", []( const CellCounts &c ) { return c.unknown; } );
}

} // namespace

void SweepConfig::validate() const
{
    if ( networkPath.empty() )
        throw Error( ErrorCode::Precondition, "config: network path is empty" );
    if ( datasetPath.empty() )
        throw Error( ErrorCode::Precondition, "config: dataset path is empty" );
    if ( outputDir.empty() )
        throw Error( ErrorCode::Precondition, "config: output directory is empty" );
    requireIncreasing( epsilons, "epsilons" );
    requireIncreasing( betas, "betas" );
    requireIncreasing( gammas, "gammas" );
    if ( epsilons.front() < 0.0 || betas.front() < 0.0 )
        throw Error( ErrorCode::Range, "config: epsilons and betas must be non-negative" );
    if ( !( gammas.front() > 0.0 ) || gammas.back() > 1.0 )
        throw Error( ErrorCode::Range, "config: gammas must lie in (0, 1]" );
    if ( !( mu >= 0.0 && mu <= 1.0 ) )
        throw Error( ErrorCode::Range, "config: mu must lie in [0, 1]" );
    if ( !( anchorSeconds > 0.0 ) )
        throw Error( ErrorCode::Range, "config: anchor budget must be positive" );
    queryBudget.validate();
}

SchedulerOptions SweepConfig::schedulerOptions() const
{
    SchedulerOptions o;
    o.queryBudget = queryBudget;
    o.anchorSeconds = anchorSeconds;
    o.falsifierSamples = falsifierSamples;
    o.seed = seed;
    return o;
}

SweepConfig parseSweepConfig( const std::string &document, const std::string &baseDir )
{
    json doc;
    try
    {
        doc = json::parse( document );
    }
    catch ( const json::parse_error &e )
    {
        throw Error( ErrorCode::Format, std::string( "config: " ) + e.what() );
    }
    if ( !doc.is_object() )
        throw Error( ErrorCode::Format, "config: expected a JSON object" );

    SweepConfig c;
    bool haveNetwork = false, haveDataset = false;
    for ( const auto &[key, value] : doc.items() )
    {
        if ( key == "network" )
        {
            c.networkPath = resolvePath( value.get<std::string>(), baseDir );
            haveNetwork = true;
        }
        else if ( key == "dataset" )
        {
            c.datasetPath = resolvePath( value.get<std::string>(), baseDir );
            haveDataset = true;
        }
        else if ( key == "epsilons" )
            c.epsilons = readArray( value, key );
        else if ( key == "betas" )
            c.betas = readArray( value, key );
        else if ( key == "gammas" )
            c.gammas = readArray( value, key );
        else if ( key == "mu" )
            c.mu = readNumber( value, key );
        else if ( key == "query_budget" )
        {
            if ( !value.is_object() )
                throw Error( ErrorCode::Format, "config: query_budget must be an object" );
            for ( const auto &[k, v] : value.items() )
            {
                if ( k == "max_seconds" )
                    c.queryBudget.maxSeconds = readNumber( v, k );
                else if ( k == "max_branches" )
                    c.queryBudget.maxBranches = readCount( v, k );
                else
                    throw Error( ErrorCode::Format, "config: unknown query_budget key '" + k + "'" );
            }
        }
        else if ( key == "anchor_seconds" )
            c.anchorSeconds = readNumber( value, key );
        else if ( key == "falsifier_samples" )
            c.falsifierSamples = readCount( value, key );
        else if ( key == "seed" )
            c.seed = readCount( value, key );
        else if ( key == "output_dir" )
            c.outputDir = value.get<std::string>();
        else if ( key == "max_anchors" )
            c.maxAnchors = readCount( value, key );
        else
            throw Error( ErrorCode::Format, "config: unknown key '" + key + "'" );
    }
    if ( !haveNetwork || !haveDataset )
        throw Error( ErrorCode::Format, "config: 'network' and 'dataset' are required" );
    c.outputDir = resolvePath( c.outputDir, baseDir );
    c.validate();
    return c;
}

SweepConfig loadSweepConfig( const std::string &path )
{
    return parseSweepConfig( readFile( path ), fs::path( path ).parent_path().string() );
}

std::string readFile( const std::string &path )
{
    std::ifstream in( path, std::ios::binary );
    if ( !in )
        throw Error( ErrorCode::Io, "cannot read " + path );
    std::ostringstream buf;
    buf << in.rdbuf();
    if ( in.bad() )
        throw Error( ErrorCode::Io, "error reading " + path );
    return buf.str();
}

void writeFileAtomic( const std::string &path, const std::string &content )
{
    fs::path target( path );
    std::error_code ec;
    if ( target.has_parent_path() )
        fs::create_directories( target.parent_path(), ec );
    fs::path temp = target;
    temp += ".tmp";
    {
        std::ofstream out( temp, std::ios::binary | std::ios::trunc );
        if ( !out )
            throw Error( ErrorCode::Io, "cannot write " + temp.string() );
        out << content;
        out.flush();
        if ( !out )
            throw Error( ErrorCode::Io, "error writing " + temp.string() );
    }
    fs::rename( temp, target, ec );
    if ( ec )
        throw Error( ErrorCode::Io, "cannot rename " + temp.string() + ": " + ec.message() );
}

bool AnchorResult::exhausted() const
{
    if ( grid )
        for ( std::size_t b = 0; b < grid->betaCount(); ++b )
            for ( std::size_t e = 0; e < grid->epsilonCount(); ++e )
                if ( !grid->cell( b, e ).decided && grid->cell( b, e ).provenance == Provenance::Unresolved )
                    return true;
    if ( contrast )
        for ( std::size_t i = 0; i < contrast->statuses.size(); ++i )
            if ( contrast->statuses[i] == Status::UNKNOWN && contrast->provenance[i] == Provenance::Unresolved )
                return true;
    return false;
}

AnchorResult runAnchor( const std::shared_ptr<const Network> &net,
                        const LabeledImage &anchor,
                        std::size_t index,
                        const SweepConfig &config )
{
    AnchorResult r;
    r.index = index;
    r.label = anchor.label;
    if ( net->outputDim() < 2 || anchor.label >= net->outputDim() )
        throw Error( ErrorCode::Range, "anchor label out of range for the network" );
    Vector scores = evaluate( *net, anchor.image.pixels() );
    r.predicted = argmax( scores );
    if ( r.predicted != anchor.label )
    {
        r.skipped = true;
        r.skipReason = "misclassified";
        return r;
    }
    for ( std::size_t j = 0; j < scores.size(); ++j )
        if ( j != anchor.label && scores[j] >= scores[anchor.label] )
        {
            r.skipped = true;
            r.skipReason = "tied";
            return r;
        }

    SchedulerOptions options = config.schedulerOptions();
    options.seed = deriveSeed( config.seed, index, 0, 0 );
    auto start = Clock::now();
    r.grid = incrementalGrid( net, anchor.image, anchor.label, config.grid(), options );
    r.gridSeconds = secondsSince( start );
    start = Clock::now();
    r.contrast = contrastSearch( net, anchor.image, anchor.label, config.gammas, config.mu, options );
    r.contrastSeconds = secondsSince( start );
    return r;
}

std::string configKey( const SweepConfig &config )
{
    json k;
    k["network"] = std::to_string( fnv1a( readFile( config.networkPath ) ) );
    k["epsilons"] = numberArray( config.epsilons );
    k["betas"] = numberArray( config.betas );
    k["gammas"] = numberArray( config.gammas );
    k["mu"] = formatDouble( config.mu );
    k["max_seconds"] = formatDouble( config.queryBudget.maxSeconds );
    k["max_branches"] = config.queryBudget.maxBranches;
    k["anchor_seconds"] = formatDouble( config.anchorSeconds );
    k["falsifier_samples"] = config.falsifierSamples;
    k["seed"] = config.seed;
    return k.dump();
}

std::string anchorResultToJson( const AnchorResult &r, const std::string &key )
{
    json j;
    j["key"] = key;
    j["index"] = r.index;
    j["label"] = r.label;
    j["predicted"] = r.predicted;
    j["skipped"] = r.skipped;
    j["skip_reason"] = r.skipReason;
    if ( r.grid )
    {
        json g;
        g["betas"] = r.grid->betaCount();
        g["epsilons"] = r.grid->epsilonCount();
        json cells = json::array();
        for ( std::size_t b = 0; b < r.grid->betaCount(); ++b )
            for ( std::size_t e = 0; e < r.grid->epsilonCount(); ++e )
            {
                const GridCell &c = r.grid->cell( b, e );
                json cj;
                cj["decided"] = c.decided;
                cj["status"] = toString( c.status );
                cj["provenance"] = toString( c.provenance );
                cj["source"] = c.source ? json::array( { c.source->first, c.source->second } ) : json( nullptr );
                cj["witness"] = witnessJson( c.witness );
                cells.push_back( std::move( cj ) );
            }
        g["cells"] = std::move( cells );
        g["calls"] = callsJson( r.grid->callLog );
        j["grid"] = std::move( g );
    }
    if ( r.contrast )
    {
        json c;
        c["gammas"] = numberArray( r.contrast->gammas );
        json statuses = json::array(), provenance = json::array(), witnesses = json::array();
        for ( std::size_t i = 0; i < r.contrast->statuses.size(); ++i )
        {
            statuses.push_back( toString( r.contrast->statuses[i] ) );
            provenance.push_back( toString( r.contrast->provenance[i] ) );
            witnesses.push_back( witnessJson( r.contrast->witnesses[i] ) );
        }
        c["statuses"] = std::move( statuses );
        c["provenance"] = std::move( provenance );
        c["witnesses"] = std::move( witnesses );
        c["boundary"] = r.contrast->boundary ? json( *r.contrast->boundary ) : json( nullptr );
        c["calls"] = callsJson( r.contrast->callLog );
        j["contrast"] = std::move( c );
    }
    j["grid_seconds"] = r.gridSeconds;
    j["contrast_seconds"] = r.contrastSeconds;
    return j.dump( 1 ) + "\n";
}

std::optional<AnchorResult> anchorResultFromJson( const std::string &document, const std::string &key )
{
    try
    {
        json j = json::parse( document );
        if ( j.at( "key" ).get<std::string>() != key )
            return std::nullopt;
        AnchorResult r;
        r.index = j.at( "index" ).get<std::size_t>();
        r.label = j.at( "label" ).get<std::size_t>();
        r.predicted = j.at( "predicted" ).get<std::size_t>();
        r.skipped = j.at( "skipped" ).get<bool>();
        r.skipReason = j.at( "skip_reason" ).get<std::string>();
        if ( j.contains( "grid" ) )
        {
            const json &g = j["grid"];
            VerdictGrid grid( g.at( "betas" ).get<std::size_t>(), g.at( "epsilons" ).get<std::size_t>() );
            const json &cells = g.at( "cells" );
            if ( cells.size() != grid.size() )
                throw Error( ErrorCode::Format, "result: cell count mismatch" );
            std::size_t k = 0;
            for ( std::size_t b = 0; b < grid.betaCount(); ++b )
                for ( std::size_t e = 0; e < grid.epsilonCount(); ++e, ++k )
                {
                    const json &cj = cells[k];
                    GridCell &c = grid.cell( b, e );
                    c.decided = cj.at( "decided" ).get<bool>();
                    c.status = statusFrom( cj.at( "status" ) );
                    c.provenance = provenanceFrom( cj.at( "provenance" ) );
                    if ( !cj.at( "source" ).is_null() )
                        c.source = std::make_pair( cj["source"][0].get<std::size_t>(), cj["source"][1].get<std::size_t>() );
                    c.witness = witnessFrom( cj.at( "witness" ) );
                }
            grid.callLog = callsFrom( g.at( "calls" ) );
            r.grid = std::move( grid );
        }
        if ( j.contains( "contrast" ) )
        {
            const json &c = j["contrast"];
            ContrastResult cr;
            cr.gammas = readArray( c.at( "gammas" ), "gammas" );
            for ( const auto &s : c.at( "statuses" ) )
                cr.statuses.push_back( statusFrom( s ) );
            for ( const auto &p : c.at( "provenance" ) )
                cr.provenance.push_back( provenanceFrom( p ) );
            for ( const auto &w : c.at( "witnesses" ) )
                cr.witnesses.push_back( witnessFrom( w ) );
            if ( !c.at( "boundary" ).is_null() )
                cr.boundary = c["boundary"].get<std::size_t>();
            cr.callLog = callsFrom( c.at( "calls" ) );
            if ( cr.statuses.size() != cr.gammas.size() || cr.provenance.size() != cr.gammas.size() ||
                 cr.witnesses.size() != cr.gammas.size() )
                throw Error( ErrorCode::Format, "result: contrast length mismatch" );
            r.contrast = std::move( cr );
        }
        r.gridSeconds = j.at( "grid_seconds" ).get<double>();
        r.contrastSeconds = j.at( "contrast_seconds" ).get<double>();
        return r;
    }
    catch ( const json::exception &e )
    {
        throw Error( ErrorCode::Format, std::string( "result: " ) + e.what() );
    }
}

SweepSummary summarize( const SweepConfig &config, const std::vector<AnchorResult> &results )
{
    SweepSummary s;
    s.betas = config.betas;
    s.epsilons = config.epsilons;
    s.gammas = config.gammas;
    s.anchors = results.size();
    s.grid.assign( s.betas.size() * s.epsilons.size(), CellCounts{} );
    s.contrast.assign( s.gammas.size(), CellCounts{} );

    for ( const AnchorResult &r : results )
    {
        if ( r.skipped )
        {
            s.misclassified.push_back( r.index );
            continue;
        }
        if ( r.exhausted() )
            s.exhausted.push_back( r.index );
        if ( r.grid )
        {
            const VerdictGrid &g = *r.grid;
            if ( g.betaCount() != s.betas.size() || g.epsilonCount() != s.epsilons.size() )
                throw Error( ErrorCode::Dimension, "stored grid does not match the configured parameters" );
            for ( std::size_t b = 0; b < g.betaCount(); ++b )
                for ( std::size_t e = 0; e < g.epsilonCount(); ++e )
                    addCell( s.grid[b * s.epsilons.size() + e], g.cell( b, e ).status, g.cell( b, e ).provenance );
            for ( const CallRecord &c : g.callLog )
                if ( c.method == ProbeMethod::Verifier )
                {
                    CellCounts &cc = s.grid[c.betaIndex * s.epsilons.size() + c.epsilonIndex];
                    ++cc.verifierCalls;
                    cc.verifierSeconds += c.stats.seconds;
                }
            addStats( s.gridTotals, stats( g ) );
        }
        if ( r.contrast )
        {
            const ContrastResult &c = *r.contrast;
            if ( c.statuses.size() != s.gammas.size() )
                throw Error( ErrorCode::Dimension, "stored contrast result does not match the configured gammas" );
            for ( std::size_t i = 0; i < c.statuses.size(); ++i )
                addCell( s.contrast[i], c.statuses[i], c.provenance[i] );
            for ( const CallRecord &call : c.callLog )
                if ( call.method == ProbeMethod::Verifier )
                {
                    ++s.contrast[call.betaIndex].verifierCalls;
                    s.contrast[call.betaIndex].verifierSeconds += call.stats.seconds;
                }
            addStats( s.contrastTotals, stats( c ) );
        }
    }
    return s;
}

std::string gridCsv( const AnchorResult &result, const Vector &betas, const Vector &epsilons )
{
    if ( !result.grid )
        throw Error( ErrorCode::Precondition, "anchor has no grid result" );
    const VerdictGrid &g = *result.grid;
    if ( g.betaCount() != betas.size() || g.epsilonCount() != epsilons.size() )
        throw Error( ErrorCode::Dimension, "grid does not match the parameter lists" );
    std::ostringstream out;
    out << "epsilon\\beta";
    for ( double b : betas )
        out << ',' << formatDouble( b );
    out << '\n';
    for ( std::size_t e = epsilons.size(); e-- > 0; )
    {
        out << formatDouble( epsilons[e] );
        for ( std::size_t b = 0; b < betas.size(); ++b )
            out << ',' << cellText( g.cell( b, e ).status, g.cell( b, e ).provenance );
        out << '\n';
    }
    return out.str();
}

std::vector<std::vector<Status>> parseGridCsv( const std::string &csv )
{
    std::istringstream in( csv );
    std::string line;
    if ( !std::getline( in, line ) )
        throw Error( ErrorCode::Format, "grid csv: missing header" );
    std::size_t nb = splitCsv( line ).size() - 1;
    std::vector<std::vector<Status>> rows; // epsilon descending
    while ( std::getline( in, line ) )
    {
        if ( line.empty() )
            continue;
        auto fields = splitCsv( line );
        if ( fields.size() != nb + 1 )
            throw Error( ErrorCode::Format, "grid csv: ragged row" );
        std::vector<Status> row;
        for ( std::size_t i = 1; i < fields.size(); ++i )
        {
            auto colon = fields[i].find( ':' );
            auto s = parseStatus( fields[i].substr( 0, colon ) );
            if ( !s )
                throw Error( ErrorCode::Format, "grid csv: bad cell '" + fields[i] + "'" );
            row.push_back( *s );
        }
        rows.push_back( std::move( row ) );
    }
    std::vector<std::vector<Status>> out( nb, std::vector<Status>( rows.size() ) );
    for ( std::size_t r = 0; r < rows.size(); ++r )
        for ( std::size_t b = 0; b < nb; ++b )
            out[b][rows.size() - 1 - r] = rows[r][b];
    return out;
}

std::string aggregateCsv( const SweepSummary &s )
{
    std::ostringstream out;
    out << "epsilon\\beta";
    for ( double b : s.betas )
        out << ',' << formatDouble( b );
    out << '\n';
    for ( std::size_t e = s.epsilons.size(); e-- > 0; )
    {
        out << formatDouble( s.epsilons[e] );
        for ( std::size_t b = 0; b < s.betas.size(); ++b )
            out << ',' << percent( s.cell( b, e ).percentUnsat() );
        out << '\n';
    }
    return out.str();
}

std::string gammaCsv( const SweepSummary &s )
{
    std::ostringstream out;
    out << "gamma,unsat,sat,unknown,percent_unsat\n";
    for ( std::size_t i = 0; i < s.gammas.size(); ++i )
    {
        const CellCounts &c = s.contrast[i];
        out << formatDouble( s.gammas[i] ) << ',' << c.unsat() << ',' << c.sat() << ',' << c.unknown << ','
            << percent( c.percentUnsat() ) << '\n';
    }
    return out.str();
}

std::string gridTableCsv( const SweepSummary &s )
{
    std::ostringstream out;
    out << "epsilon,row";
    for ( double b : s.betas )
        out << ',' << formatDouble( b );
    out << '\n';
    for ( std::size_t e = 0; e < s.epsilons.size(); ++e )
    {
        std::vector<const CellCounts *> cells;
        for ( std::size_t b = 0; b < s.betas.size(); ++b )
            cells.push_back( &s.cell( b, e ) );
        tableRows( out, formatDouble( s.epsilons[e] ) + ",", cells );
    }
    return out.str();
}

std::string contrastTableCsv( const SweepSummary &s )
{
    std::ostringstream out;
    out << "row";
    for ( double g : s.gammas )
        out << ',' << formatDouble( g );
    out << '\n';
    std::vector<const CellCounts *> cells;
    for ( const CellCounts &c : s.contrast )
        cells.push_back( &c );
    tableRows( out, "", cells );
    return out.str();
}

std::string summaryJson( const SweepSummary &s )
{
    json j;
    j["anchors"] = s.anchors;
    j["verified_anchors"] = s.verifiedAnchors();
    j["misclassified"] = s.misclassified;
    j["budget_exhausted"] = s.exhausted;
    j["betas"] = numberArray( s.betas );
    j["epsilons"] = numberArray( s.epsilons );
    j["gammas"] = numberArray( s.gammas );
    json grid = json::array();
    for ( std::size_t b = 0; b < s.betas.size(); ++b )
    {
        json column = json::array();
        for ( std::size_t e = 0; e < s.epsilons.size(); ++e )
            column.push_back( percent( s.cell( b, e ).percentUnsat() ) );
        grid.push_back( std::move( column ) );
    }
    j["percent_unsat_grid"] = std::move( grid ); // [beta][epsilon]
    json contrast = json::array();
    for ( const CellCounts &c : s.contrast )
        contrast.push_back( percent( c.percentUnsat() ) );
    j["percent_unsat_contrast"] = std::move( contrast );
    j["grid_totals"] = statsJson( s.gridTotals );
    j["contrast_totals"] = statsJson( s.contrastTotals );
    j["reference_deduced_percent"] = { { "grid", "59" }, { "contrast", "62" } };
    j["pixel_clipping"] = false; // perturbed pixels may leave [0, 1]
    return j.dump( 1 ) + "\n";
}

std::string timingsCsv( const SweepConfig &config, const std::vector<AnchorResult> &results )
{
    // Mean verifier seconds per parameter and verdict.
    struct Acc
    {
        std::size_t n = 0;
        double sum = 0.0;
    };
    std::size_t nb = config.betas.size(), ne = config.epsilons.size(), ng = config.gammas.size();
    std::vector<Acc> grid( nb * ne * 3 ), contrast( ng * 3 );
    double gridTotal = 0.0, contrastTotal = 0.0;
    for ( const AnchorResult &r : results )
    {
        gridTotal += r.gridSeconds;
        contrastTotal += r.contrastSeconds;
        if ( r.grid )
            for ( const CallRecord &c : r.grid->callLog )
                if ( c.method == ProbeMethod::Verifier && c.betaIndex < nb && c.epsilonIndex < ne )
                {
                    Acc &a = grid[( c.betaIndex * ne + c.epsilonIndex ) * 3 + std::size_t( c.status )];
                    ++a.n;
                    a.sum += c.stats.seconds;
                }
        if ( r.contrast )
            for ( const CallRecord &c : r.contrast->callLog )
                if ( c.method == ProbeMethod::Verifier && c.betaIndex < ng )
                {
                    Acc &a = contrast[c.betaIndex * 3 + std::size_t( c.status )];
                    ++a.n;
                    a.sum += c.stats.seconds;
                }
    }
    auto mean = []( const Acc &a ) { return a.n ? a.sum / double( a.n ) : 0.0; };
    std::ostringstream out;
    out << "kind,beta,epsilon,gamma,status,calls,mean_seconds\n";
    for ( std::size_t b = 0; b < nb; ++b )
        for ( std::size_t e = 0; e < ne; ++e )
            for ( int s = 0; s < 3; ++s )
            {
                const Acc &a = grid[( b * ne + e ) * 3 + std::size_t( s )];
                if ( a.n )
                    out << "grid," << formatDouble( config.betas[b] ) << ',' << formatDouble( config.epsilons[e] ) << ",,"
                        << toString( Status( s ) ) << ',' << a.n << ',' << mean( a ) << '\n';
            }
    for ( std::size_t g = 0; g < ng; ++g )
        for ( int s = 0; s < 3; ++s )
        {
            const Acc &a = contrast[g * 3 + std::size_t( s )];
            if ( a.n )
                out << "contrast,,," << formatDouble( config.gammas[g] ) << ',' << toString( Status( s ) ) << ','
                    << a.n << ',' << mean( a ) << '\n';
        }
    out << "total_grid,,,,," << results.size() << ',' << gridTotal << '\n';
    out << "total_contrast,,,,," << results.size() << ',' << contrastTotal << '\n';
    return out.str();
}

std::string formatTables( const SweepSummary &s )
{
    std::ostringstream out;
    out << "anchors: " << s.anchors << " (verified " << s.verifiedAnchors() << ", skipped " << s.misclassified.size()
        << ", budget exhausted " << s.exhausted.size() << ")\n\n";
    out << "% UNSAT, noise (rows) x brightness (columns)\n" << aggregateCsv( s ) << '\n';
    out << "% UNSAT per contrast parameter\n" << gammaCsv( s ) << '\n';
    out << "noise and brightness results\n" << gridTableCsv( s ) << '\n';
    out << "contrast results\n" << contrastTableCsv( s ) << '\n';
    out << "grid: " << s.gridTotals.verifierCalls << " verifier calls, " << s.gridTotals.probes << " probes, deduced "
        << percent( 100.0 * s.gridTotals.deducedFraction() ) << "% of " << s.gridTotals.cells
        << " cells (published reference 59%)\n";
    out << "contrast: " << s.contrastTotals.verifierCalls << " verifier calls, " << s.contrastTotals.probes
        << " probes, deduced " << percent( 100.0 * s.contrastTotals.deducedFraction() ) << "% of "
        << s.contrastTotals.cells << " cells (published reference 62%)\n";
    return out.str();
}

void exportResults( const SweepConfig &config, const std::vector<AnchorResult> &results, const SweepSummary &summary )
{
    fs::path dir( config.outputDir );
    for ( const AnchorResult &r : results )
        if ( r.grid )
            writeFileAtomic( ( dir / "grids" / ( anchorFileName( r.index ) + ".csv" ) ).string(),
                             gridCsv( r, config.betas, config.epsilons ) );
    writeFileAtomic( ( dir / "aggregate_unsat.csv" ).string(), aggregateCsv( summary ) );
    writeFileAtomic( ( dir / "gamma_unsat.csv" ).string(), gammaCsv( summary ) );
    writeFileAtomic( ( dir / "grid_table.csv" ).string(), gridTableCsv( summary ) );
    writeFileAtomic( ( dir / "contrast_table.csv" ).string(), contrastTableCsv( summary ) );
    writeFileAtomic( ( dir / "summary.json" ).string(), summaryJson( summary ) );
    writeFileAtomic( ( dir / "timings.csv" ).string(), timingsCsv( config, results ) );
}

RunOutcome runSweep( const SweepConfig &config, const RunOptions &options )
{
    config.validate();
    auto net = std::make_shared<const Network>( loadNetworkFile( config.networkPath ) );
    std::vector<LabeledImage> data = loadDataset( config.datasetPath );
    if ( config.maxAnchors && data.size() > *config.maxAnchors )
        data.erase( data.begin() + std::ptrdiff_t( *config.maxAnchors ), data.end() );
    for ( const LabeledImage &d : data )
        if ( d.image.pixels().size() != net->inputDim() )
            throw Error( ErrorCode::Dimension, "dataset images do not match the network input size" );

    const std::string key = configKey( config );
    const fs::path anchorDir = fs::path( config.outputDir ) / "anchors";
    std::error_code ec;
    fs::create_directories( anchorDir, ec );
    if ( ec )
        throw Error( ErrorCode::Io, "cannot create " + anchorDir.string() );

    RunOutcome outcome;
    std::vector<std::optional<AnchorResult>> slots( data.size() );
    std::vector<std::size_t> pending;
    for ( std::size_t i = 0; i < data.size(); ++i )
    {
        fs::path file = anchorDir / ( anchorFileName( i ) + ".json" );
        if ( options.resume && fs::exists( file ) )
        {
            auto stored = anchorResultFromJson( readFile( file.string() ), key );
            if ( stored && stored->index == i && stored->label == data[i].label )
            {
                slots[i] = std::move( stored );
                ++outcome.reused;
                continue;
            }
        }
        pending.push_back( i );
    }

    // Workers compute; this thread is the only writer.
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<AnchorResult> finished;
    std::exception_ptr failure;
    std::atomic<std::size_t> next{ 0 };
    std::atomic<bool> stop{ false };
    std::size_t workersLeft = std::max<std::size_t>( 1, std::min( options.jobs, pending.size() ) );
    if ( pending.empty() )
        workersLeft = 0;

    auto worker = [&]() {
        while ( !stop )
        {
            std::size_t k = next++;
            if ( k >= pending.size() )
                break;
            try
            {
                AnchorResult r = runAnchor( net, data[pending[k]], pending[k], config );
                std::lock_guard<std::mutex> lock( mutex );
                finished.push_back( std::move( r ) );
            }
            catch ( ... )
            {
                std::lock_guard<std::mutex> lock( mutex );
                if ( !failure )
                    failure = std::current_exception();
                stop = true;
            }
            ready.notify_one();
        }
        std::lock_guard<std::mutex> lock( mutex );
        --workersLeft;
        ready.notify_one();
    };

    std::vector<std::thread> threads;
    std::size_t threadCount = workersLeft;
    for ( std::size_t t = 0; t < threadCount; ++t )
        threads.emplace_back( worker );

    std::exception_ptr writeFailure;
    while ( true )
    {
        std::unique_lock<std::mutex> lock( mutex );
        ready.wait( lock, [&]() { return !finished.empty() || workersLeft == 0; } );
        if ( finished.empty() )
            break;
        AnchorResult r = std::move( finished.front() );
        finished.pop_front();
        lock.unlock();
        try
        {
            writeFileAtomic( ( anchorDir / ( anchorFileName( r.index ) + ".json" ) ).string(), anchorResultToJson( r, key ) );
        }
        catch ( ... )
        {
            if ( !writeFailure )
                writeFailure = std::current_exception();
            stop = true;
        }
        if ( options.progress )
            options.progress( r );
        std::size_t index = r.index;
        slots[index] = std::move( r );
    }
    for ( auto &t : threads )
        t.join();
    if ( failure )
        std::rethrow_exception( failure );
    if ( writeFailure )
        std::rethrow_exception( writeFailure );

    for ( auto &slot : slots )
        outcome.results.push_back( std::move( *slot ) );
    outcome.summary = summarize( config, outcome.results );
    exportResults( config, outcome.results, outcome.summary );
    return outcome;
}

std::vector<AnchorResult> loadResults( const SweepConfig &config )
{
    const fs::path anchorDir = fs::path( config.outputDir ) / "anchors";
    if ( !fs::is_directory( anchorDir ) )
        throw Error( ErrorCode::Io, "no results under " + anchorDir.string() );
    std::vector<fs::path> files;
    for ( const auto &entry : fs::directory_iterator( anchorDir ) )
        if ( entry.path().extension() == ".json" )
            files.push_back( entry.path() );
    std::sort( files.begin(), files.end() );
    const std::string key = configKey( config );
    std::vector<AnchorResult> out;
    for ( const fs::path &f : files )
    {
        auto r = anchorResultFromJson( readFile( f.string() ), key );
        if ( !r )
            throw Error( ErrorCode::Precondition, f.string() + " was produced under a different configuration" );
        out.push_back( std::move( *r ) );
    }
    return out;
}

} // namespace gridcert
