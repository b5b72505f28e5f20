#include "gridcert/error.hpp"
#include "gridcert/falsifier.hpp"
#include "gridcert/image.hpp"
#include "gridcert/network.hpp"
#include "gridcert/numfmt.hpp"
#include "gridcert/perturb.hpp"
#include "gridcert/report.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <memory>

using namespace gridcert;

namespace {

enum ExitCode
{
    EXIT_OK = 0,
    EXIT_CONFIG = 1,
    EXIT_IO = 2,
    EXIT_INTERNAL = 3,
};

int exitCodeFor( ErrorCode code )
{
    switch ( code )
    {
    case ErrorCode::Io:
        return EXIT_IO;
    case ErrorCode::Internal:
        return EXIT_INTERNAL;
    default:
        return EXIT_CONFIG;
    }
}

SweepConfig configFor( const std::string &path, const std::string &out )
{
    SweepConfig config = loadSweepConfig( path );
    if ( !out.empty() )
        config.outputDir = out;
    return config;
}

PerturbationKind parseKind( const std::string &text )
{
    if ( text == "noise" )
        return PerturbationKind::Noise;
    if ( text == "brightness" )
        return PerturbationKind::Brightness;
    if ( text == "noise+brightness" )
        return PerturbationKind::NoiseAndBrightness;
    if ( text == "contrast" )
        return PerturbationKind::Contrast;
    throw Error( ErrorCode::Format, "unknown perturbation kind '" + text + "'" );
}

} // namespace

int main( int argc, char **argv )
{
    CLI::App app( "Robustness sweeps over noise, brightness and contrast perturbations" );
    app.require_subcommand( 1 );

    std::string configPath, outDir;
    std::size_t jobs = 1;
    bool resume = false;

    auto *run = app.add_subcommand( "run", "Run a sweep described by a config file" );
    run->add_option( "--config", configPath, "Sweep config (JSON)" )->required();
    run->add_option( "--out", outDir, "Override the output directory" );
    run->add_option( "--jobs", jobs, "Anchors processed in parallel" )->check( CLI::PositiveNumber );
    run->add_flag( "--resume", resume, "Reuse per-anchor results already on disk" );

    auto *summarizeCmd = app.add_subcommand( "summarize", "Print summary tables for stored results" );
    summarizeCmd->add_option( "--config", configPath, "Sweep config (JSON)" )->required();
    summarizeCmd->add_option( "--out", outDir, "Override the output directory" );

    auto *exportCmd = app.add_subcommand( "export", "Rewrite the CSV outputs from stored results" );
    exportCmd->add_option( "--config", configPath, "Sweep config (JSON)" )->required();
    exportCmd->add_option( "--out", outDir, "Override the output directory" );

    std::string networkPath, imagePath;
    auto *validate = app.add_subcommand( "validate-network", "Load a network and report its shape" );
    validate->add_option( "--network", networkPath, "Network file (JSON)" )->required();
    validate->add_option( "--image", imagePath, "Also classify this image" );

    std::string kindText = "noise";
    double epsilon = 0.0, beta = 0.0, gamma = 0.0, mu = 0.2585;
    std::size_t label = 0, samples = 10000;
    std::uint64_t seed = 0;
    auto *attack = app.add_subcommand( "attack", "Search for a counterexample by sampling only" );
    attack->add_option( "--network", networkPath, "Network file (JSON)" )->required();
    attack->add_option( "--image", imagePath, "Anchor image (PGM or CSV)" )->required();
    attack->add_option( "--label", label, "True class of the anchor" )->required();
    attack->add_option( "--kind", kindText, "noise, brightness, noise+brightness or contrast" );
    attack->add_option( "--epsilon", epsilon );
    attack->add_option( "--beta", beta );
    attack->add_option( "--gamma", gamma );
    attack->add_option( "--mu", mu );
    attack->add_option( "--samples", samples )->check( CLI::PositiveNumber );
    attack->add_option( "--seed", seed );

    std::size_t count = 100, side = 8, classes = 4, factor = 1;
    auto *synth = app.add_subcommand( "synth", "Write a synthetic labelled dataset" );
    synth->add_option( "--out", outDir, "Output directory" )->required();
    synth->add_option( "--count", count );
    synth->add_option( "--side", side );
    synth->add_option( "--classes", classes );
    synth->add_option( "--seed", seed );
    synth->add_option( "--downscale", factor, "Block-mean pooling factor applied to every image" )
        ->check( CLI::PositiveNumber );

    try
    {
        app.parse( argc, argv );
    }
    catch ( const CLI::ParseError &e )
    {
        int rc = app.exit( e );
        return rc == 0 ? EXIT_OK : EXIT_CONFIG;
    }

    try
    {
        if ( *run )
        {
            SweepConfig config = configFor( configPath, outDir );
            RunOptions options;
            options.jobs = jobs;
            options.resume = resume;
            options.progress = []( const AnchorResult &r ) {
                std::cerr << "anchor " << r.index << ": "
                          << ( r.skipped ? "skipped (" + r.skipReason + ")" : std::string( "done" ) ) << '\n';
            };
            RunOutcome outcome = runSweep( config, options );
            if ( outcome.reused )
                std::cerr << "reused " << outcome.reused << " stored anchor results\n";
            std::cout << formatTables( outcome.summary );
        }
        else if ( *summarizeCmd || *exportCmd )
        {
            SweepConfig config = configFor( configPath, outDir );
            std::vector<AnchorResult> results = loadResults( config );
            SweepSummary summary = summarize( config, results );
            exportResults( config, results, summary );
            if ( *summarizeCmd )
                std::cout << formatTables( summary );
        }
        else if ( *validate )
        {
            Network net = loadNetworkFile( networkPath );
            std::cout << "inputs " << net.inputDim() << ", outputs " << net.outputDim() << ", layers "
                      << net.layers().size() << ", relus " << net.reluCount() << '\n';
            if ( !imagePath.empty() )
            {
                Image img = loadImageFile( imagePath );
                Vector y = evaluate( net, img.pixels() );
                std::cout << "scores";
                for ( double v : y )
                    std::cout << ' ' << formatDouble( v );
                std::cout << "\nclass " << argmax( y ) << '\n';
            }
        }
        else if ( *attack )
        {
            auto net = std::make_shared<const Network>( loadNetworkFile( networkPath ) );
            PerturbationSpec spec{ parseKind( kindText ), epsilon, beta, gamma,
                                   parseKind( kindText ) == PerturbationKind::Contrast ? mu : 0.0,
                                   loadImageFile( imagePath ), label };
            VerificationQuery query = buildQuery( net, spec );
            AttackReport report = sampleAttack( query, samples, seed );
            std::cout << "tried " << report.tried << '\n';
            if ( report.found )
            {
                std::cout << "SAT";
                for ( double v : *report.found )
                    std::cout << ' ' << formatDouble( v );
                std::cout << '\n';
            }
            else
                std::cout << "no counterexample found\n";
        }
        else if ( *synth )
        {
            std::vector<LabeledImage> data = synthDataset( seed, count, side, classes );
            if ( factor > 1 )
                for ( LabeledImage &d : data )
                    d.image = downscale( d.image, factor );
            writeDataset( data, outDir );
            std::cout << "wrote " << count << " images to " << outDir << '\n';
        }
    }
    catch ( const Error &e )
    {
        std::cerr << "error: " << e.what() << '\n';
        return exitCodeFor( e.code() );
    }
    catch ( const std::exception &e )
    {
        std::cerr << "error: " << e.what() << '\n';
        return EXIT_INTERNAL;
    }
    return EXIT_OK;
}
