#include "gridcert/error.hpp"
#include "gridcert/perturb.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace gridcert;
using namespace gridcert::testing;

namespace {

PerturbationSpec spec( PerturbationKind kind, double eps, double beta, double gamma, double mu, Image anchor, std::size_t c )
{
    return PerturbationSpec{ kind, eps, beta, gamma, mu, std::move( anchor ), c };
}

// A network whose class is decided by the sign of x_0 - x_1, for hand-built anchors.
std::shared_ptr<const Network> differenceNet()
{
    Layer out{ Matrix( 2, 2 ), Vector( 2 ), Activation::Identity };
    out.weights( 0, 0 ) = 1;
    out.weights( 0, 1 ) = -1;
    out.weights( 1, 0 ) = -1;
    out.weights( 1, 1 ) = 1;
    return std::make_shared<const Network>( Network( 2, { out } ) );
}

} // namespace

TEST_CASE( "noise box is the unclipped epsilon ball" )
{
    Layer out{ Matrix( 2, 1 ), Vector{ 0.0, 0.0 }, Activation::Identity };
    out.weights( 0, 0 ) = 1.0;
    auto net = std::make_shared<const Network>( Network( 1, { out } ) );
    VerificationQuery q = noiseQuery( net, spec( PerturbationKind::Noise, 0.1, 0, 0, 0, Image( 1, 1, { 0.5 } ), 0 ) );
    CHECK( q.inputBox.lower()[0] == 0.5 - 0.1 );
    CHECK( q.inputBox.upper()[0] == 0.5 + 0.1 );
    CHECK( q.network == net );

    VerificationQuery edge = noiseQuery( net, spec( PerturbationKind::Noise, 0.2, 0, 0, 0, Image( 1, 1, { 0.95 } ), 0 ) );
    CHECK( edge.inputBox.upper()[0] > 1.0 );

    VerificationQuery point = noiseQuery( net, spec( PerturbationKind::Noise, 0, 0, 0, 0, Image( 1, 1, { 0.5 } ), 0 ) );
    CHECK( point.inputBox.lower() == point.inputBox.upper() );
}

TEST_CASE( "noise query rejects misclassified and tied anchors" )
{
    auto net = differenceNet();
    CHECK_THROWS_AS( noiseQuery( net, spec( PerturbationKind::Noise, 0.1, 0, 0, 0, Image( 2, 1, { 0.2, 0.7 } ), 0 ) ),
                     Error );
    CHECK_THROWS_AS( noiseQuery( net, spec( PerturbationKind::Noise, 0.1, 0, 0, 0, Image( 2, 1, { 0.5, 0.5 } ), 0 ) ),
                     Error );
    CHECK_NOTHROW( noiseQuery( net, spec( PerturbationKind::Noise, 0.1, 0, 0, 0, Image( 2, 1, { 0.2, 0.7 } ), 1 ) ) );
}

TEST_CASE( "spec validation" )
{
    Image a( 2, 1, { 0.7, 0.2 } );
    CHECK_THROWS_AS( spec( PerturbationKind::Noise, -0.1, 0, 0, 0, a, 0 ).validate(), Error );
    CHECK_THROWS_AS( spec( PerturbationKind::Brightness, 0, -0.1, 0, 0, a, 0 ).validate(), Error );
    CHECK_THROWS_AS( spec( PerturbationKind::Contrast, 0, 0, 1.5, 0.2, a, 0 ).validate(), Error );
    CHECK_THROWS_AS( spec( PerturbationKind::Contrast, 0, 0, 0.5, 1.2, a, 0 ).validate(), Error );
    // noise and contrast together has no encoding
    CHECK_THROWS_AS( spec( PerturbationKind::Contrast, 0.1, 0, 0.5, 0.2, a, 0 ).validate(), Error );
    CHECK_NOTHROW( spec( PerturbationKind::NoiseAndBrightness, 0.1, 0.2, 0, 0, a, 0 ).validate() );
}

TEST_CASE( "brightness encoding examples" )
{
    Rng rng( 21 );
    auto net = std::make_shared<const Network>( randomNetwork( rng, 2, { 3 }, 2 ) );
    auto aug = brightnessNetwork( *net );
    CHECK( aug->inputDim() == 3 );
    Vector x{ 0.2, 0.7 };
    CHECK( evaluate( *aug, Vector{ 0.2, 0.7, 0.0 } ) == evaluate( *net, x ) );
    CHECK( evaluate( *aug, Vector{ 0.2, 0.7, 0.1 } ) == evaluate( *net, Vector{ 0.2 + 0.1, 0.7 + 0.1 } ) );
}

TEST_CASE( "brightness query box and degenerate cases" )
{
    auto net = differenceNet();
    Image a( 2, 1, { 0.7, 0.2 } );
    VerificationQuery q = brightnessQuery( net, spec( PerturbationKind::NoiseAndBrightness, 0.05, 0.3, 0, 0, a, 0 ) );
    CHECK( q.inputBox.lower() == Vector{ 0.7 - 0.05, 0.2 - 0.05, -0.3 } );
    CHECK( q.inputBox.upper() == Vector{ 0.7 + 0.05, 0.2 + 0.05, 0.3 } );
    VerificationQuery p = brightnessQuery( net, spec( PerturbationKind::NoiseAndBrightness, 0, 0, 0, 0, a, 0 ) );
    CHECK( p.inputBox.lower() == Vector{ 0.7, 0.2, 0.0 } );
    CHECK( p.inputBox.upper() == p.inputBox.lower() );
}

TEST_CASE( "brightness encoding is bit-equal to shifting the image" )
{
    Rng rng( 22 );
    for ( int t = 0; t < 300; ++t )
    {
        std::size_t n = rng.index( 1, 6 );
        auto net = randomNetwork( rng, n, randomWidths( rng, 2, 6, 12 ), rng.index( 2, 4 ) );
        auto aug = brightnessNetwork( net );
        Vector z( n );
        for ( double &v : z )
            v = rng.uniform( -0.2, 1.2 );
        double b = rng.uniform( -0.5, 0.5 );
        Vector in = z;
        in.push_back( b );
        REQUIRE( evaluate( *aug, in ) == evaluate( net, brighten( z, b ) ) );
    }
}

TEST_CASE( "contrast encoding examples" )
{
    Rng rng( 23 );
    auto net = std::make_shared<const Network>( randomNetwork( rng, 2, { 4 }, 3 ) );
    Image a( 2, 1, { 0.3, 0.9 } );
    auto aug = contrastNetwork( *net, a, 0.5 );
    CHECK( aug->inputDim() == 1 );
    Vector enc = applyLayer( aug->layers()[0], Vector{ 2.0 } );
    CHECK( std::abs( enc[0] - 0.1 ) < 1e-15 );
    CHECK( std::abs( enc[1] - 1.3 ) < 1e-15 );
    CHECK( enc == applyContrast( a.pixels(), 2.0, 0.5 ) );
    CHECK( evaluate( *aug, Vector{ 1.0 } ) == evaluate( *net, a.pixels() ) );
}

TEST_CASE( "contrast query box over the nine gamma values" )
{
    auto net = differenceNet();
    Image a( 2, 1, { 0.7, 0.2 } );
    for ( int g = 1; g <= 9; ++g )
    {
        double gamma = 0.1 * g;
        VerificationQuery q = contrastQuery( net, spec( PerturbationKind::Contrast, 0, 0, gamma, 0.2585, a, 0 ) );
        CHECK( q.inputBox.dimension() == 1 );
        CHECK( q.inputBox.lower()[0] == 1.0 - gamma );
        CHECK( q.inputBox.upper()[0] == 1.0 + gamma );
    }
}

TEST_CASE( "contrast encoding is bit-equal to the direct formula" )
{
    Rng rng( 24 );
    for ( int t = 0; t < 300; ++t )
    {
        std::size_t n = rng.index( 1, 6 );
        auto net = randomNetwork( rng, n, randomWidths( rng, 2, 6, 12 ), rng.index( 2, 4 ) );
        Image a = randomImage( rng, n, 1 );
        double mu = rng.uniform( 0, 1 );
        auto aug = contrastNetwork( net, a, mu );
        double c = rng.uniform( 0, 2 );
        REQUIRE( evaluate( *aug, Vector{ c } ) == evaluate( net, applyContrast( a.pixels(), c, mu ) ) );
    }
}

TEST_CASE( "boxes grow with their parameter" )
{
    Rng rng( 25 );
    for ( int t = 0; t < 100; ++t )
    {
        std::size_t n = rng.index( 1, 5 );
        auto net = std::make_shared<const Network>( randomNetwork( rng, n, { 3 }, 2 ) );
        Image a = randomImage( rng, n, 1 );
        std::size_t c = classify( *net, a.pixels() );
        Vector y = evaluate( *net, a.pixels() );
        if ( y[0] == y[1] )
            continue;
        double e1 = rng.uniform( 0, 0.2 ), e2 = e1 + rng.uniform( 0, 0.2 );
        double b1 = rng.uniform( 0, 0.5 ), b2 = b1 + rng.uniform( 0, 0.5 );
        double g1 = rng.uniform( 0, 0.5 ), g2 = g1 + rng.uniform( 0, 0.5 );
        auto small = brightnessQuery( net, spec( PerturbationKind::NoiseAndBrightness, e1, b1, 0, 0, a, c ) );
        auto large = brightnessQuery( net, spec( PerturbationKind::NoiseAndBrightness, e2, b2, 0, 0, a, c ) );
        CHECK( small.inputBox.within( large.inputBox ) );
        auto mixed = brightnessQuery( net, spec( PerturbationKind::NoiseAndBrightness, e2, b1, 0, 0, a, c ) );
        CHECK( small.inputBox.within( mixed.inputBox ) );
        CHECK( mixed.inputBox.within( large.inputBox ) );
        auto cs = contrastQuery( net, spec( PerturbationKind::Contrast, 0, 0, g1, 0.3, a, c ) );
        auto cl = contrastQuery( net, spec( PerturbationKind::Contrast, 0, 0, g2, 0.3, a, c ) );
        CHECK( cs.inputBox.within( cl.inputBox ) );
    }
}

TEST_CASE( "misclassification property uses the closed inequality" )
{
    OutputProperty p = misclassProperty( 0, 3 );
    CHECK_FALSE( p.satisfiedBy( Vector{ 1, 0, 0 } ) );
    CHECK( p.satisfiedBy( Vector{ 1, 1, 0 } ) );
    CHECK( misclassProperty( 0, 2 ).satisfiedBy( Vector{ 0, 1 } ) );
    CHECK_THROWS_AS( misclassProperty( 3, 3 ), Error );
    CHECK_THROWS_AS( misclassProperty( 0, 1 ), Error );
}
