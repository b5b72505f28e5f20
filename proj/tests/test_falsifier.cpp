#include "gridcert/falsifier.hpp"
#include "gridcert/verifier.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace gridcert;
using namespace gridcert::testing;

TEST_CASE( "a property holding at the centre is found within the corner cap" )
{
    // score 0 is the l1 distance to ( 0.5, 0.5 ), score 1 is 0.05: only points near the centre misclassify
    Layer hidden{ Matrix( 4, 2 ), Vector{ -0.5, 0.5, -0.5, 0.5 }, Activation::ReLU };
    hidden.weights( 0, 0 ) = 1;
    hidden.weights( 1, 0 ) = -1;
    hidden.weights( 2, 1 ) = 1;
    hidden.weights( 3, 1 ) = -1;
    Layer out{ Matrix( 2, 4 ), Vector{ 0.0, 0.05 }, Activation::Identity };
    for ( std::size_t c = 0; c < 4; ++c )
        out.weights( 0, c ) = 1;
    auto net = std::make_shared<const Network>( Network( 2, { hidden, out } ) );
    VerificationQuery q = boxQuery( net, InputBox( { 0.3, 0.3 }, { 0.7, 0.7 } ), 0 );
    AttackReport r = sampleAttack( q, 100, 1 );
    REQUIRE( r.found.has_value() );
    CHECK( r.tried == 5 );
    CHECK( r.tried <= CORNER_CAP + 1 );
    CHECK( validateWitness( q, *r.found ) );
}

TEST_CASE( "point query on a strictly robust anchor finds nothing" )
{
    Rng rng( 51 );
    auto net = std::make_shared<const Network>( randomNetwork( rng, 3, { 4 }, 3 ) );
    Image a = randomImage( rng, 3, 1 );
    std::size_t c = classify( *net, a.pixels() );
    PerturbationSpec spec{ PerturbationKind::Noise, 0.0, 0.0, 0.0, 0.0, a, c };
    VerificationQuery q = noiseQuery( net, spec );
    for ( std::size_t samples : { 1, 10, 1000 } )
    {
        AttackReport r = sampleAttack( q, samples, 3 );
        CHECK_FALSE( r.found.has_value() );
        CHECK( r.tried <= samples );
    }
}

TEST_CASE( "attacks are deterministic in the seed" )
{
    Rng rng( 52 );
    for ( int t = 0; t < 50; ++t )
    {
        VerificationQuery q = randomVerifierQuery( rng );
        AttackReport a = sampleAttack( q, 300, 9 ), b = sampleAttack( q, 300, 9 );
        CHECK( a.tried == b.tried );
        CHECK( a.found == b.found );
    }
}

TEST_CASE( "every hit validates and implies a SAT verdict" )
{
    Rng rng( 53 );
    Budget budget;
    budget.maxSeconds = 60;
    budget.maxBranches = 1000000;
    int hits = 0;
    for ( int t = 0; t < 200; ++t )
    {
        VerificationQuery q = randomVerifierQuery( rng );
        AttackReport r = sampleAttack( q, 500, std::uint64_t( t ) );
        if ( !r.found )
            continue;
        ++hits;
        CHECK( validateWitness( q, *r.found ) );
        CHECK( verify( q, budget ).status == Status::SAT );
    }
    CHECK( hits > 10 );
}

TEST_CASE( "corners are enumerated before random points" )
{
    // class 0 loses only at the corner x = ( 1, 1, 1 )
    Layer out{ Matrix( 2, 3, 1.0 ), Vector{ 0.0, 0.0 }, Activation::Identity };
    for ( std::size_t c = 0; c < 3; ++c )
        out.weights( 0, c ) = 0.0;
    out.biases[0] = 3.0;
    auto net = std::make_shared<const Network>( Network( 3, { out } ) );
    VerificationQuery q = boxQuery( net, InputBox( { 0, 0, 0 }, { 1, 1, 1 } ), 0 );
    AttackReport r = sampleAttack( q, 8, 0 );
    REQUIRE( r.found.has_value() );
    CHECK( *r.found == Vector{ 1, 1, 1 } );
    CHECK( r.tried == 8 );
}
