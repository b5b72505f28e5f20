#include "gridcert/error.hpp"
#include "gridcert/verifier.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace gridcert;
using namespace gridcert::testing;

namespace {

// y = ReLU( x ) against a constant rival output: misclassified iff y >= threshold.
Network reluAgainst( double threshold )
{
    Layer hidden{ Matrix( 1, 1, 1.0 ), Vector{ 0.0 }, Activation::ReLU };
    Layer out{ Matrix( 2, 1 ), Vector{ threshold, 0.0 }, Activation::Identity };
    out.weights( 1, 0 ) = 1.0;
    return Network( 1, { hidden, out } );
}

// Pre-activations of every layer, computed neuron by neuron.
std::vector<Vector> preActivations( const Network &net, const Vector &x )
{
    std::vector<Vector> out;
    Vector v = x;
    for ( const Layer &layer : net.layers() )
    {
        Vector z( layer.outputDim() );
        for ( std::size_t r = 0; r < z.size(); ++r )
        {
            double s = layer.biases[r];
            for ( std::size_t c = 0; c < v.size(); ++c )
                s += layer.weights( r, c ) * v[c];
            z[r] = s;
        }
        out.push_back( z );
        v = z;
        if ( layer.activation == Activation::ReLU )
            for ( double &s : v )
                s = std::max( 0.0, s );
    }
    return out;
}

Pattern patternAt( const Network &net, const Vector &x )
{
    Pattern p;
    std::vector<Vector> z = preActivations( net, x );
    for ( std::size_t l = 0; l + 1 < net.layers().size(); ++l )
        for ( double s : z[l] )
            p.push_back( s >= 0.0 );
    return p;
}

Budget generous()
{
    Budget b;
    b.maxSeconds = 60;
    b.maxBranches = 1000000;
    return b;
}

} // namespace

TEST_CASE( "status text round-trips" )
{
    for ( Status s : { Status::SAT, Status::UNSAT, Status::UNKNOWN } )
        CHECK( parseStatus( toString( s ) ) == s );
    CHECK_FALSE( parseStatus( "sat?" ).has_value() );
}

TEST_CASE( "interval propagation of a point collapses to the forward pass" )
{
    Rng rng( 41 );
    for ( int t = 0; t < 50; ++t )
    {
        Network net = randomNetwork( rng, 3, { 5, 4 }, 3 );
        Vector x{ rng.uniform( 0, 1 ), rng.uniform( 0, 1 ), rng.uniform( 0, 1 ) };
        NeuronBounds nb = intervalPropagate( net, InputBox::point( x ) );
        std::vector<Vector> z = preActivations( net, x );
        REQUIRE( nb.layers.size() == z.size() );
        for ( std::size_t l = 0; l < z.size(); ++l )
            for ( std::size_t i = 0; i < z[l].size(); ++i )
            {
                CHECK( nb.layers[l].lower[i] <= z[l][i] );
                CHECK( nb.layers[l].upper[i] >= z[l][i] );
                CHECK( nb.layers[l].upper[i] - nb.layers[l].lower[i] <= 1e-7 );
            }
    }
}

TEST_CASE( "single ReLU over [-1, 2] is unstable" )
{
    Layer hidden{ Matrix( 1, 1, 1.0 ), Vector{ 0.0 }, Activation::ReLU };
    Layer out{ Matrix( 2, 1, 1.0 ), Vector{ 0.0, 0.0 }, Activation::Identity };
    Network net( 1, { hidden, out } );
    NeuronBounds nb = intervalPropagate( net, InputBox( { -1.0 }, { 2.0 } ) );
    CHECK( nb.layers[0].lower[0] == doctest::Approx( -1.0 ).epsilon( 1e-8 ) );
    CHECK( nb.layers[0].upper[0] == doctest::Approx( 2.0 ).epsilon( 1e-8 ) );
    CHECK( nb.layers[0].lower[0] <= -1.0 );
    CHECK( nb.layers[0].upper[0] >= 2.0 );
    REQUIRE( nb.phases.size() == 1 );
    CHECK( nb.phases[0] == Phase::Unstable );

    NeuronBounds on = intervalPropagate( net, InputBox( { 0.5 }, { 2.0 } ) );
    CHECK( on.phases[0] == Phase::ActiveFixed );
    NeuronBounds off = intervalPropagate( net, InputBox( { -2.0 }, { -0.5 } ) );
    CHECK( off.phases[0] == Phase::InactiveFixed );
}

TEST_CASE( "interval bounds contain sampled pre-activations" )
{
    Rng rng( 42 );
    std::size_t violations = 0;
    for ( int t = 0; t < 10000; ++t )
    {
        std::size_t n = rng.index( 1, 6 );
        Network net = randomNetwork( rng, n, randomWidths( rng, 3, 6, 20 ), rng.index( 2, 4 ) );
        Vector lo( n ), hi( n );
        for ( std::size_t i = 0; i < n; ++i )
        {
            lo[i] = rng.uniform( -1, 1 );
            hi[i] = lo[i] + rng.uniform( 0, 1 );
        }
        InputBox box( lo, hi );
        NeuronBounds nb = intervalPropagate( net, box );
        std::vector<Vector> z = preActivations( net, sampleBox( rng, box ) );
        std::size_t k = 0;
        for ( std::size_t l = 0; l < z.size(); ++l )
            for ( std::size_t i = 0; i < z[l].size(); ++i )
            {
                violations += z[l][i] < nb.layers[l].lower[i] || z[l][i] > nb.layers[l].upper[i];
                if ( l + 1 < z.size() )
                {
                    Phase ph = nb.phases[k++];
                    bool consistent = ( ph == Phase::ActiveFixed ) == ( nb.layers[l].lower[i] >= 0 ) &&
                                      ( ph == Phase::InactiveFixed ) == ( nb.layers[l].upper[i] <= 0 );
                    violations += !consistent;
                }
            }
    }
    CHECK( violations == 0 );
}

TEST_CASE( "toy network cannot reach a non-positive output from <2, -1>" )
{
    // outputs ( y, 0 ) with true class 0: misclassified iff y <= 0
    auto net = std::make_shared<const Network>( toyWithOutputs( 0.5, 0.0, 0.0, 0.0 ) );
    VerificationQuery q = boxQuery( net, InputBox::point( { 2.0, -1.0 } ), 0 );
    Verdict v = verify( q, generous() );
    CHECK( v.status == Status::UNSAT );
    CHECK( enumerateOracle( q ).status == Status::UNSAT );

    // but y <= 0 is reachable once x2 may be positive
    VerificationQuery wide = boxQuery( net, InputBox( { 0.0, -1.0 }, { 2.0, 1.0 } ), 0 );
    Verdict w = verify( wide, generous() );
    REQUIRE( w.status == Status::SAT );
    CHECK( validateWitness( wide, *w.witness ) );
}

TEST_CASE( "point query on a strictly classified anchor is UNSAT" )
{
    Rng rng( 43 );
    int done = 0;
    while ( done < 50 )
    {
        auto net = std::make_shared<const Network>( randomNetwork( rng, 4, { 6, 5 }, 3 ) );
        Image a = randomImage( rng, 4, 1 );
        std::size_t c = classify( *net, a.pixels() );
        PerturbationSpec spec{ PerturbationKind::Noise, 0.0, 0.0, 0.0, 0.0, a, c };
        try
        {
            requireStrictlyClassified( *net, a, c );
        }
        catch ( const Error & )
        {
            continue;
        }
        CHECK( verify( noiseQuery( net, spec ), generous() ).status == Status::UNSAT );
        ++done;
    }
}

TEST_CASE( "verify agrees with enumeration on random small networks" )
{
    Rng rng( 44 );
    int sat = 0, unsat = 0;
    for ( int t = 0; t < 150; ++t )
    {
        VerificationQuery q = randomVerifierQuery( rng );
        Verdict v = verify( q, generous() );
        Verdict o = enumerateOracle( q );
        REQUIRE( v.status != Status::UNKNOWN );
        REQUIRE( v.status == o.status );
        if ( v.status == Status::SAT )
        {
            ++sat;
            REQUIRE( v.witness.has_value() );
            CHECK( validateWitness( q, *v.witness ) );
            REQUIRE( o.witness.has_value() );
            CHECK( validateWitness( q, *o.witness ) );
        }
        else
            ++unsat;
    }
    MESSAGE( sat << " SAT, " << unsat << " UNSAT" );
    CHECK( sat > 10 );
    CHECK( unsat > 10 );
}

TEST_CASE( "verify is deterministic under a branch cap" )
{
    Rng rng( 45 );
    Budget tight;
    tight.maxSeconds = 1000;
    tight.maxBranches = 3;
    for ( int t = 0; t < 40; ++t )
    {
        VerificationQuery q = randomVerifierQuery( rng );
        Verdict a = verify( q, tight ), b = verify( q, tight );
        CHECK( a.status == b.status );
        CHECK( a.stats.branches == b.stats.branches );
        CHECK( a.stats.branches <= tight.maxBranches + 1 );
        if ( a.status == Status::UNKNOWN )
            CHECK( !a.reason.empty() );
    }
}

TEST_CASE( "a SAT witness for a smaller box validates for every larger box" )
{
    Rng rng( 46 );
    int checked = 0;
    for ( int t = 0; t < 300 && checked < 50; ++t )
    {
        VerificationQuery q = randomVerifierQuery( rng );
        Verdict v = verify( q, generous() );
        if ( v.status != Status::SAT )
            continue;
        Vector lo = q.inputBox.lower(), hi = q.inputBox.upper();
        for ( std::size_t i = 0; i < lo.size(); ++i )
        {
            lo[i] -= rng.uniform( 0, 0.3 );
            hi[i] += rng.uniform( 0, 0.3 );
        }
        VerificationQuery big = boxQuery( q.network, InputBox( lo, hi ), q.property.trueClass() );
        CHECK( validateWitness( big, *v.witness ) );
        ++checked;
    }
    CHECK( checked == 50 );
}

TEST_CASE( "leaf feasibility on a single ReLU" )
{
    Network net = reluAgainst( 1.5 );
    OutputProperty p = misclassProperty( 0, 2 );
    InputBox box( { 1.0 }, { 2.0 } );
    LeafResult on = leafFeasible( net, box, { true }, p );
    REQUIRE( on.feasible );
    REQUIRE( on.witness.has_value() );
    CHECK( on.witnessValid );
    CHECK( ( *on.witness )[0] >= 1.5 );
    CHECK( ( *on.witness )[0] <= 2.0 );
    CHECK_FALSE( leafFeasible( net, box, { false }, p ).feasible );
}

TEST_CASE( "leaf feasibility is never contradicted by grid sampling" )
{
    Rng rng( 47 );
    int sampledSat = 0, leafSat = 0;
    for ( int t = 0; t < 200; ++t )
    {
        std::size_t n = rng.index( 1, 2 );
        auto net = std::make_shared<const Network>( randomNetwork( rng, n, randomWidths( rng, 2, 4, 6 ), rng.index( 2, 3 ) ) );
        Vector lo( n ), hi( n );
        double width = n == 1 ? 1.0 : 0.2;
        for ( std::size_t i = 0; i < n; ++i )
        {
            lo[i] = rng.uniform( -1, 1 );
            hi[i] = lo[i] + width;
        }
        InputBox box( lo, hi );
        Vector seedPoint = sampleBox( rng, box );
        Pattern pattern = patternAt( *net, seedPoint );
        std::size_t c = rng.index( 0, net->outputDim() - 1 );
        OutputProperty property = misclassProperty( c, net->outputDim() );
        LeafResult leaf = leafFeasible( *net, box, pattern, property );
        leafSat += leaf.feasible;
        if ( leaf.feasible )
            CHECK( leaf.witnessValid );

        bool found = false;
        std::size_t steps = std::size_t( width / 1e-3 + 0.5 );
        for ( std::size_t i = 0; i <= steps && !found; ++i )
            for ( std::size_t j = 0; j <= ( n == 2 ? steps : 0 ) && !found; ++j )
            {
                Vector x{ lo[0] + width * double( i ) / double( steps ) };
                if ( n == 2 )
                    x.push_back( lo[1] + width * double( j ) / double( steps ) );
                std::vector<Vector> z = preActivations( *net, x );
                bool matches = true;
                std::size_t k = 0;
                for ( std::size_t l = 0; l + 1 < z.size() && matches; ++l )
                    for ( double s : z[l] )
                        matches = matches && ( pattern[k++] ? s >= 0 : s <= 0 );
                found = matches && property.satisfiedBy( evaluate( *net, x ) );
            }
        if ( found )
        {
            ++sampledSat;
            CHECK( leaf.feasible );
        }
    }
    MESSAGE( sampledSat << " sampled SAT, " << leafSat << " leaf SAT" );
    CHECK( sampledSat > 10 );
}

TEST_CASE( "witness validation is exact on the box" )
{
    auto net = std::make_shared<const Network>( toyWithOutputs( 0.5, 0.0, 0.0, 1.0 ) );
    VerificationQuery q = boxQuery( net, InputBox( { 0.0, 0.0 }, { 1.0, 1.0 } ), 0 );
    // y = 0.5 * relu( relu( 1.5 x1 - x2 ) - relu( 2 x2 ) ) against a constant 1
    CHECK( validateWitness( q, { 0.0, 0.0 } ) );
    CHECK_FALSE( validateWitness( q, { -1e-6, 0.0 } ) );
    CHECK_FALSE( validateWitness( q, { 0.0, 1.0 + 1e-6 } ) );
    CHECK_THROWS_AS( validateWitness( q, { 0.0 } ), Error );
}

TEST_CASE( "enumeration on an affine network is one exact check" )
{
    Layer out{ Matrix( 2, 2 ), Vector{ 0.0, 0.0 }, Activation::Identity };
    out.weights( 0, 0 ) = 1;
    out.weights( 1, 1 ) = 1;
    auto net = std::make_shared<const Network>( Network( 2, { out } ) );
    // class 0 loses iff x2 >= x1
    CHECK( enumerateOracle( boxQuery( net, InputBox( { 1, 0 }, { 2, 0.999 } ), 0 ) ).status == Status::UNSAT );
    Verdict sat = enumerateOracle( boxQuery( net, InputBox( { 1, 0 }, { 2, 1 } ), 0 ) );
    REQUIRE( sat.status == Status::SAT );
    CHECK( ( *sat.witness )[0] == 1.0 );
    CHECK( ( *sat.witness )[1] == 1.0 );
}

TEST_CASE( "toy network reaches output 3 on [0, 3] x [-2, 0], as grid sampling shows" )
{
    // outputs ( 3, y ) with true class 0: misclassified iff y >= 3
    auto net = std::make_shared<const Network>( toyWithOutputs( 0.0, 3.0, 0.5, 0.0 ) );
    VerificationQuery q = boxQuery( net, InputBox( { 0.0, -2.0 }, { 3.0, 0.0 } ), 0 );
    bool sampled = false;
    for ( int i = 0; i <= 300 && !sampled; ++i )
        for ( int j = 0; j <= 200 && !sampled; ++j )
            sampled = q.property.satisfiedBy( evaluate( *net, Vector{ 0.01 * i, -2.0 + 0.01 * j } ) );
    Verdict o = enumerateOracle( q );
    CHECK( sampled );
    CHECK( ( o.status == Status::SAT ) == sampled );
    CHECK( verify( q, generous() ).status == o.status );

    VerificationQuery unreachable = boxQuery( std::make_shared<const Network>( toyWithOutputs( 0.0, 3.3, 0.5, 0.0 ) ),
                                              InputBox( { 0.0, -2.0 }, { 3.0, 0.0 } ),
                                              0 );
    CHECK( enumerateOracle( unreachable ).status == Status::UNSAT );
}

TEST_CASE( "enumeration refuses networks over the ReLU cap" )
{
    Rng rng( 48 );
    auto net = std::make_shared<const Network>( randomNetwork( rng, 2, { 12, 9 }, 2 ) );
    VerificationQuery q = boxQuery( net, InputBox( { 0, 0 }, { 1, 1 } ), 0 );
    CHECK_THROWS_AS( enumerateOracle( q ), Error );
}

TEST_CASE( "budget validation" )
{
    Budget b;
    b.maxSeconds = 0;
    CHECK_THROWS_AS( b.validate(), Error );
    b.maxSeconds = 1;
    b.maxBranches = 0;
    CHECK_THROWS_AS( b.validate(), Error );
}
