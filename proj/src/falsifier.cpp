#include "gridcert/falsifier.hpp"

#include "gridcert/error.hpp"
#include "gridcert/verifier.hpp"

#include <algorithm>
#include <random>

namespace gridcert {

AttackReport sampleAttack( const VerificationQuery &query, std::size_t samples, std::uint64_t seed )
{
    if ( samples < 1 )
        throw Error( ErrorCode::Precondition, "sample_attack needs at least one sample" );

    const InputBox &box = query.inputBox;
    const std::size_t n = box.dimension();
    AttackReport report;

    auto tryPoint = [&]( const Vector &x ) {
        ++report.tried;
        if ( validateWitness( query, x ) )
        {
            report.found = x;
            return true;
        }
        return false;
    };

    // Corner k sets dimension i to its upper end iff bit i of k is set.
    std::size_t varying = std::min<std::size_t>( n, 12 );
    std::size_t corners = std::min( CORNER_CAP, std::size_t( 1 ) << varying );
    for ( std::size_t k = 0; k < corners && report.tried < samples; ++k )
    {
        Vector x = box.lower();
        for ( std::size_t i = 0; i < varying; ++i )
            if ( k >> i & 1 )
                x[i] = box.upper()[i];
        if ( tryPoint( x ) )
            return report;
    }

    if ( report.tried < samples && tryPoint( box.center() ) )
        return report;

    std::mt19937_64 rng( seed );
    std::uniform_real_distribution<double> unit( 0.0, 1.0 );
    while ( report.tried < samples )
    {
        Vector x( n );
        for ( std::size_t i = 0; i < n; ++i )
        {
            double lo = box.lower()[i];
            double hi = box.upper()[i];
            x[i] = std::clamp( lo + unit( rng ) * ( hi - lo ), lo, hi );
        }
        if ( tryPoint( x ) )
            return report;
    }
    return report;
}

} // namespace gridcert
