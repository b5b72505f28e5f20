#include "gridcert/perturb.hpp"

#include "gridcert/error.hpp"

namespace gridcert {

const char *toString( PerturbationKind kind )
{
    switch ( kind )
    {
    case PerturbationKind::Noise:
        return "noise";
    case PerturbationKind::Brightness:
        return "brightness";
    case PerturbationKind::NoiseAndBrightness:
        return "noise+brightness";
    case PerturbationKind::Contrast:
        return "contrast";
    }
    return "?";
}

void PerturbationSpec::validate() const
{
    if ( !( epsilon >= 0.0 ) )
        throw Error( ErrorCode::Range, "epsilon must be >= 0" );
    if ( !( beta >= 0.0 ) )
        throw Error( ErrorCode::Range, "beta must be >= 0" );
    if ( !( gamma >= 0.0 && gamma <= 1.0 ) )
        throw Error( ErrorCode::Range, "gamma must lie in [0, 1]" );
    if ( !( mu >= 0.0 && mu <= 1.0 ) )
        throw Error( ErrorCode::Range, "mu must lie in [0, 1]" );

    switch ( kind )
    {
    case PerturbationKind::Noise:
        if ( beta != 0.0 || gamma != 0.0 )
            throw Error( ErrorCode::Precondition, "noise perturbation takes only epsilon" );
        break;
    case PerturbationKind::Brightness:
        if ( epsilon != 0.0 || gamma != 0.0 )
            throw Error( ErrorCode::Precondition, "brightness perturbation takes only beta" );
        break;
    case PerturbationKind::NoiseAndBrightness:
        if ( gamma != 0.0 )
            throw Error( ErrorCode::Precondition, "noise+brightness perturbation takes epsilon and beta" );
        break;
    case PerturbationKind::Contrast:
        // The contrast encoding fixes the anchor as layer weights, leaving the
        // scaling factor as the only free input.
        if ( epsilon != 0.0 || beta != 0.0 )
            throw Error( ErrorCode::Precondition,
                         "contrast cannot be combined with noise or brightness: the encoding fixes "
                         "every pixel and leaves only the contrast factor free" );
        break;
    }
}

void requireStrictlyClassified( const Network &net, const Image &anchor, std::size_t trueClass )
{
    if ( anchor.pixels().size() != net.inputDim() )
        throw Error( ErrorCode::Dimension,
                     "anchor has " + std::to_string( anchor.pixels().size() ) + " pixels, network expects " +
                         std::to_string( net.inputDim() ) );
    Vector y = evaluate( net, anchor.pixels() );
    if ( trueClass >= y.size() )
        throw Error( ErrorCode::Range, "true class out of range" );
    for ( std::size_t j = 0; j < y.size(); ++j )
        if ( j != trueClass && y[j] >= y[trueClass] )
            throw Error( ErrorCode::Precondition,
                         "anchor is not strictly classified as class " + std::to_string( trueClass ) );
}

std::shared_ptr<const Network> brightnessNetwork( const Network &net )
{
    std::size_t n = net.inputDim();
    Matrix w( n, n + 1 );
    for ( std::size_t i = 0; i < n; ++i )
    {
        w( i, i ) = 1.0;
        w( i, n ) = 1.0;
    }
    return std::make_shared<const Network>( prependLayer( net, std::move( w ), Vector( n, 0.0 ) ) );
}

std::shared_ptr<const Network> contrastNetwork( const Network &net, const Image &anchor, double mu )
{
    std::size_t n = net.inputDim();
    if ( anchor.pixels().size() != n )
        throw Error( ErrorCode::Dimension, "anchor size does not match network input" );
    Matrix w( n, 1 );
    for ( std::size_t i = 0; i < n; ++i )
        w( i, 0 ) = anchor.pixels()[i] - mu;
    return std::make_shared<const Network>( prependLayer( net, std::move( w ), Vector( n, mu ) ) );
}

VerificationQuery noiseQuery( std::shared_ptr<const Network> net, const PerturbationSpec &spec )
{
    spec.validate();
    requireStrictlyClassified( *net, spec.anchor, spec.trueClass );
    const Vector &x = spec.anchor.pixels();
    Vector lo( x.size() ), hi( x.size() );
    for ( std::size_t i = 0; i < x.size(); ++i )
    {
        lo[i] = x[i] - spec.epsilon;
        hi[i] = x[i] + spec.epsilon;
    }
    OutputProperty property = misclassProperty( spec.trueClass, net->outputDim() );
    return { std::move( net ), InputBox( std::move( lo ), std::move( hi ) ), property, spec };
}

VerificationQuery brightnessQuery( const Network &net,
                                   std::shared_ptr<const Network> augmented,
                                   const PerturbationSpec &spec )
{
    spec.validate();
    requireStrictlyClassified( net, spec.anchor, spec.trueClass );
    if ( augmented->inputDim() != net.inputDim() + 1 )
        throw Error( ErrorCode::Dimension, "augmented brightness network has the wrong input size" );

    const Vector &x = spec.anchor.pixels();
    std::size_t n = x.size();
    Vector lo( n + 1 ), hi( n + 1 );
    for ( std::size_t i = 0; i < n; ++i )
    {
        lo[i] = x[i] - spec.epsilon;
        hi[i] = x[i] + spec.epsilon;
    }
    lo[n] = -spec.beta;
    hi[n] = spec.beta;
    OutputProperty property = misclassProperty( spec.trueClass, net.outputDim() );
    return { std::move( augmented ), InputBox( std::move( lo ), std::move( hi ) ), property, spec };
}

VerificationQuery brightnessQuery( const std::shared_ptr<const Network> &net, const PerturbationSpec &spec )
{
    return brightnessQuery( *net, brightnessNetwork( *net ), spec );
}

VerificationQuery contrastQuery( const std::shared_ptr<const Network> &net, const PerturbationSpec &spec )
{
    spec.validate();
    if ( spec.kind != PerturbationKind::Contrast )
        throw Error( ErrorCode::Precondition, "contrast query needs a contrast perturbation" );
    requireStrictlyClassified( *net, spec.anchor, spec.trueClass );
    OutputProperty property = misclassProperty( spec.trueClass, net->outputDim() );
    return { contrastNetwork( *net, spec.anchor, spec.mu ),
             InputBox( { 1.0 - spec.gamma }, { 1.0 + spec.gamma } ),
             property,
             spec };
}

VerificationQuery buildQuery( const std::shared_ptr<const Network> &net, const PerturbationSpec &spec )
{
    switch ( spec.kind )
    {
    case PerturbationKind::Noise:
        return noiseQuery( net, spec );
    case PerturbationKind::Brightness:
    case PerturbationKind::NoiseAndBrightness:
        return brightnessQuery( net, spec );
    case PerturbationKind::Contrast:
        return contrastQuery( net, spec );
    }
    throw Error( ErrorCode::Internal, "unknown perturbation kind" );
}

Vector brighten( const Vector &x, double b )
{
    Vector out( x.size() );
    for ( std::size_t i = 0; i < x.size(); ++i )
        out[i] = x[i] + b;
    return out;
}

Vector applyContrast( const Vector &x, double c, double mu )
{
    Vector out( x.size() );
    for ( std::size_t i = 0; i < x.size(); ++i )
        out[i] = ( x[i] - mu ) * c + mu;
    return out;
}

} // namespace gridcert
