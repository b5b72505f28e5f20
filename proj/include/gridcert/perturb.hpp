#pragma once

#include "gridcert/image.hpp"
#include "gridcert/network.hpp"
#include "gridcert/property.hpp"

#include <memory>

namespace gridcert {

enum class PerturbationKind { Noise, Brightness, NoiseAndBrightness, Contrast };

const char *toString( PerturbationKind kind );

/*
  Noise uses epsilon, Brightness uses beta, NoiseAndBrightness uses both,
  Contrast uses gamma and mu. Unused parameters must be zero.
*/
struct PerturbationSpec
{
    PerturbationKind kind = PerturbationKind::Noise;
    double epsilon = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double mu = 0.0;
    Image anchor; // unperturbed image
    std::size_t trueClass = 0;

    void validate() const;
};

struct VerificationQuery
{
    std::shared_ptr<const Network> network;
    InputBox inputBox;
    OutputProperty property;
    PerturbationSpec provenance;
};

/// Throws unless the network assigns the anchor to trueClass with a strict margin.
void requireStrictlyClassified( const Network &net, const Image &anchor, std::size_t trueClass );

/// The n+1 input network computing net( z + b * 1 ) from inputs ( z, b ).
std::shared_ptr<const Network> brightnessNetwork( const Network &net );

/// The single-input network computing net( mu + c * ( anchor - mu ) ) from input c.
std::shared_ptr<const Network> contrastNetwork( const Network &net, const Image &anchor, double mu );

VerificationQuery noiseQuery( std::shared_ptr<const Network> net, const PerturbationSpec &spec );

/*
  Box is ( [x'_i - eps, x'_i + eps] )_i x [-beta, beta] over the network from
  brightnessNetwork. Pass a prebuilt augmented network to share it across cells.
*/
VerificationQuery brightnessQuery( const std::shared_ptr<const Network> &net, const PerturbationSpec &spec );
VerificationQuery brightnessQuery( const Network &net,
                                   std::shared_ptr<const Network> augmented,
                                   const PerturbationSpec &spec );

VerificationQuery contrastQuery( const std::shared_ptr<const Network> &net, const PerturbationSpec &spec );

/// Dispatches on spec.kind.
VerificationQuery buildQuery( const std::shared_ptr<const Network> &net, const PerturbationSpec &spec );

/// Direct (non-encoded) perturbations, evaluated with the same rounding as the encodings.
Vector brighten( const Vector &x, double b );
Vector applyContrast( const Vector &x, double c, double mu );

} // namespace gridcert
