#pragma once

#include "gridcert/network.hpp"
#include "gridcert/perturb.hpp"
#include "gridcert/property.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gridcert {

enum class Status { SAT, UNSAT, UNKNOWN };

const char *toString( Status status );
std::optional<Status> parseStatus( const std::string &text );

enum class Phase : std::uint8_t { ActiveFixed, InactiveFixed, Unstable };

/// Outward slack added to both ends of every propagated affine bound.
inline constexpr double BOUND_SLACK = 1e-9;

struct LayerBounds
{
    Vector lower; // pre-activation
    Vector upper;
};

/*
  Per-layer pre-activation bounds (output layer included) and the phase of
  every ReLU neuron, numbered layer by layer.
*/
struct NeuronBounds
{
    std::vector<LayerBounds> layers;
    std::vector<Phase> phases;
};

NeuronBounds intervalPropagate( const Network &net, const InputBox &box );

struct Budget
{
    double maxSeconds = 60.0;
    std::uint64_t maxBranches = 100000;

    void validate() const;
};

struct VerifierStats
{
    std::uint64_t branches = 0;
    std::uint64_t leafChecks = 0;
    double seconds = 0.0;
};

struct Verdict
{
    Status status = Status::UNKNOWN;
    std::optional<Vector> witness;
    VerifierStats stats;
    std::string reason; // why UNKNOWN: "branch budget", "time budget", "witness rounding", ...
};

Verdict verify( const VerificationQuery &query, const Budget &budget );

/// Activation pattern: true = active, one entry per ReLU neuron, layer by layer.
using Pattern = std::vector<bool>;

struct LeafResult
{
    bool feasible = false;
    /// Rounded point, present when feasible; validated unless rounding failed.
    std::optional<Vector> witness;
    bool witnessValid = false;
};

/// Exact rational decision of one fully fixed activation region.
LeafResult leafFeasible( const Network &net, const InputBox &box, const Pattern &pattern, const OutputProperty &property );

bool validateWitness( const VerificationQuery &query, const Vector &witness );

inline constexpr std::size_t ORACLE_RELU_CAP = 20;

/// Exhaustive search over activation patterns; for testing verify.
Verdict enumerateOracle( const VerificationQuery &query );

} // namespace gridcert
