#pragma once

#include "gridcert/perturb.hpp"

#include <cstdint>
#include <optional>

namespace gridcert {

/// Corners tried before random sampling, lowest-index dimensions varied first.
inline constexpr std::size_t CORNER_CAP = std::size_t( 1 ) << 12;

struct AttackReport
{
    std::size_t tried = 0;
    std::optional<Vector> found;
};

/*
  Cheap counterexample search: box corners (up to CORNER_CAP), then the box
  centre, then uniform random points, stopping at the first point that
  satisfies the output property. Deterministic in ( query, samples, seed ).
*/
AttackReport sampleAttack( const VerificationQuery &query, std::size_t samples, std::uint64_t seed );

} // namespace gridcert
