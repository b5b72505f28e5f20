#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace gridcert {

using Rational = mpq_class;

/*
  Exact bounded-variable simplex in the style used by SMT arithmetic solvers:
  every row defines a basic variable as a linear form over the others, all
  constraints are bounds on variables, and check() repairs bound violations
  by pivoting with Bland's rule. Bounds can be changed between checks and
  restored with pushBounds()/popBounds(); the basis is kept, so a sequence of
  closely related problems reuses the previous tableau.
*/
class RationalSimplex
{
public:
    using Term = std::pair<std::size_t, Rational>;

    enum class OptimumKind { Optimal, Unbounded };

    std::size_t addVariable();

    /// New variable s = sum of terms. Returns the index of s.
    std::size_t addRow( const std::vector<Term> &terms );

    std::size_t variableCount() const { return _values.size(); }

    void setLower( std::size_t var, const Rational &value );
    void setUpper( std::size_t var, const Rational &value );
    void setBounds( std::size_t var, const Rational &lower, const Rational &upper );
    void clearBounds( std::size_t var );

    void pushBounds();
    void popBounds();

    /// Finds an assignment satisfying every bound; false if none exists.
    bool check();

    /// Maximizes a variable starting from a feasible assignment (call check() first).
    OptimumKind maximize( std::size_t var );

    const Rational &value( std::size_t var ) const { return _values[var]; }

    std::size_t pivotCount() const { return _pivots; }

private:
    struct Bound
    {
        bool present = false;
        Rational value;
    };

    bool belowLower( std::size_t var ) const;
    bool aboveUpper( std::size_t var ) const;
    bool canIncrease( std::size_t var ) const;
    bool canDecrease( std::size_t var ) const;

    void updateNonbasic( std::size_t var, const Rational &value );
    void pivotAndUpdate( std::size_t row, std::size_t entering, const Rational &target );
    void pivot( std::size_t row, std::size_t entering );

    std::vector<Rational> _values;
    std::vector<Bound> _lower;
    std::vector<Bound> _upper;
    std::vector<std::ptrdiff_t> _rowOf; // -1 for nonbasic
    std::vector<std::size_t> _basicOf;  // row -> basic variable
    std::vector<std::vector<Rational>> _rows;
    std::vector<std::pair<std::vector<Bound>, std::vector<Bound>>> _saved;
    std::size_t _pivots = 0;
};

/// Nearest double to an exact rational.
double nearestDouble( const Rational &q );

} // namespace gridcert
