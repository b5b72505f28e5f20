#pragma once

#include "gridcert/network.hpp"

#include <cstddef>
#include <span>

namespace gridcert {

/// Axis-aligned box of inputs, closed intervals.
class InputBox
{
public:
    InputBox( Vector lower, Vector upper );

    static InputBox point( const Vector &x ) { return InputBox( x, x ); }

    std::size_t dimension() const { return _lower.size(); }
    const Vector &lower() const { return _lower; }
    const Vector &upper() const { return _upper; }
    Vector center() const;

    bool contains( std::span<const double> x ) const;
    /// True if this box lies inside other.
    bool within( const InputBox &other ) const;

private:
    Vector _lower;
    Vector _upper;
};

/*
  Misclassification set for a true class c over k outputs: satisfied by y iff
  some j != c has y_j >= y_c. Ties count as misclassification.
*/
class OutputProperty
{
public:
    OutputProperty( std::size_t trueClass, std::size_t numClasses );

    std::size_t trueClass() const { return _trueClass; }
    std::size_t numClasses() const { return _numClasses; }

    bool satisfiedBy( std::span<const double> output ) const;

private:
    std::size_t _trueClass;
    std::size_t _numClasses;
};

OutputProperty misclassProperty( std::size_t trueClass, std::size_t numClasses );

} // namespace gridcert
