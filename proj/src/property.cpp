#include "gridcert/property.hpp"

#include "gridcert/error.hpp"

namespace gridcert {

InputBox::InputBox( Vector lower, Vector upper )
    : _lower( std::move( lower ) )
    , _upper( std::move( upper ) )
{
    if ( _lower.size() != _upper.size() )
        throw Error( ErrorCode::Dimension, "input box bounds have different lengths" );
    for ( std::size_t i = 0; i < _lower.size(); ++i )
        if ( !( _lower[i] <= _upper[i] ) )
            throw Error( ErrorCode::Range, "input box has lower > upper at index " + std::to_string( i ) );
}

Vector InputBox::center() const
{
    Vector c( _lower.size() );
    for ( std::size_t i = 0; i < c.size(); ++i )
        c[i] = _lower[i] + ( _upper[i] - _lower[i] ) / 2;
    return c;
}

bool InputBox::contains( std::span<const double> x ) const
{
    if ( x.size() != dimension() )
        throw Error( ErrorCode::Dimension, "point dimension does not match box" );
    for ( std::size_t i = 0; i < x.size(); ++i )
        if ( !( x[i] >= _lower[i] && x[i] <= _upper[i] ) )
            return false;
    return true;
}

bool InputBox::within( const InputBox &other ) const
{
    if ( other.dimension() != dimension() )
        return false;
    for ( std::size_t i = 0; i < dimension(); ++i )
        if ( _lower[i] < other._lower[i] || _upper[i] > other._upper[i] )
            return false;
    return true;
}

OutputProperty::OutputProperty( std::size_t trueClass, std::size_t numClasses )
    : _trueClass( trueClass )
    , _numClasses( numClasses )
{
    if ( numClasses < 2 )
        throw Error( ErrorCode::Range, "output property needs at least two classes" );
    if ( trueClass >= numClasses )
        throw Error( ErrorCode::Range,
                     "true class " + std::to_string( trueClass ) + " out of range for " +
                         std::to_string( numClasses ) + " classes" );
}

bool OutputProperty::satisfiedBy( std::span<const double> output ) const
{
    if ( output.size() != _numClasses )
        throw Error( ErrorCode::Dimension, "output length does not match property class count" );
    for ( std::size_t j = 0; j < _numClasses; ++j )
        if ( j != _trueClass && output[j] >= output[_trueClass] )
            return true;
    return false;
}

OutputProperty misclassProperty( std::size_t trueClass, std::size_t numClasses )
{
    return OutputProperty( trueClass, numClasses );
}

} // namespace gridcert
