#include "gridcert/rational_simplex.hpp"

#include "gridcert/error.hpp"

#include <cmath>
#include <limits>

namespace gridcert {

std::size_t RationalSimplex::addVariable()
{
    std::size_t var = _values.size();
    _values.emplace_back( 0 );
    _lower.emplace_back();
    _upper.emplace_back();
    _rowOf.push_back( -1 );
    for ( auto &row : _rows )
        row.emplace_back( 0 );
    return var;
}

std::size_t RationalSimplex::addRow( const std::vector<Term> &terms )
{
    std::size_t var = addVariable();
    std::vector<Rational> row( _values.size() );
    Rational value = 0;
    for ( const auto &[x, coeff] : terms )
    {
        if ( x >= var )
            throw Error( ErrorCode::Internal, "simplex row references an unknown variable" );
        if ( sgn( coeff ) == 0 )
            continue;
        if ( _rowOf[x] >= 0 )
        {
            // Substitute the defining row of a basic variable.
            const auto &def = _rows[std::size_t( _rowOf[x] )];
            for ( std::size_t j = 0; j < def.size(); ++j )
                if ( sgn( def[j] ) != 0 )
                    row[j] += coeff * def[j];
        }
        else
            row[x] += coeff;
        value += coeff * _values[x];
    }
    _values[var] = value;
    _rowOf[var] = std::ptrdiff_t( _rows.size() );
    _basicOf.push_back( var );
    _rows.push_back( std::move( row ) );
    return var;
}

void RationalSimplex::setLower( std::size_t var, const Rational &value )
{
    _lower[var].present = true;
    _lower[var].value = value;
    if ( _rowOf[var] < 0 && _values[var] < value )
        updateNonbasic( var, value );
}

void RationalSimplex::setUpper( std::size_t var, const Rational &value )
{
    _upper[var].present = true;
    _upper[var].value = value;
    if ( _rowOf[var] < 0 && _values[var] > value )
        updateNonbasic( var, value );
}

void RationalSimplex::setBounds( std::size_t var, const Rational &lower, const Rational &upper )
{
    setLower( var, lower );
    setUpper( var, upper );
}

void RationalSimplex::clearBounds( std::size_t var )
{
    _lower[var].present = false;
    _upper[var].present = false;
}

void RationalSimplex::pushBounds()
{
    _saved.emplace_back( _lower, _upper );
}

void RationalSimplex::popBounds()
{
    if ( _saved.empty() )
        throw Error( ErrorCode::Internal, "popBounds without pushBounds" );
    _lower = std::move( _saved.back().first );
    _upper = std::move( _saved.back().second );
    _saved.pop_back();
    // Restoring can tighten bounds again; keep nonbasic values inside them.
    for ( std::size_t v = 0; v < _values.size(); ++v )
    {
        if ( _rowOf[v] >= 0 )
            continue;
        if ( belowLower( v ) )
            updateNonbasic( v, _lower[v].value );
        else if ( aboveUpper( v ) )
            updateNonbasic( v, _upper[v].value );
    }
}

bool RationalSimplex::belowLower( std::size_t var ) const
{
    return _lower[var].present && _values[var] < _lower[var].value;
}

bool RationalSimplex::aboveUpper( std::size_t var ) const
{
    return _upper[var].present && _values[var] > _upper[var].value;
}

bool RationalSimplex::canIncrease( std::size_t var ) const
{
    return !_upper[var].present || _values[var] < _upper[var].value;
}

bool RationalSimplex::canDecrease( std::size_t var ) const
{
    return !_lower[var].present || _values[var] > _lower[var].value;
}

void RationalSimplex::updateNonbasic( std::size_t var, const Rational &value )
{
    Rational delta = value - _values[var];
    for ( std::size_t r = 0; r < _rows.size(); ++r )
        if ( sgn( _rows[r][var] ) != 0 )
            _values[_basicOf[r]] += _rows[r][var] * delta;
    _values[var] = value;
}

void RationalSimplex::pivotAndUpdate( std::size_t row, std::size_t entering, const Rational &target )
{
    std::size_t leaving = _basicOf[row];
    Rational theta = ( target - _values[leaving] ) / _rows[row][entering];
    _values[leaving] = target;
    _values[entering] += theta;
    for ( std::size_t r = 0; r < _rows.size(); ++r )
        if ( r != row && sgn( _rows[r][entering] ) != 0 )
            _values[_basicOf[r]] += _rows[r][entering] * theta;
    pivot( row, entering );
}

void RationalSimplex::pivot( std::size_t row, std::size_t entering )
{
    ++_pivots;
    std::size_t leaving = _basicOf[row];
    std::vector<Rational> &pr = _rows[row];

    // leaving = sum a_j x_j  =>  entering = ( leaving - sum_{j != entering} a_j x_j ) / a_entering
    Rational inv = 1 / pr[entering];
    for ( std::size_t j = 0; j < pr.size(); ++j )
        if ( j != entering && sgn( pr[j] ) != 0 )
        {
            pr[j] *= inv;
            pr[j] = -pr[j];
        }
    pr[leaving] = inv;
    pr[entering] = 0;

    for ( std::size_t r = 0; r < _rows.size(); ++r )
    {
        if ( r == row )
            continue;
        std::vector<Rational> &other = _rows[r];
        if ( sgn( other[entering] ) == 0 )
            continue;
        Rational c = other[entering];
        other[entering] = 0;
        for ( std::size_t j = 0; j < pr.size(); ++j )
            if ( sgn( pr[j] ) != 0 )
                other[j] += c * pr[j];
    }

    _rowOf[leaving] = -1;
    _rowOf[entering] = std::ptrdiff_t( row );
    _basicOf[row] = entering;
}

bool RationalSimplex::check()
{
    while ( true )
    {
        // Bland: smallest-index violated basic variable.
        std::ptrdiff_t row = -1;
        std::size_t basic = std::numeric_limits<std::size_t>::max();
        for ( std::size_t r = 0; r < _rows.size(); ++r )
        {
            std::size_t b = _basicOf[r];
            if ( b < basic && ( belowLower( b ) || aboveUpper( b ) ) )
            {
                basic = b;
                row = std::ptrdiff_t( r );
            }
        }
        if ( row < 0 )
            return true;

        const std::vector<Rational> &coeffs = _rows[std::size_t( row )];
        bool raise = belowLower( basic );
        std::size_t entering = std::numeric_limits<std::size_t>::max();
        for ( std::size_t j = 0; j < coeffs.size(); ++j )
        {
            int s = sgn( coeffs[j] );
            if ( s == 0 || _rowOf[j] >= 0 )
                continue;
            bool ok = raise ? ( s > 0 ? canIncrease( j ) : canDecrease( j ) )
                            : ( s > 0 ? canDecrease( j ) : canIncrease( j ) );
            if ( ok )
            {
                entering = j;
                break;
            }
        }
        if ( entering == std::numeric_limits<std::size_t>::max() )
            return false;

        Rational target = raise ? _lower[basic].value : _upper[basic].value;
        pivotAndUpdate( std::size_t( row ), entering, target );
    }
}

RationalSimplex::OptimumKind RationalSimplex::maximize( std::size_t objective )
{
    while ( true )
    {
        // Reduced costs of the objective over nonbasic variables.
        std::vector<Rational> unit;
        const std::vector<Rational> *cost = nullptr;
        if ( _rowOf[objective] >= 0 )
            cost = &_rows[std::size_t( _rowOf[objective] )];
        else
        {
            unit.assign( _values.size(), Rational( 0 ) );
            unit[objective] = 1;
            cost = &unit;
        }

        std::size_t entering = std::numeric_limits<std::size_t>::max();
        int direction = 0;
        for ( std::size_t j = 0; j < cost->size(); ++j )
        {
            int s = sgn( ( *cost )[j] );
            if ( s == 0 || _rowOf[j] >= 0 )
                continue;
            if ( s > 0 && canIncrease( j ) )
            {
                entering = j;
                direction = 1;
                break;
            }
            if ( s < 0 && canDecrease( j ) )
            {
                entering = j;
                direction = -1;
                break;
            }
        }
        if ( direction == 0 )
            return OptimumKind::Optimal;

        // Ratio test; ties resolved towards the smallest leaving variable index.
        std::optional<Rational> step;
        std::ptrdiff_t leavingRow = -1;
        if ( direction > 0 && _upper[entering].present )
            step = _upper[entering].value - _values[entering];
        if ( direction < 0 && _lower[entering].present )
            step = _values[entering] - _lower[entering].value;

        for ( std::size_t r = 0; r < _rows.size(); ++r )
        {
            int s = sgn( _rows[r][entering] ) * direction;
            if ( s == 0 )
                continue;
            std::size_t b = _basicOf[r];
            std::optional<Rational> limit;
            if ( s > 0 && _upper[b].present )
                limit = ( _upper[b].value - _values[b] ) / ( _rows[r][entering] * direction );
            else if ( s < 0 && _lower[b].present )
                limit = ( _values[b] - _lower[b].value ) / ( -_rows[r][entering] * direction );
            if ( !limit )
                continue;
            bool better = !step || *limit < *step ||
                          ( *limit == *step && leavingRow >= 0 && b < _basicOf[std::size_t( leavingRow )] );
            if ( better )
            {
                step = *limit;
                leavingRow = std::ptrdiff_t( r );
            }
        }
        if ( !step )
            return OptimumKind::Unbounded;

        Rational delta = *step * direction;
        if ( leavingRow < 0 )
        {
            updateNonbasic( entering, _values[entering] + delta );
            continue;
        }
        std::size_t leaving = _basicOf[std::size_t( leavingRow )];
        Rational target = _values[leaving] + _rows[std::size_t( leavingRow )][entering] * delta;
        pivotAndUpdate( std::size_t( leavingRow ), entering, target );
    }
}

double nearestDouble( const Rational &q )
{
    double d = q.get_d();
    if ( !std::isfinite( d ) )
        return d;
    Rational exact( d );
    if ( exact == q )
        return d;
    double other = exact < q ? std::nextafter( d, std::numeric_limits<double>::infinity() )
                             : std::nextafter( d, -std::numeric_limits<double>::infinity() );
    Rational distD = abs( q - exact );
    Rational distOther = abs( q - Rational( other ) );
    return distOther < distD ? other : d;
}

} // namespace gridcert
