#include "gridcert/float_simplex.hpp"

#include "gridcert/error.hpp"

#include <cmath>
#include <limits>

namespace gridcert {

namespace {

constexpr double FEASIBILITY_TOLERANCE = 1e-9;
constexpr double PIVOT_TOLERANCE = 1e-9;
constexpr std::size_t NONE = std::numeric_limits<std::size_t>::max();

} // namespace

FloatSimplex::FloatSimplex( const std::vector<double> &lower,
                            const std::vector<double> &upper,
                            const std::vector<std::vector<double>> &rows )
    : _n( lower.size() )
    , _m( rows.size() )
{
    if ( upper.size() != _n )
        throw Error( ErrorCode::Dimension, "float simplex: bound vectors differ in length" );
    std::size_t total = _n + _m;
    _values.assign( total, 0.0 );
    _lo.assign( total, 0.0 );
    _hi.assign( total, 0.0 );
    _hasLo.assign( total, false );
    _hasHi.assign( total, false );
    _rowOf.assign( total, -1 );
    for ( std::size_t j = 0; j < _n; ++j )
    {
        _lo[j] = lower[j];
        _hi[j] = upper[j];
        _hasLo[j] = _hasHi[j] = true;
        _values[j] = lower[j];
    }
    for ( std::size_t r = 0; r < _m; ++r )
    {
        if ( rows[r].size() != _n )
            throw Error( ErrorCode::Dimension, "float simplex: row length mismatch" );
        std::vector<double> t( total, 0.0 );
        double v = 0.0;
        for ( std::size_t j = 0; j < _n; ++j )
        {
            t[j] = rows[r][j];
            v += rows[r][j] * _values[j];
        }
        _tableau.push_back( std::move( t ) );
        _basicOf.push_back( _n + r );
        _rowOf[_n + r] = std::ptrdiff_t( r );
        _values[_n + r] = v;
    }
    _pivotLimit = 50 * total + 100;
    _blandAfter = 4 * total;
}

void FloatSimplex::setRowBounds( std::size_t row, std::optional<double> lower, std::optional<double> upper )
{
    std::size_t var = _n + row;
    _hasLo[var] = lower.has_value();
    _hasHi[var] = upper.has_value();
    _lo[var] = lower.value_or( 0.0 );
    _hi[var] = upper.value_or( 0.0 );
    if ( _rowOf[var] < 0 )
    {
        if ( belowLower( var ) )
            updateNonbasic( var, _lo[var] );
        else if ( aboveUpper( var ) )
            updateNonbasic( var, _hi[var] );
    }
}

std::optional<double> FloatSimplex::lower( std::size_t var ) const
{
    return _hasLo[var] ? std::optional<double>( _lo[var] ) : std::nullopt;
}

std::optional<double> FloatSimplex::upper( std::size_t var ) const
{
    return _hasHi[var] ? std::optional<double>( _hi[var] ) : std::nullopt;
}

bool FloatSimplex::belowLower( std::size_t var ) const
{
    return _hasLo[var] && _values[var] < _lo[var] - FEASIBILITY_TOLERANCE;
}

bool FloatSimplex::aboveUpper( std::size_t var ) const
{
    return _hasHi[var] && _values[var] > _hi[var] + FEASIBILITY_TOLERANCE;
}

bool FloatSimplex::canIncrease( std::size_t var ) const
{
    return !_hasHi[var] || _values[var] < _hi[var];
}

bool FloatSimplex::canDecrease( std::size_t var ) const
{
    return !_hasLo[var] || _values[var] > _lo[var];
}

void FloatSimplex::updateNonbasic( std::size_t var, double value )
{
    double delta = value - _values[var];
    for ( std::size_t r = 0; r < _m; ++r )
        if ( _tableau[r][var] != 0.0 )
            _values[_basicOf[r]] += _tableau[r][var] * delta;
    _values[var] = value;
}

void FloatSimplex::pivotAndUpdate( std::size_t row, std::size_t entering, double target )
{
    std::size_t leaving = _basicOf[row];
    double theta = ( target - _values[leaving] ) / _tableau[row][entering];
    for ( std::size_t r = 0; r < _m; ++r )
        if ( r != row && _tableau[r][entering] != 0.0 )
            _values[_basicOf[r]] += _tableau[r][entering] * theta;
    _values[entering] += theta;
    _values[leaving] = target;
    pivot( row, entering );
}

void FloatSimplex::pivot( std::size_t row, std::size_t entering )
{
    std::size_t leaving = _basicOf[row];
    std::vector<double> &pr = _tableau[row];
    double inv = 1.0 / pr[entering];
    for ( std::size_t j = 0; j < pr.size(); ++j )
        if ( j != entering && pr[j] != 0.0 )
            pr[j] = -pr[j] * inv;
    pr[leaving] = inv;
    pr[entering] = 0.0;
    for ( std::size_t r = 0; r < _m; ++r )
    {
        if ( r == row )
            continue;
        std::vector<double> &other = _tableau[r];
        double c = other[entering];
        if ( c == 0.0 )
            continue;
        other[entering] = 0.0;
        for ( std::size_t j = 0; j < pr.size(); ++j )
            if ( pr[j] != 0.0 )
                other[j] += c * pr[j];
    }
    _rowOf[leaving] = -1;
    _rowOf[entering] = std::ptrdiff_t( row );
    _basicOf[row] = entering;
}

FloatSimplex::Outcome FloatSimplex::check()
{
    _conflict.clear();
    for ( std::size_t pivots = 0;; ++pivots )
    {
        if ( pivots > _pivotLimit )
            return Outcome::Stalled;
        std::size_t row = NONE, basic = NONE;
        for ( std::size_t r = 0; r < _m; ++r )
        {
            std::size_t b = _basicOf[r];
            if ( b < basic && ( belowLower( b ) || aboveUpper( b ) ) )
            {
                basic = b;
                row = r;
            }
        }
        if ( row == NONE )
            return Outcome::Feasible;

        const std::vector<double> &coeffs = _tableau[row];
        bool raise = belowLower( basic );
        // Largest usable coefficient first for stability; Bland's rule later so cycling cannot persist.
        bool bland = pivots > _blandAfter;
        std::size_t entering = NONE;
        double best = 0.0;
        for ( std::size_t j = 0; j < coeffs.size(); ++j )
        {
            double a = std::abs( coeffs[j] );
            if ( a <= PIVOT_TOLERANCE || _rowOf[j] >= 0 )
                continue;
            bool up = ( coeffs[j] > 0 ) == raise;
            if ( !( up ? canIncrease( j ) : canDecrease( j ) ) )
                continue;
            if ( bland )
            {
                entering = j;
                break;
            }
            if ( a > best )
            {
                best = a;
                entering = j;
            }
        }
        if ( entering == NONE )
        {
            // basic - sum coeffs_j x_j = 0 over all variables.
            _conflict.assign( _m, 0.0 );
            for ( std::size_t r = 0; r < _m; ++r )
                _conflict[r] = -coeffs[_n + r];
            if ( basic >= _n )
                _conflict[basic - _n] = 1.0;
            return Outcome::Infeasible;
        }
        pivotAndUpdate( row, entering, raise ? _lo[basic] : _hi[basic] );
    }
}

FloatSimplex::Outcome FloatSimplex::maximizeRow( std::size_t objectiveRow )
{
    std::size_t objective = _n + objectiveRow;
    std::vector<double> unit;
    for ( std::size_t pivots = 0;; ++pivots )
    {
        if ( pivots > _pivotLimit )
            return Outcome::Stalled;
        const std::vector<double> *cost;
        if ( _rowOf[objective] >= 0 )
            cost = &_tableau[std::size_t( _rowOf[objective] )];
        else
        {
            unit.assign( _n + _m, 0.0 );
            unit[objective] = 1.0;
            cost = &unit;
        }

        std::size_t entering = NONE;
        int direction = 0;
        for ( std::size_t j = 0; j < cost->size(); ++j )
        {
            double c = ( *cost )[j];
            if ( std::abs( c ) <= PIVOT_TOLERANCE || _rowOf[j] >= 0 )
                continue;
            if ( c > 0 && canIncrease( j ) )
            {
                entering = j;
                direction = 1;
                break;
            }
            if ( c < 0 && canDecrease( j ) )
            {
                entering = j;
                direction = -1;
                break;
            }
        }
        if ( direction == 0 )
            return Outcome::Optimal;

        std::optional<double> step;
        std::size_t leavingRow = NONE;
        if ( direction > 0 && _hasHi[entering] )
            step = _hi[entering] - _values[entering];
        if ( direction < 0 && _hasLo[entering] )
            step = _values[entering] - _lo[entering];
        for ( std::size_t r = 0; r < _m; ++r )
        {
            double a = _tableau[r][entering] * direction;
            if ( std::abs( a ) <= PIVOT_TOLERANCE )
                continue;
            std::size_t b = _basicOf[r];
            std::optional<double> limit;
            if ( a > 0 && _hasHi[b] )
                limit = std::max( 0.0, ( _hi[b] - _values[b] ) / a );
            else if ( a < 0 && _hasLo[b] )
                limit = std::max( 0.0, ( _values[b] - _lo[b] ) / -a );
            if ( !limit )
                continue;
            if ( !step || *limit < *step || ( *limit == *step && leavingRow != NONE && b < _basicOf[leavingRow] ) )
            {
                step = *limit;
                leavingRow = r;
            }
        }
        if ( !step )
            return Outcome::Unbounded;
        if ( leavingRow == NONE )
        {
            updateNonbasic( entering, direction > 0 ? _hi[entering] : _lo[entering] );
            continue;
        }
        std::size_t leaving = _basicOf[leavingRow];
        double target = _tableau[leavingRow][entering] * direction > 0 ? _hi[leaving] : _lo[leaving];
        pivotAndUpdate( leavingRow, entering, target );
    }
}

} // namespace gridcert
