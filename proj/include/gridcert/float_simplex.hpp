#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace gridcert {

/*
  Double-precision bounded-variable simplex over n structural variables with
  box bounds and m rows s_i = a_i . x carrying optional bounds. Same pivoting
  scheme as RationalSimplex. Its answers are only hints: callers certify them
  exactly, so tolerances here affect speed, never correctness.
*/
class FloatSimplex
{
public:
    enum class Outcome { Feasible, Infeasible, Optimal, Unbounded, Stalled };

    FloatSimplex( const std::vector<double> &lower,
                  const std::vector<double> &upper,
                  const std::vector<std::vector<double>> &rows );

    std::size_t structuralCount() const { return _n; }
    std::size_t rowCount() const { return _m; }
    /// Variables are numbered structural first, then one per row.
    std::size_t rowVariable( std::size_t row ) const { return _n + row; }

    void setRowBounds( std::size_t row, std::optional<double> lower, std::optional<double> upper );

    Outcome check();
    /// From a feasible assignment, maximizes the variable of a row.
    Outcome maximizeRow( std::size_t row );

    double value( std::size_t var ) const { return _values[var]; }
    bool isBasic( std::size_t var ) const { return _rowOf[var] >= 0; }
    std::optional<double> lower( std::size_t var ) const;
    std::optional<double> upper( std::size_t var ) const;

    /*
      After check() returned Infeasible: multipliers mu over the rows such
      that the combination sum mu_i s_i cannot meet its bounds. Still needs
      exact confirmation.
    */
    const std::vector<double> &conflict() const { return _conflict; }

private:
    bool belowLower( std::size_t var ) const;
    bool aboveUpper( std::size_t var ) const;
    bool canIncrease( std::size_t var ) const;
    bool canDecrease( std::size_t var ) const;
    void updateNonbasic( std::size_t var, double value );
    void pivotAndUpdate( std::size_t row, std::size_t entering, double target );
    void pivot( std::size_t row, std::size_t entering );

    std::size_t _n;
    std::size_t _m;
    std::vector<double> _values;
    std::vector<double> _lo, _hi;
    std::vector<bool> _hasLo, _hasHi;
    std::vector<std::ptrdiff_t> _rowOf;
    std::vector<std::size_t> _basicOf;
    std::vector<std::vector<double>> _tableau; // row r: basic = sum tableau[r][j] * x_j over nonbasic j
    std::vector<double> _conflict;
    std::size_t _pivotLimit;
    std::size_t _blandAfter;
};

} // namespace gridcert
