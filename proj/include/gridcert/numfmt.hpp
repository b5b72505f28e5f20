#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace gridcert {

/// Shortest decimal text that parses back to the same double.
inline std::string formatDouble( double v )
{
    char buf[64];
    auto res = std::to_chars( buf, buf + sizeof( buf ), v );
    return std::string( buf, res.ptr );
}

/// Parses the whole string as a finite double.
inline std::optional<double> parseDouble( std::string_view text )
{
    while ( !text.empty() && ( text.front() == ' ' || text.front() == '\t' ) )
        text.remove_prefix( 1 );
    while ( !text.empty() && ( text.back() == ' ' || text.back() == '\t' || text.back() == '\r' ) )
        text.remove_suffix( 1 );
    if ( !text.empty() && text.front() == '+' )
        text.remove_prefix( 1 );
    double v = 0.0;
    auto res = std::from_chars( text.data(), text.data() + text.size(), v );
    if ( res.ec != std::errc() || res.ptr != text.data() + text.size() )
        return std::nullopt;
    if ( !std::isfinite( v ) )
        return std::nullopt;
    return v;
}

} // namespace gridcert
