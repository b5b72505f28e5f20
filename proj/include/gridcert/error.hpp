#pragma once

#include <stdexcept>
#include <string>

namespace gridcert {

enum class ErrorCode {
    Format,         // malformed document or file
    Dimension,      // inconsistent vector/matrix shapes
    Range,          // value outside its admissible domain
    Precondition,   // operation called outside its contract
    Io,
    Internal,
};

class Error : public std::runtime_error
{
public:
    Error( ErrorCode code, const std::string &what )
        : std::runtime_error( what )
        , _code( code )
    {
    }

    ErrorCode code() const { return _code; }

private:
    ErrorCode _code;
};

} // namespace gridcert
