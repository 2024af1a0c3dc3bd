#pragma once

#include <stdexcept>
#include <string>

namespace robnoma {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension or indexing inconsistency between inputs.
class StructuralError : public Error {
public:
    using Error::Error;
};

// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

// NaN/Inf or breakdown inside an iterative method.
class NumericalError : public Error {
public:
    using Error::Error;
};

// No point satisfies the constraints that were asked for.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

inline void require_structure(bool ok, const std::string& what) {
    if (!ok) throw StructuralError(what);
}

inline void require_parameter(bool ok, const std::string& what) {
    if (!ok) throw ParameterError(what);
}

}  // namespace robnoma
