#pragma once

#include <stdexcept>
#include <string>

namespace condrep {

/// Base class for every domain failure raised by the library. The CLI maps
/// these to exit code 1; anything else is a usage or internal error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CONDREP_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(what) {}      \
    }

CONDREP_DEFINE_ERROR(InvalidInput);
CONDREP_DEFINE_ERROR(DomainError);
CONDREP_DEFINE_ERROR(DimensionMismatch);
CONDREP_DEFINE_ERROR(ConditionDViolated);
CONDREP_DEFINE_ERROR(EmptyA);
CONDREP_DEFINE_ERROR(RangeError);
CONDREP_DEFINE_ERROR(TooLarge);
CONDREP_DEFINE_ERROR(ArbitrageError);
CONDREP_DEFINE_ERROR(NonFiniteState);
CONDREP_DEFINE_ERROR(EmptyCloud);
CONDREP_DEFINE_ERROR(DegenerateDenominator);

#undef CONDREP_DEFINE_ERROR

} // namespace condrep
