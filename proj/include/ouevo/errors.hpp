#pragma once

#include <stdexcept>
#include <string>

namespace ouevo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define OUEVO_DEFINE_ERROR(Name)                                                   \
    class Name : public Error {                                                    \
    public:                                                                        \
        explicit Name(const std::string& what) : Error(std::string(#Name ": ") + what) {} \
    }

OUEVO_DEFINE_ERROR(DomainError);
OUEVO_DEFINE_ERROR(NonSymmetricQ);
OUEVO_DEFINE_ERROR(StepFailure);
OUEVO_DEFINE_ERROR(InsufficientSamples);
OUEVO_DEFINE_ERROR(SingularCovariance);
OUEVO_DEFINE_ERROR(QuadratureOverflow);
OUEVO_DEFINE_ERROR(OddMomentUnsupported);
OUEVO_DEFINE_ERROR(EvaluationFailure);
OUEVO_DEFINE_ERROR(MissingDerivatives);
OUEVO_DEFINE_ERROR(SingularityBudgetExceeded);
OUEVO_DEFINE_ERROR(InconclusiveFit);
OUEVO_DEFINE_ERROR(NoExpandingDirection);
OUEVO_DEFINE_ERROR(PreconditionError);
OUEVO_DEFINE_ERROR(ConfigError);

#undef OUEVO_DEFINE_ERROR

}  // namespace ouevo
