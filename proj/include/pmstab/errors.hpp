#pragma once

#include <stdexcept>
#include <string>

namespace pmstab {

// Broad failure classes, used by the CLI to pick an exit code.
enum class ErrorKind {
    config,     // malformed configuration or API misuse
    numerical,  // degenerate inputs, failed factorizations, non-convergence
    infeasible, // a requested target cannot be reached
    io,         // file and data-format problems
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define PMSTAB_DEFINE_ERROR(NAME, KIND)                                                 \
    class NAME : public Error {                                                         \
    public:                                                                             \
        explicit NAME(const std::string& what) : Error(ErrorKind::KIND, #NAME ": " + what) {} \
    }

PMSTAB_DEFINE_ERROR(NotPositiveDefinite, numerical);
PMSTAB_DEFINE_ERROR(NoBracket, numerical);
PMSTAB_DEFINE_ERROR(NoConvergence, numerical);
PMSTAB_DEFINE_ERROR(DomainError, numerical);
PMSTAB_DEFINE_ERROR(EmptyInput, numerical);
PMSTAB_DEFINE_ERROR(DimensionMismatch, numerical);
PMSTAB_DEFINE_ERROR(ZeroVariance, numerical);
PMSTAB_DEFINE_ERROR(DegenerateRisks, numerical);
PMSTAB_DEFINE_ERROR(AllZeroWeights, numerical);
PMSTAB_DEFINE_ERROR(Separation, numerical);
PMSTAB_DEFINE_ERROR(AllSameOutcome, numerical);
PMSTAB_DEFINE_ERROR(TooFewSuccessfulReps, numerical);

PMSTAB_DEFINE_ERROR(DeltaUnreachable, infeasible);
PMSTAB_DEFINE_ERROR(Unachievable, infeasible);
PMSTAB_DEFINE_ERROR(NoThreshold, infeasible);

PMSTAB_DEFINE_ERROR(InvalidTable, config);
PMSTAB_DEFINE_ERROR(ConfigError, config);
PMSTAB_DEFINE_ERROR(UnknownVariable, config);

PMSTAB_DEFINE_ERROR(ParseError, io);
PMSTAB_DEFINE_ERROR(MissingValue, io);
PMSTAB_DEFINE_ERROR(UnknownLevel, io);
PMSTAB_DEFINE_ERROR(StageMissing, io);
PMSTAB_DEFINE_ERROR(IoError, io);

#undef PMSTAB_DEFINE_ERROR

inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::numerical: return 3;
        case ErrorKind::infeasible: return 4;
        case ErrorKind::io: return 5;
    }
    return 1;
}

} // namespace pmstab
