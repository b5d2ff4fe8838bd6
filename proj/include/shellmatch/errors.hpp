#ifndef SHELLMATCH_ERRORS_HPP
#define SHELLMATCH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shellmatch {

struct NotSPD : std::runtime_error {
    explicit NotSPD(const std::string& what) : std::runtime_error(what) {}
};

struct NotUnit : std::runtime_error {
    explicit NotUnit(const std::string& what) : std::runtime_error(what) {}
};

struct NonpositiveDeterminant : std::runtime_error {
    explicit NonpositiveDeterminant(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct OpenManifold : std::runtime_error {
    explicit OpenManifold(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfDomain : std::runtime_error {
    explicit OutOfDomain(const std::string& what) : std::runtime_error(what) {}
};

struct OutsideEvaluable : std::runtime_error {
    explicit OutsideEvaluable(const std::string& what) : std::runtime_error(what) {}
};

struct GridMismatch : std::runtime_error {
    explicit GridMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct SolverStall : std::runtime_error {
    explicit SolverStall(const std::string& what) : std::runtime_error(what) {}
};

struct LineSearchFailed : std::runtime_error {
    explicit LineSearchFailed(const std::string& what) : std::runtime_error(what) {}
};

struct IOError : std::runtime_error {
    explicit IOError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace shellmatch

#endif
