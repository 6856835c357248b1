#pragma once

#include <stdexcept>
#include <string>

namespace perfguard {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File and schema problems (usage/config class, CLI exit code 2).
class ParseError : public Error {
public:
    using Error::Error;
};
class SchemaMismatch : public Error {
public:
    using Error::Error;
};
class InvalidSpec : public Error {
public:
    using Error::Error;
};
class WeightSumViolation : public Error {
public:
    using Error::Error;
};

// Contract violations between in-process values.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};
class ArityMismatch : public Error {
public:
    using Error::Error;
};
class RankingMismatch : public Error {
public:
    using Error::Error;
};
class ShapeMismatch : public Error {
public:
    using Error::Error;
};
class UnknownTool : public Error {
public:
    using Error::Error;
};
class UnknownPeer : public Error {
public:
    using Error::Error;
};
class DuplicateTool : public Error {
public:
    using Error::Error;
};
class CandidateNotInSet : public Error {
public:
    using Error::Error;
};

// Runtime environment failures (CLI exit code 3).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace perfguard
