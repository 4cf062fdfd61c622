#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace leqmod {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
    ExitCode exit_code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Shape or extent disagreement between arrays, grids and volumes.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension error: " + what, ExitCode::data) {}
};

class CoverageError : public Error {
public:
    explicit CoverageError(const std::string& what) : Error("coverage error: " + what, ExitCode::data) {}
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error("format error at byte " + std::to_string(offset) + ": " + what, ExitCode::data), offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain error: " + what, ExitCode::data) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("I/O error: " + what, ExitCode::data) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("configuration error: " + what, ExitCode::usage) {}
};

class GenerationError : public Error {
public:
    explicit GenerationError(const std::string& what) : Error("generation error: " + what, ExitCode::data) {}
};

class EvaluationError : public Error {
public:
    explicit EvaluationError(const std::string& what) : Error("evaluation error: " + what, ExitCode::data) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error("training error: " + what, ExitCode::numeric) {}
};

} // namespace leqmod
