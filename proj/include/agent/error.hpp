#pragma once

#include <stdexcept>
#include <string>

namespace agent {

/// Process exit codes shared by every CLI entry point.
enum class ExitCode : int {
    Success = 0,
    Failure = 1,
    Validation = 2,
    MissingDependency = 3,
    DataIntegrity = 4,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad configuration or a violated precondition on caller-supplied values.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ExitCode::Validation, what) {}
};

/// A pipeline stage was invoked before the stage that produces its inputs.
class DependencyError : public Error {
public:
    explicit DependencyError(const std::string& what) : Error(ExitCode::MissingDependency, what) {}
};

/// Input data is malformed or internally inconsistent.
class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& what) : Error(ExitCode::DataIntegrity, what) {}
};

/// JSON schema violation; the message names the offending JSON path.
class ParseError : public IntegrityError {
public:
    ParseError(const std::string& json_path, const std::string& what)
        : IntegrityError("parse error at " + json_path + ": " + what), path_(json_path) {}
    const std::string& json_path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace agent
