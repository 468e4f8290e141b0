#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace labelsift {

/// Base class for every recoverable failure raised by the library.
/// Precondition violations on in-memory arguments throw std::invalid_argument.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : Error(path.string() + ": " + what), path_(path) {}

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Malformed LTRJ/LLBL/CSV input. kind() distinguishes the failure so callers
/// can react to, e.g., a truncated file differently from a foreign one.
class FormatError : public Error {
public:
    enum class Kind { BadMagic, UnsupportedVersion, TruncatedPayload, Malformed };

    FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// A method was asked to run on inputs that cannot support it
/// (SWA on an imported trajectory, unknown method id, ...).
class UnsupportedMethod : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(int epoch)
        : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)), epoch_(epoch) {}

    [[nodiscard]] int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// FNR is undefined when the noise mask has no positive entry.
class UndefinedFnr : public Error {
public:
    UndefinedFnr() : Error("FNR undefined: noise mask contains no noisy sample") {}
};

}  // namespace labelsift
