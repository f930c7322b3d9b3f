#pragma once

#include <stdexcept>
#include <string>

namespace rdr {

/// Caller passed something outside an operation's domain.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation produced a value that floating-point noise cannot explain,
/// or a factorization broke down.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rdr
