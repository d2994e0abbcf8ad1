#pragma once

#include <stdexcept>
#include <string>

namespace qmap {

// Base class for all library failures so callers can catch one type at the
// CLI boundary and turn it into a nonzero exit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

class SizeError : public Error {
public:
    explicit SizeError(const std::string& msg) : Error("size error: " + msg) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error("format error: " + msg) {}
};

class DecodeError : public Error {
public:
    explicit DecodeError(const std::string& msg) : Error("decode error: " + msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("i/o error: " + msg) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("domain error: " + msg) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error("numeric error: " + msg) {}
};

class StateError : public Error {
public:
    explicit StateError(const std::string& msg) : Error("state error: " + msg) {}
};

class LoadError : public Error {
public:
    explicit LoadError(const std::string& msg) : Error("load error: " + msg) {}
};

class FitError : public Error {
public:
    explicit FitError(const std::string& msg) : Error("fit error: " + msg) {}
};

} // namespace qmap
