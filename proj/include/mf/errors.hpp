#pragma once

#include <stdexcept>
#include <string>

namespace mf {

// Exit-code carrying error categories used by every module and by the CLI.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class ResourceError : public std::runtime_error {
public:
    ResourceError(const std::string& msg, long long partial = -1)
        : std::runtime_error(msg), partial_count(partial) {}
    long long partial_count;
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mf
