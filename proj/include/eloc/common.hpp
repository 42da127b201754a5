#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace eloc {

// Error taxonomy. The CLI maps config/dimension/data errors to exit code 2
// (usage or bad input) and numeric errors to exit code 3 (runtime failure).
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class dimension_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

class data_error : public error {
public:
    using error::error;
};

class numeric_error : public error {
public:
    using error::error;
};

// Log verbosity, read once from the ELOC_LOG environment variable
// (quiet|info|debug; default info).
enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace eloc
