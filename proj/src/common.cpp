#include "eloc/common.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace eloc {

LogLevel log_level() {
    static const LogLevel level = []() {
        const char* env = std::getenv("ELOC_LOG");
        if (!env) return LogLevel::info;
        const std::string s(env);
        if (s == "quiet" || s == "0") return LogLevel::quiet;
        if (s == "debug" || s == "2") return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

namespace {
std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) {
        std::lock_guard<std::mutex> lock(log_mutex());
        std::cerr << "[eloc] " << msg << "\n";
    }
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) {
        std::lock_guard<std::mutex> lock(log_mutex());
        std::cerr << "[eloc:debug] " << msg << "\n";
    }
}

}  // namespace eloc
