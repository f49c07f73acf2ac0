#include "lbmhe/logging.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>

#include "lbmhe/errors.hpp"

#ifndef LBMHE_GIT_DESCRIBE
#define LBMHE_GIT_DESCRIBE "unknown"
#endif

namespace lbmhe {

void set_log_level(const std::string& level) {
  const auto parsed = spdlog::level::from_str(level);
  // from_str maps unknown names to "off"
  if (parsed == spdlog::level::off && level != "off") {
    throw ConfigError("unknown log level '" + level + "'");
  }
  spdlog::set_level(parsed);
}

void init_logging_from_env() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("MHE_LEARN_LOG"); env != nullptr && *env != '\0') {
    set_log_level(env);
  }
}

const char* build_version() { return LBMHE_GIT_DESCRIBE; }

}  // namespace lbmhe
