#pragma once

#include <string>

namespace lbmhe {

/// Sets the library log level from MHE_LEARN_LOG (trace, debug, info, warn,
/// error, off). Unset leaves the default (warn).
void init_logging_from_env();

void set_log_level(const std::string& level);

/// `git describe` of the source tree this library was built from.
const char* build_version();

}  // namespace lbmhe
