#pragma once

#include <string>

namespace amplasso {

/// Diagnostics go to stderr so stdout stays machine-readable.
void log_warning(const std::string& message);
void log_info(const std::string& message);

/// Silences log_info (warnings are always printed unless quiet is set).
void set_verbose(bool on);
void set_quiet(bool on);

}  // namespace amplasso
