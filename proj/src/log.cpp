#include "amplasso/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace amplasso {

namespace {
std::atomic<bool> g_verbose{false};
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void log_warning(const std::string& message)
{
    if (g_quiet)
        return;
    std::lock_guard lock(g_mutex);
    std::cerr << "warning: " << message << '\n';
}

void log_info(const std::string& message)
{
    if (!g_verbose || g_quiet)
        return;
    std::lock_guard lock(g_mutex);
    std::cerr << message << '\n';
}

void set_verbose(bool on) { g_verbose = on; }
void set_quiet(bool on) { g_quiet = on; }

}  // namespace amplasso
