#include "convpoint/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace convpoint::kern {

bool avx2_supported() {
#if defined(__x86_64__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const Backend* pick_default() {
#if defined(__x86_64__)
    const char* env = std::getenv("CONVPOINT_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_backend;
    if (avx2_supported()) return &avx2_backend;
#endif
    return &scalar_backend;
}

const Backend* g_active = pick_default();

} // namespace

const Backend& active() { return *g_active; }

bool select(const std::string& name) {
    if (name == "scalar") {
        g_active = &scalar_backend;
        return true;
    }
#if defined(__x86_64__)
    if (name == "avx2" && avx2_supported()) {
        g_active = &avx2_backend;
        return true;
    }
#endif
    return false;
}

} // namespace convpoint::kern
