#include "medusa/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace medusa::kernels {
namespace {

const KernelTable* g_active = nullptr;

const KernelTable* pick_default() {
    if (const char* env = std::getenv("MEDUSA_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_table();
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return avx2_table();
    }
    if (avx2_available()) return avx2_table();
    return &scalar_table();
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__)
    return avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable& active() {
    if (!g_active) g_active = pick_default();
    return *g_active;
}

bool select(Backend b) {
    switch (b) {
        case Backend::Scalar:
            g_active = &scalar_table();
            return true;
        case Backend::Avx2:
            if (!avx2_available()) return false;
            g_active = avx2_table();
            return true;
    }
    return false;
}

}  // namespace medusa::kernels
