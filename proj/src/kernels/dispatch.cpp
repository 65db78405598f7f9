#include <atomic>
#include <cstdlib>
#include <string_view>

#include "gridcascade/kernels.hpp"
#include "kernels_impl.hpp"

namespace gridcascade::kernels {

namespace {

const KernelTable kScalar{"scalar", detail::dot_scalar, detail::axpy_scalar, detail::gemv_scalar,
                          detail::gemv_t_scalar};

#if defined(GRIDCASCADE_HAVE_AVX2)
const KernelTable kAvx2{"avx2", detail::dot_avx2, detail::axpy_avx2, detail::gemv_avx2,
                        detail::gemv_t_avx2};

bool cpu_has_avx2() {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* initial_table() {
    const char* env = std::getenv("GRIDCASCADE_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &kScalar;
    if (const KernelTable* t = avx2_table()) return t;
    return &kScalar;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(GRIDCASCADE_HAVE_AVX2)
    static const bool ok = cpu_has_avx2();
    return ok ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
    if (name == "scalar") {
        current().store(&kScalar);
        return true;
    }
    if (name == "avx2") {
        if (const KernelTable* t = avx2_table()) {
            current().store(t);
            return true;
        }
    }
    return false;
}

}  // namespace gridcascade::kernels
