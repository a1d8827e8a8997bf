#include "injector/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace injector::kernels {

const KernelSet* avx2_impl();  // defined in kernels_avx2.cpp

const KernelSet* avx2() {
#if defined(__x86_64__) || defined(__i386__)
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
    return avx2_impl();
#else
    return nullptr;
#endif
}

const KernelSet& active() {
    static const KernelSet* chosen = [] {
        const char* req = std::getenv("INJECTOR_KERNELS");
        if (req != nullptr && std::strcmp(req, "scalar") == 0) return &scalar();
        const KernelSet* simd = avx2();
        if (req != nullptr && std::strcmp(req, "avx2") == 0 && simd == nullptr) return &scalar();
        return simd != nullptr ? simd : &scalar();
    }();
    return *chosen;
}

}  // namespace injector::kernels
