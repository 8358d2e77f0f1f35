#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

namespace superlse {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

namespace fft {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace detail {

// Plans are created once per (size, direction) and shared between threads.
// Planning is serialised; execution through fftw_execute_dft is thread safe.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_pair(n, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        auto* buf = fftw_alloc_complex(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        plans_.emplace(key, p);
        return p;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& kv : plans_) fftw_destroy_plan(kv.second);
    }
    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline void execute(std::span<cplx> data, int sign) {
    if (data.size() <= 1) return;
    fftw_plan p = PlanCache::instance().get(data.size(), sign);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p, ptr, ptr);
}

}  // namespace detail

// X_k = sum_n x_n exp(-2 pi i k n / L), in place.
inline void forward(std::span<cplx> data) { detail::execute(data, FFTW_FORWARD); }

// x_n = sum_k X_k exp(+2 pi i k n / L), in place and unnormalised.
inline void backward(std::span<cplx> data) { detail::execute(data, FFTW_BACKWARD); }

inline CVector padded(std::span<const cplx> x, std::size_t len) {
    CVector out(len, cplx(0.0));
    std::copy(x.begin(), x.begin() + std::min(len, x.size()), out.begin());
    return out;
}

// Linear convolution of a and b truncated to the first out_len coefficients.
inline CVector convolve(std::span<const cplx> a, std::span<const cplx> b, std::size_t out_len) {
    CVector out(out_len, cplx(0.0));
    if (a.empty() || b.empty() || out_len == 0) return out;
    const std::size_t full = a.size() + b.size() - 1;
    const std::size_t keep = std::min(out_len, full);
    if (a.size() * b.size() <= 4096 || std::min(a.size(), b.size()) <= 16) {
        for (std::size_t i = 0; i < a.size() && i < keep; ++i)
            for (std::size_t j = 0; j < b.size() && i + j < keep; ++j) out[i + j] += a[i] * b[j];
        return out;
    }
    const std::size_t len = next_pow2(full);
    CVector fa = padded(a, len), fb = padded(b, len);
    forward(fa);
    forward(fb);
    for (std::size_t i = 0; i < len; ++i) fa[i] *= fb[i];
    backward(fa);
    const double scale = 1.0 / static_cast<double>(len);
    for (std::size_t i = 0; i < keep; ++i) out[i] = fa[i] * scale;
    return out;
}

}  // namespace fft
}  // namespace superlse
