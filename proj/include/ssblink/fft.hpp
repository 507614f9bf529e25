#pragma once

// Thin FFTW wrapper. Plans are created once per (size, direction) with
// FFTW_ESTIMATE and cached; execution goes through the new-array interface
// on fftw_malloc'd scratch buffers, so results are bit-identical across
// runs and threads.

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ssblink::fft {

using cplx = std::complex<double>;

namespace detail {

struct FftwBuffer {
    fftw_complex* data{nullptr};
    std::size_t n{0};
    explicit FftwBuffer(std::size_t size)
        : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size))), n(size) {
        if (data == nullptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        FftwBuffer in(n), out(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in.data, out.data, sign, FFTW_ESTIMATE);
        if (p == nullptr) throw std::runtime_error("fftw plan creation failed");
        plans_.emplace(key, p);
        return p;
    }

    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline std::vector<cplx> transform(std::span<const cplx> x, int sign) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    fftw_plan plan = PlanCache::instance().get(n, sign);
    FftwBuffer in(n), out(n);
    std::memcpy(in.data, x.data(), sizeof(fftw_complex) * n);
    fftw_execute_dft(plan, in.data, out.data);
    std::vector<cplx> y(n);
    std::memcpy(static_cast<void*>(y.data()), out.data, sizeof(fftw_complex) * n);
    return y;
}

}  // namespace detail

/// Unnormalized forward DFT: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
inline std::vector<cplx> forward(std::span<const cplx> x) { return detail::transform(x, FFTW_FORWARD); }

/// Inverse DFT including the 1/N factor.
inline std::vector<cplx> inverse(std::span<const cplx> x) {
    auto y = detail::transform(x, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(y.size());
    for (auto& v : y) v *= scale;
    return y;
}

inline std::vector<cplx> forward_real(std::span<const double> x) {
    std::vector<cplx> c(x.begin(), x.end());
    return forward(c);
}

/// Frequency of DFT bin k for a record of n samples at rate fs, in (-fs/2, fs/2].
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
    const auto kk = static_cast<double>(k);
    const auto nn = static_cast<double>(n);
    return (2 * k <= n ? kk : kk - nn) * fs / nn;
}

/// Applies a frequency response H(f) to x by a single full-record DFT.
/// The response is evaluated at the signed bin frequencies.
template <typename Response>
std::vector<cplx> filter_frequency_domain(std::span<const cplx> x, double fs, Response&& response) {
    auto spec = forward(x);
    const std::size_t n = spec.size();
    for (std::size_t k = 0; k < n; ++k) spec[k] *= response(bin_frequency(k, n, fs));
    return inverse(spec);
}

}  // namespace ssblink::fft
