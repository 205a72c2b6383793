#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <new>
#include <vector>

#include <fftw3.h>

namespace qkr {

using cplx = std::complex<double>;

// Allocator backed by fftw_malloc so every buffer shares the SIMD alignment
// the cached plans were created with.
template <class T>
struct FftwAllocator {
    using value_type = T;

    FftwAllocator() noexcept = default;
    template <class U>
    FftwAllocator(const FftwAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        void* p = fftw_malloc(n * sizeof(T));
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

    template <class U>
    bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using CVector = std::vector<cplx, FftwAllocator<cplx>>;

namespace fft {

// Unnormalized in-place complex transforms of a fixed shape. Plans are
// created once (FFTW_ESTIMATE, deterministic) and may be executed from any
// thread on any FftwAllocator-backed buffer of the right size.
class Plan {
public:
    Plan(std::size_t rows, std::size_t cols);
    ~Plan();
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_ * cols_; }

    // sum_j a_j exp(-2 pi i jk/n)
    void forward(cplx* data) const;
    // sum_k a_k exp(+2 pi i jk/n)
    void backward(cplx* data) const;

private:
    std::size_t rows_;
    std::size_t cols_;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

// Shared plan for a 1D (rows == 1) or 2D row-major shape.
std::shared_ptr<const Plan> plan(std::size_t rows, std::size_t cols);
inline std::shared_ptr<const Plan> plan(std::size_t n) { return plan(1, n); }

}  // namespace fft
}  // namespace qkr
