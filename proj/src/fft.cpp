#include "qkr/fft.hpp"

#include <map>
#include <mutex>
#include <utility>

namespace qkr::fft {
namespace {

// FFTW's planner is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

Plan::Plan(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    CVector scratch(rows * cols);
    std::lock_guard lock(planner_mutex());
    const int r = static_cast<int>(rows);
    const int c = static_cast<int>(cols);
    if (rows == 1) {
        fwd_ = fftw_plan_dft_1d(c, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_FORWARD,
                                FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(c, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_BACKWARD,
                                FFTW_ESTIMATE);
    } else {
        fwd_ = fftw_plan_dft_2d(r, c, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_FORWARD,
                                FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(r, c, as_fftw(scratch.data()), as_fftw(scratch.data()),
                                FFTW_BACKWARD, FFTW_ESTIMATE);
    }
}

Plan::~Plan() {
    std::lock_guard lock(planner_mutex());
    if (fwd_) fftw_destroy_plan(fwd_);
    if (bwd_) fftw_destroy_plan(bwd_);
}

void Plan::forward(cplx* data) const { fftw_execute_dft(fwd_, as_fftw(data), as_fftw(data)); }

void Plan::backward(cplx* data) const { fftw_execute_dft(bwd_, as_fftw(data), as_fftw(data)); }

std::shared_ptr<const Plan> plan(std::size_t rows, std::size_t cols) {
    static std::mutex cache_mutex;
    static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const Plan>> cache;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[{rows, cols}];
    if (!slot) slot = std::make_shared<const Plan>(rows, cols);
    return slot;
}

}  // namespace qkr::fft
