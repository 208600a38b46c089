#include "fat/features.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace fat {

namespace {

// Planner calls are not thread-safe in FFTW; execution on distinct arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
   public:
    explicit RealFft(std::int64_t n) : n_(n) {
        in_.reset(fftw_alloc_real(static_cast<std::size_t>(n)));
        out_.reset(fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1)));
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
        if (plan_ == nullptr) throw std::runtime_error("fftw planning failed");
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* input() { return in_.get(); }
    void execute() { fftw_execute(plan_); }
    double power(std::int64_t k) const {
        const auto& c = out_.get()[k];
        return c[0] * c[0] + c[1] * c[1];
    }

   private:
    std::int64_t n_;
    std::unique_ptr<double, FftwFree> in_;
    std::unique_ptr<fftw_complex, FftwFree> out_;
    fftw_plan plan_ = nullptr;
};

std::array<double, 5> band_variances_with(RealFft& fft, std::span<const double> window, double sample_rate) {
    const auto n = static_cast<std::int64_t>(window.size());
    double mean = 0.0;
    for (double v : window) mean += v;
    mean /= static_cast<double>(n);
    double wsum2 = 0.0;
    for (std::int64_t t = 0; t < n; ++t) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n));
        fft.input()[t] = (window[t] - mean) * w;
        wsum2 += w * w;
    }
    fft.execute();
    std::array<double, 5> out{};
    const double df = sample_rate / static_cast<double>(n);
    for (std::int64_t k = 1; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) * df;
        // one-sided: double every bin except Nyquist
        const double factor = (2 * k == n) ? 1.0 : 2.0;
        const double p = factor * fft.power(k) / (static_cast<double>(n) * wsum2);
        for (std::size_t b = 0; b < kBandEdges.size(); ++b) {
            if (f >= kBandEdges[b].lo && f < kBandEdges[b].hi) out[b] += p;
        }
    }
    return out;
}

}  // namespace

double differential_entropy(double variance) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * std::max(variance, kVarianceFloor));
}

std::array<double, 5> band_variances(std::span<const double> window, double sample_rate) {
    if (window.size() < 2) throw std::invalid_argument("window needs at least two samples");
    RealFft fft(static_cast<std::int64_t>(window.size()));
    return band_variances_with(fft, window, sample_rate);
}

std::vector<double> compute_de(std::span<const double> signal, std::int64_t channels, double sample_rate,
                               double window_seconds) {
    if (channels < 1 || signal.size() % static_cast<std::size_t>(channels) != 0) {
        throw std::invalid_argument("signal length is not a multiple of the channel count");
    }
    if (sample_rate <= 2.0 * kBandEdges.back().hi) {
        throw std::invalid_argument("sample_rate must exceed twice the top band edge (100 Hz)");
    }
    const auto len = static_cast<std::int64_t>(std::llround(window_seconds * sample_rate));
    const auto total = static_cast<std::int64_t>(signal.size()) / channels;
    if (len < 2 || total < len) throw std::invalid_argument("signal shorter than one window");
    const auto n_windows = total / len;

    RealFft fft(len);
    std::vector<double> out(static_cast<std::size_t>(n_windows * channels * 5));
    for (std::int64_t w = 0; w < n_windows; ++w) {
        for (std::int64_t c = 0; c < channels; ++c) {
            const auto bands = band_variances_with(fft, signal.subspan(c * total + w * len, len), sample_rate);
            for (int b = 0; b < 5; ++b) out[(w * channels + c) * 5 + b] = differential_entropy(bands[b]);
        }
    }
    return out;
}

}  // namespace fat
