#include "qmap/frmaps.hpp"
#include "qmap/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

namespace qmap::fr {

namespace {

// FFTW plan creation is not thread safe; execution of created plans is.
std::mutex g_fftw_mutex;

struct FftBuffers {
    int h, w;
    fftw_complex* in;
    fftw_complex* out;
    fftw_plan fwd;
    fftw_plan inv;

    FftBuffers(int h_, int w_) : h(h_), w(w_) {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        in = fftw_alloc_complex(static_cast<size_t>(h) * w);
        out = fftw_alloc_complex(static_cast<size_t>(h) * w);
        // FFTW_ESTIMATE keeps the chosen algorithm deterministic per size.
        fwd = fftw_plan_dft_2d(h, w, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
        inv = fftw_plan_dft_2d(h, w, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftBuffers() {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
        fftw_free(in);
        fftw_free(out);
    }
};

double median_of(std::vector<double> v) {
    size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (v[n / 2 - 1] + hi);
}

} // namespace

Plane phase_congruency(const Plane& p, const MapConfig& cfg) {
    const int h = p.height, w = p.width;
    if (h < 8 || w < 8) throw SizeError("phase_congruency needs at least an 8x8 plane");
    const int nscale = cfg.pc_scales;
    const int norient = cfg.pc_orientations;
    const double min_wavelength = 6.0;
    const double mult = 2.0;
    const double sigma_onf = 0.55; // log-Gabor radial bandwidth
    const double dtheta_sigma = M_PI / norient / 1.2;
    const double noise_k = 2.0; // threshold = mean + k * sigma of noise energy
    const double eps = 1e-4;

    const size_t n = static_cast<size_t>(h) * w;

    // Normalized frequency grid (DC at index 0) and polar coordinates.
    std::vector<double> radius(n), theta(n);
    for (int y = 0; y < h; ++y) {
        double fy = (y <= h / 2) ? static_cast<double>(y) / h : static_cast<double>(y - h) / h;
        for (int x = 0; x < w; ++x) {
            double fx = (x <= w / 2) ? static_cast<double>(x) / w : static_cast<double>(x - w) / w;
            size_t i = static_cast<size_t>(y) * w + x;
            radius[i] = std::sqrt(fx * fx + fy * fy);
            theta[i] = std::atan2(-fy, fx);
        }
    }
    radius[0] = 1.0; // avoid log(0); the DC gain is forced to zero below

    FftBuffers fft(h, w);
    for (size_t i = 0; i < n; ++i) {
        fft.in[i][0] = p.data[i];
        fft.in[i][1] = 0.0;
    }
    fftw_execute(fft.fwd);
    std::vector<std::complex<double>> spectrum(n);
    for (size_t i = 0; i < n; ++i) spectrum[i] = {fft.out[i][0], fft.out[i][1]};

    const double log_sigma = std::log(sigma_onf);
    const double denom_radial = 2.0 * log_sigma * log_sigma;
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> pc_num(n, 0.0), pc_den(n, 0.0);
    std::vector<double> sum_re(n), sum_im(n), sum_a(n), amp(n), small_scale_amp(n);

    for (int o = 0; o < norient; ++o) {
        double angle = o * M_PI / norient;
        std::fill(sum_re.begin(), sum_re.end(), 0.0);
        std::fill(sum_im.begin(), sum_im.end(), 0.0);
        std::fill(sum_a.begin(), sum_a.end(), 0.0);

        // Angular spread, shared by all scales of this orientation.
        std::vector<double> spread(n);
#pragma omp parallel for schedule(static)
        for (long i = 0; i < static_cast<long>(n); ++i) {
            double d = std::atan2(std::sin(theta[i] - angle), std::cos(theta[i] - angle));
            spread[i] = std::exp(-(d * d) / (2.0 * dtheta_sigma * dtheta_sigma));
        }

        for (int s = 0; s < nscale; ++s) {
            double wavelength = min_wavelength * std::pow(mult, s);
            double f0 = 1.0 / wavelength;
            for (size_t i = 0; i < n; ++i) {
                double lg = std::exp(-std::pow(std::log(radius[i] / f0), 2.0) / denom_radial);
                double g = lg * spread[i];
                fft.in[i][0] = spectrum[i].real() * g;
                fft.in[i][1] = spectrum[i].imag() * g;
            }
            fft.in[0][0] = 0.0; // kill DC
            fft.in[0][1] = 0.0;
            fftw_execute(fft.inv);
#pragma omp parallel for schedule(static)
            for (long i = 0; i < static_cast<long>(n); ++i) {
                double re = fft.out[i][0] * inv_n;
                double im = fft.out[i][1] * inv_n;
                sum_re[i] += re;
                sum_im[i] += im;
                amp[i] = std::sqrt(re * re + im * im);
                sum_a[i] += amp[i];
            }
            if (s == 0) small_scale_amp = amp;
        }

        // Rayleigh noise model estimated from the smallest-scale response.
        double tau = median_of(small_scale_amp) / std::sqrt(std::log(4.0));
        double total_tau = tau * (1.0 - std::pow(1.0 / mult, nscale)) / (1.0 - 1.0 / mult);
        double noise_mean = total_tau * std::sqrt(M_PI / 2.0);
        double noise_sigma = total_tau * std::sqrt((4.0 - M_PI) / 2.0);
        double threshold = noise_mean + noise_k * noise_sigma;

#pragma omp parallel for schedule(static)
        for (long i = 0; i < static_cast<long>(n); ++i) {
            double energy = std::sqrt(sum_re[i] * sum_re[i] + sum_im[i] * sum_im[i]);
            pc_num[i] += std::max(energy - threshold, 0.0);
            pc_den[i] += sum_a[i];
        }
    }

    Plane out(h, w);
    for (size_t i = 0; i < n; ++i)
        out.data[i] = std::clamp(pc_num[i] / (pc_den[i] + eps), 0.0, 1.0);
    return out;
}

} // namespace qmap::fr
