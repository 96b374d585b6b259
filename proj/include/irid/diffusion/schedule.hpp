#pragma once

#include <cstdint>
#include <vector>

#include "irid/core/error.hpp"

namespace irid {

enum class ScheduleVariant : int { ScaledLinear = 0, ZeroTerminalSNR = 1, Shifted = 2 };

// Forward-process noise schedule. alpha_bar is stored in double so the
// terminal-zero and monotonicity guarantees hold exactly; training code
// narrows to float at the point of use.
struct NoiseSchedule {
    int T = 0;
    ScheduleVariant variant = ScheduleVariant::ScaledLinear;
    double shift = 1.0;
    std::vector<double> alpha_bar; // T+1 entries, alpha_bar[0] = 1

    double sqrt_ab(int t) const;   // sqrt(alpha_bar[t])
    double sqrt_1mab(int t) const; // sqrt(1 - alpha_bar[t])
    double snr(int t) const;       // alpha_bar[t] / (1 - alpha_bar[t])
    void check_t(int t) const;     // t in [1, T]
};

// ScaledLinear: beta_t with sqrt(beta) linear from sqrt(0.00085) to
// sqrt(0.012). ZeroTerminalSNR: same betas, then sqrt(alpha_bar) rescaled
// affinely so t=1 is unchanged and alpha_bar[T] = 0 exactly. Shifted: same
// betas, then alpha_bar' = alpha_bar / (alpha_bar + shift^2 (1 - alpha_bar)),
// which divides every SNR by shift^2.
NoiseSchedule make_schedule(ScheduleVariant variant, int T = 1000, double shift = 2.0);

// The schedule the model trains and samples with: scaled-linear betas, then
// the SNR shift, then the terminal rescale (so alpha_bar[T] = 0 holds on top
// of the shift).
NoiseSchedule make_model_schedule(int T = 1000, double shift = 2.0);

// x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eps
std::vector<float> q_sample(const std::vector<float>& x0, const std::vector<float>& eps, int t,
                            const NoiseSchedule& s);

// v = sqrt(ab_t) eps - sqrt(1-ab_t) x0
std::vector<float> v_target(const std::vector<float>& x0, const std::vector<float>& eps, int t,
                            const NoiseSchedule& s);

// x0 = sqrt(ab_t) x_t - sqrt(1-ab_t) v (exact inverse of the pair above)
std::vector<float> recover_x0(const std::vector<float>& xt, const std::vector<float>& v, int t,
                              const NoiseSchedule& s);

} // namespace irid
