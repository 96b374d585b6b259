#include "irid/diffusion/schedule.hpp"

#include <cmath>

namespace irid {

double NoiseSchedule::sqrt_ab(int t) const {
    check_t(t);
    return std::sqrt(alpha_bar[t]);
}

double NoiseSchedule::sqrt_1mab(int t) const {
    check_t(t);
    return std::sqrt(1.0 - alpha_bar[t]);
}

double NoiseSchedule::snr(int t) const {
    check_t(t);
    return alpha_bar[t] / (1.0 - alpha_bar[t]);
}

void NoiseSchedule::check_t(int t) const {
    require(t >= 1 && t <= T, "schedule: t = " + std::to_string(t) + " outside [1, " +
                                  std::to_string(T) + "]");
}

namespace {

std::vector<double> scaled_linear_alpha_bar(int T) {
    const double lo = std::sqrt(0.00085), hi = std::sqrt(0.012);
    std::vector<double> ab(T + 1);
    ab[0] = 1.0;
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        double sb = lo + (hi - lo) * double(t - 1) / double(T - 1);
        prod *= 1.0 - sb * sb;
        ab[t] = prod;
    }
    return ab;
}

void apply_shift(std::vector<double>& ab, double s) {
    const double s2 = s * s;
    for (double& a : ab) a = a / (a + s2 * (1.0 - a));
}

// affine rescale of sqrt(alpha_bar) over t >= 1: t=1 fixed, t=T sent to zero
void apply_terminal_rescale(std::vector<double>& ab) {
    const int T = static_cast<int>(ab.size()) - 1;
    const double s1 = std::sqrt(ab[1]), sT = std::sqrt(ab[T]);
    const double scale = s1 / (s1 - sT);
    for (int t = 1; t <= T; ++t) {
        double s = (std::sqrt(ab[t]) - sT) * scale;
        ab[t] = s * s;
    }
}

} // namespace

NoiseSchedule make_schedule(ScheduleVariant variant, int T, double shift) {
    require(T >= 2, "schedule: T must be >= 2");
    NoiseSchedule s;
    s.T = T;
    s.variant = variant;
    s.alpha_bar = scaled_linear_alpha_bar(T);
    switch (variant) {
        case ScheduleVariant::ScaledLinear: s.shift = 1.0; break;
        case ScheduleVariant::ZeroTerminalSNR:
            s.shift = 1.0;
            apply_terminal_rescale(s.alpha_bar);
            break;
        case ScheduleVariant::Shifted:
            require(shift > 0.0, "schedule: shift must be positive");
            s.shift = shift;
            apply_shift(s.alpha_bar, shift);
            break;
    }
    return s;
}

NoiseSchedule make_model_schedule(int T, double shift) {
    NoiseSchedule s = make_schedule(ScheduleVariant::Shifted, T, shift);
    apply_terminal_rescale(s.alpha_bar);
    return s;
}

namespace {

std::vector<float> axpby(const std::vector<float>& x, const std::vector<float>& y, double a,
                         double b, const char* op) {
    require(x.size() == y.size(), std::string(op) + ": size mismatch");
    std::vector<float> out(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = static_cast<float>(a * x[i] + b * y[i]);
    return out;
}

} // namespace

std::vector<float> q_sample(const std::vector<float>& x0, const std::vector<float>& eps, int t,
                            const NoiseSchedule& s) {
    return axpby(x0, eps, s.sqrt_ab(t), s.sqrt_1mab(t), "q_sample");
}

std::vector<float> v_target(const std::vector<float>& x0, const std::vector<float>& eps, int t,
                            const NoiseSchedule& s) {
    return axpby(eps, x0, s.sqrt_ab(t), -s.sqrt_1mab(t), "v_target");
}

std::vector<float> recover_x0(const std::vector<float>& xt, const std::vector<float>& v, int t,
                              const NoiseSchedule& s) {
    return axpby(xt, v, s.sqrt_ab(t), -s.sqrt_1mab(t), "recover_x0");
}

} // namespace irid
