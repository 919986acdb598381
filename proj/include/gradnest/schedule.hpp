#pragma once

#include <cmath>
#include <stdexcept>

namespace gradnest {

// Variance-exploding schedule: sigma(t) = sigma_min * (sigma_max/sigma_min)^t.
struct NoiseSchedule {
    double sigma_min{0.01};
    double sigma_max{1.0};
    double epsilon{1e-3};  // minimal time; keeps the DSM weight bounded away from 0

    double sigma(double t) const {
        if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("sigma: t must lie in [0, 1]");
        return sigma_min * std::pow(sigma_max / sigma_min, t);
    }

    double log_ratio() const { return std::log(sigma_max / sigma_min); }

    // d sigma / dt
    double sigma_dot(double t) const { return sigma(t) * log_ratio(); }

    // d[sigma^2]/dt, the squared diffusion coefficient of the forward SDE
    double g2(double t) const {
        const double s = sigma(t);
        return 2.0 * s * s * log_ratio();
    }
};

}  // namespace gradnest
