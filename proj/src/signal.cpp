#include "tdslab/signal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdslab {

SwitchingSignal::SwitchingSignal(int initial, std::vector<real> switches, real t_start, real t_end)
    : initial_(initial), switches_(std::move(switches)), t_start_(t_start), t_end_(t_end) {
    if (initial != 0 && initial != 1) throw std::invalid_argument("SwitchingSignal: initial level must be 0 or 1");
    if (!std::isfinite(t_start) || !(t_end > t_start))
        throw std::invalid_argument("SwitchingSignal: need finite t_start < t_end");
    real prev = t_start;
    for (real s : switches_) {
        if (!std::isfinite(s) || !(s > prev) || !(s < t_end))
            throw std::invalid_argument("SwitchingSignal: switch times must increase strictly inside the domain");
        prev = s;
    }
}

int SwitchingSignal::level(real t, Side side) const {
    if (!(t >= t_start_ && t <= t_end_))
        throw std::domain_error("SwitchingSignal: t = " + format_real(t) + " outside domain");
    const auto it = side == Side::after ? std::upper_bound(switches_.begin(), switches_.end(), t)
                                        : std::lower_bound(switches_.begin(), switches_.end(), t);
    const auto n = it - switches_.begin();
    return (n % 2 == 0) ? initial_ : 1 - initial_;
}

real SwitchingSignal::value(real t, Side side) const { return static_cast<real>(level(t, side)); }

std::vector<real> SwitchingSignal::breakpoints(real a, real b) const {
    if (a > b) std::swap(a, b);
    std::vector<real> out;
    for (real s : switches_)
        if (s > a && s < b) out.push_back(s);
    return out;
}

SwitchingSignal SwitchingSignal::time_scaled(real c) const {
    if (!(c > 0)) throw std::invalid_argument("SwitchingSignal::time_scaled: c must be positive");
    std::vector<real> sw;
    sw.reserve(switches_.size());
    for (real s : switches_) sw.push_back(s / c);
    return SwitchingSignal(initial_, std::move(sw), t_start_ / c, t_end_ / c);
}

SwitchingSignal SwitchingSignal::extended_left(real t_new_start, int v) const {
    if (!(t_new_start < t_start_)) throw std::invalid_argument("SwitchingSignal::extended_left: must move left");
    std::vector<real> sw;
    if (v != initial_) sw.push_back(t_start_);
    sw.insert(sw.end(), switches_.begin(), switches_.end());
    return SwitchingSignal(v, std::move(sw), t_new_start, t_end_);
}

real SwitchingSignal::min_dwell(real a, real b) const {
    real prev = a, best = b - a;
    for (real s : switches_) {
        if (s <= a) continue;
        if (s >= b) break;
        best = std::min(best, s - prev);
        prev = s;
    }
    return std::min(best, b - prev);
}

std::vector<real> PiecewiseLinearSignal::breakpoints(real a, real b) const {
    if (a > b) std::swap(a, b);
    std::vector<real> out;
    for (real t : f_.breakpoints())
        if (t > a && t < b) out.push_back(t);
    return out;
}

}  // namespace tdslab
