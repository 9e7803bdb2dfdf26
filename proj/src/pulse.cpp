#include "chirpsound/pulse.hpp"

#include <cmath>
#include <numbers>

#include "chirpsound/error.hpp"

namespace chirpsound {

namespace {

constexpr double pi = std::numbers::pi;

// Normalized sinc, sin(pi x) / (pi x).
double sinc(double x)
{
    if (x == 0.0) {
        return 1.0;
    }
    const double a = pi * x;
    return std::sin(a) / a;
}

double sinc_derivative(double x)
{
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return -pi * pi * x / 3.0 * (1.0 - pi * pi * x2 / 10.0);
    }
    return (std::cos(pi * x) - sinc(x)) / x;
}

// cos(pi a / 2) / (1 - a^2) with a = 2 beta |t|, rewritten through
// cos(pi a / 2) = sin(pi (1 - a) / 2) as (pi/2) sinc((1 - a)/2) / (1 + a).
double taper(double a)
{
    return 0.5 * pi * sinc(0.5 * (1.0 - a)) / (1.0 + a);
}

double taper_derivative(double a)
{
    const double v = 0.5 * (1.0 - a);
    const double denom = 1.0 + a;
    return 0.5 * pi * (-0.5 * sinc_derivative(v) / denom - sinc(v) / (denom * denom));
}

}  // namespace

std::string to_string(PulseKind kind)
{
    switch (kind) {
        case PulseKind::raised_cosine: return "raised-cosine";
    }
    return "unknown";
}

PulseKind pulse_kind_from_string(const std::string& name)
{
    if (name == "raised-cosine") {
        return PulseKind::raised_cosine;
    }
    throw ValidationError("unknown pulse kind '" + name + "'");
}

PulseShape::PulseShape(PulseKind kind, double rolloff, int half_support)
    : kind_(kind), rolloff_(rolloff), half_support_(half_support)
{
    if (!(rolloff >= 0.0 && rolloff <= 1.0)) {
        throw ValidationError("raised-cosine rolloff must lie in [0, 1], got " + std::to_string(rolloff));
    }
    if (half_support < 1) {
        throw ValidationError("pulse half-support M must be at least 1, got " + std::to_string(half_support));
    }
}

double PulseShape::evaluate(double t) const
{
    if (std::abs(t) > half_support_) {
        return 0.0;
    }
    return sinc(t) * taper(2.0 * rolloff_ * std::abs(t));
}

double PulseShape::derivative(double t) const
{
    // The window edge is a jump discontinuity when M T is not a zero of g;
    // here it always is (integer M), so g is continuous and g' is one-sided there.
    if (std::abs(t) > half_support_) {
        return 0.0;
    }
    const double a = 2.0 * rolloff_ * std::abs(t);
    const double sign = t < 0.0 ? -1.0 : 1.0;
    const double dtaper = taper_derivative(a) * 2.0 * rolloff_ * sign;
    return sinc_derivative(t) * taper(a) + sinc(t) * dtaper;
}

PulseShape build_pulse(PulseKind kind, double rolloff, int half_support)
{
    return PulseShape(kind, rolloff, half_support);
}

}  // namespace chirpsound
