#pragma once

#include <string>

namespace chirpsound {

enum class PulseKind { raised_cosine };

std::string to_string(PulseKind kind);
PulseKind pulse_kind_from_string(const std::string& name);

// Truncated raised-cosine pulse on [-M T, M T] with T = 1.
//
//   g(t) = sinc(t) cos(pi beta t) / (1 - (2 beta t)^2)
//
// The taper is evaluated in a form without the removable singularity at
// |t| = 1/(2 beta), so g and g' are accurate everywhere in the support.
class PulseShape {
public:
    PulseShape(PulseKind kind, double rolloff, int half_support);

    PulseKind kind() const { return kind_; }
    double rolloff() const { return rolloff_; }
    int half_support() const { return half_support_; }

    double operator()(double t) const { return evaluate(t); }
    double evaluate(double t) const;
    double derivative(double t) const;

private:
    PulseKind kind_;
    double rolloff_;
    int half_support_;
};

// Throws ValidationError for rolloff outside [0, 1] or M < 1.
PulseShape build_pulse(PulseKind kind, double rolloff, int half_support);

}  // namespace chirpsound
