#pragma once

#include <stdexcept>
#include <string>

namespace cocycle {

// Rejected argument or configuration value: bad dimensions, malformed
// config keys, out-of-range parameters, incompatible field kinds.
class invalid_input : public std::invalid_argument {
public:
    explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

// Base for all runtime failures of the numerical machinery.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// The integrator produced a non-finite or absurdly large entry.  Carries the
// time at which the blowup was detected.
class numerical_blowup : public numerical_error {
public:
    numerical_blowup(const std::string& what, double t_fail_)
        : numerical_error(what + " (t = " + std::to_string(t_fail_) + ")"),
          t_fail(t_fail_) {}
    double t_fail;
};

// Two propagators were composed whose time intervals or anchor points do not
// fit together.
class composition_mismatch : public numerical_error {
public:
    explicit composition_mismatch(const std::string& what) : numerical_error(what) {}
};

// A perturbation would move a generator out of its declared class
// (frictionless / dissipative).
class class_violation : public numerical_error {
public:
    explicit class_violation(const std::string& what) : numerical_error(what) {}
};

// A geometric construction (cone parameter, interpolation target) admits no
// solution within its search domain.
class construction_failure : public numerical_error {
public:
    explicit construction_failure(const std::string& what) : numerical_error(what) {}
};

// A requested direction rotation exceeds the certified angle budget or the
// root bracketing fails.
class rotation_infeasible : public numerical_error {
public:
    explicit rotation_infeasible(const std::string& what) : numerical_error(what) {}
};

// A requested direction swap cannot be realised within the step-angle budget
// over the given relaxation span.
class swap_infeasible : public numerical_error {
public:
    explicit swap_infeasible(const std::string& what) : numerical_error(what) {}
};

// A structural identity that must hold exactly (trace balance, class bound)
// was violated beyond tolerance.
class invariant_violation : public numerical_error {
public:
    explicit invariant_violation(const std::string& what) : numerical_error(what) {}
};

// An inverse-trigonometric or similar evaluation left its mathematical
// domain by more than roundoff.
class numerical_domain : public numerical_error {
public:
    explicit numerical_domain(const std::string& what) : numerical_error(what) {}
};

// A direction frame has collapsed (angle below resolution) and cannot anchor
// further geometry.
class degenerate_frame : public numerical_error {
public:
    explicit degenerate_frame(const std::string& what) : numerical_error(what) {}
};

}  // namespace cocycle
