#pragma once

#include <vector>

#include "cocycle/baseflow.hpp"
#include "cocycle/coefficient_field.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/spectrum.hpp"
#include "cocycle/splitting.hpp"

namespace cocycle {

// The oscillator generator of the stationary equation -x'' + Q x = E x,
// rewritten as the frictionless system with restoring coefficient
// beta = E - Q: matrix [[0, 1], [Q - E, 0]].  Unimodular by construction.
KineticGenerator schrodinger_generator(const CoefficientField& potential,
                                       double energy);

// One row of an energy sweep: exponent mean and classification fractions of
// the sample at a fixed energy, plus the majority verdict (unresolved when
// neither definite verdict carries more than half the sample).
struct EnergyReport {
    double energy = 0.0;
    double mean_lambda1 = 0.0;
    double zero_fraction = 0.0;
    double hyperbolic_fraction = 0.0;
    double unresolved_fraction = 0.0;
    FrictionlessVerdict verdict = FrictionlessVerdict::neither;
};

struct EnergySweep {
    std::vector<double> energies;
    std::vector<EnergyReport> per_energy;
};

// Classifies the sample at every energy on the grid: for constant
// potentials the exact dichotomy is lambda1(E) = sqrt(max(c - E, 0)), with
// uniform hyperbolicity below the threshold and zero exponents above it;
// for genuinely fluctuating potentials unresolved energies are reported as
// such, never forced into either horn.  Energies must be strictly
// increasing.
EnergySweep energy_sweep(const CoefficientField& potential,
                         const BaseFlow& flow,
                         const std::vector<double>& energies,
                         const SampleSet& sample, double horizon, double m,
                         double step);

}  // namespace cocycle
