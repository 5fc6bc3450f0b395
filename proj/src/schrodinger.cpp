#include "cocycle/schrodinger.hpp"

#include <cmath>

#include "cocycle/errors.hpp"

namespace cocycle {

KineticGenerator schrodinger_generator(const CoefficientField& potential,
                                       double energy) {
    if (!std::isfinite(energy)) throw invalid_input("energy must be finite");
    CoefficientField beta =
        CoefficientField::constant(energy) + potential.negated();
    return KineticGenerator(CoefficientField::constant(0.0), std::move(beta),
                            GeneratorClass::frictionless);
}

EnergySweep energy_sweep(const CoefficientField& potential,
                         const BaseFlow& flow,
                         const std::vector<double>& energies,
                         const SampleSet& sample, double horizon, double m,
                         double step) {
    if (energies.empty()) throw invalid_input("energy grid is empty");
    for (std::size_t i = 1; i < energies.size(); ++i) {
        if (!(energies[i] > energies[i - 1])) {
            throw invalid_input("energy grid must be strictly increasing");
        }
    }
    if (sample.points.empty()) throw invalid_input("sample is empty");

    EnergySweep sweep;
    sweep.energies = energies;
    sweep.per_energy.reserve(energies.size());
    for (double energy : energies) {
        const KineticGenerator a = schrodinger_generator(potential, energy);
        const Classification<FrictionlessVerdict> cls =
            classify_frictionless(a, flow, sample, m, horizon, step);

        EnergyReport report;
        report.energy = energy;
        double sum = 0.0;
        for (const auto& point : cls.points) sum += point.lambda1;
        report.mean_lambda1 = sum / static_cast<double>(cls.points.size());
        report.zero_fraction = cls.fractions[0];
        report.hyperbolic_fraction = cls.fractions[1];
        report.unresolved_fraction = cls.fractions[2];
        if (report.hyperbolic_fraction > 0.5) {
            report.verdict = FrictionlessVerdict::hyperbolic;
        } else if (report.zero_fraction > 0.5) {
            report.verdict = FrictionlessVerdict::zero_spectrum;
        } else {
            report.verdict = FrictionlessVerdict::neither;
        }
        sweep.per_energy.push_back(report);
    }
    return sweep;
}

}  // namespace cocycle
