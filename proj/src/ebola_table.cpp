#include <array>

#include "dershap/digest.hpp"
#include "dershap/models.hpp"

namespace dershap::models {

namespace {

// Uniform parameter ranges for the two 2014 outbreak fits. Transcribed
// once; the digest below is frozen in a test, so touching a number here
// fails loudly instead of silently shifting every downstream result.
constexpr std::array<EbolaParameter, 8> kEbolaTable{{
    //  name      Liberia lo/hi     Sierra Leone lo/hi
    {"beta1", 0.1, 0.4, 0.1, 0.4},
    {"beta2", 0.1, 0.4, 0.1, 0.4},
    {"beta3", 0.05, 0.2, 0.05, 0.2},
    {"rho1", 0.41, 1.0, 0.41, 1.0},
    {"gamma1", 0.0276, 0.1702, 0.0275, 0.1569},
    {"gamma2", 0.081, 0.21, 0.1236, 0.384},
    {"omega", 0.25, 0.5, 0.25, 0.5},
    {"psi", 0.0833, 0.7, 0.0833, 0.7},
}};

}  // namespace

std::span<const EbolaParameter> ebola_parameters() { return kEbolaTable; }

std::uint64_t ebola_table_digest() {
    Fnv1a64 h;
    for (const EbolaParameter& p : kEbolaTable) {
        h.update(std::string_view(p.name));
        h.update(p.liberia_lo);
        h.update(p.liberia_hi);
        h.update(p.sierra_leone_lo);
        h.update(p.sierra_leone_hi);
    }
    return h.value();
}

}  // namespace dershap::models
