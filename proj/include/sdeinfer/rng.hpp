#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/math/special_functions/erf.hpp>

namespace sdeinfer {

/// Seeded 64-bit Mersenne twister with explicit uniform and Gaussian
/// transforms, so streams are reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0,1), 53-bit resolution.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inversion.
    double normal() {
        return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * uniform());
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace sdeinfer
