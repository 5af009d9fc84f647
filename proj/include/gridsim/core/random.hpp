#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>

namespace gridsim {

// Seeded random stream.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distribution transforms below are written out explicitly
// because the std:: distributions are implementation-defined, and golden
// CSV files must be identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Independent stream derived from a scenario seed and a stream id.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(splitmix(seed ^ splitmix(stream_id + 0x9E3779B97F4A7C15ULL)));
    }

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    std::size_t index(std::size_t n) {
        auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    // Box-Muller; always consumes exactly two uniforms.
    double normal(double mean = 0.0, double sd = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return mean + sd * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Marsaglia-Tsang. Consumes a variable number of draws.
    double gamma(double shape) {
        if (shape < 1.0) {
            double g = gamma(shape + 1.0);
            return g * std::pow(uniform(), 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (std::log1p(-u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    double beta(double a, double b) {
        double x = gamma(a);
        double y = gamma(b);
        return x / (x + y);
    }

    // Inverse-CDF Weibull; one uniform.
    double weibull(double scale, double shape) {
        return scale * std::pow(-std::log1p(-uniform()), 1.0 / shape);
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace gridsim
