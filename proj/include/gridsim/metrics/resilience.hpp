#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "gridsim/core/errors.hpp"

namespace gridsim::metrics {

// Actual and nominal state sequences, same length and feature order.
struct TrajectoryPair {
    std::vector<Eigen::VectorXd> actual;
    std::vector<Eigen::VectorXd> nominal;
};

struct DeviationTerms {
    double deviation = 0.0;  // sum ||x - x_nom||^2
    double energy = 0.0;     // sum ||x_nom||^2
};

inline DeviationTerms deviation_terms(const Eigen::VectorXd& actual, const Eigen::VectorXd& nominal) {
    if (actual.size() != nominal.size()) throw DimensionError("state vectors differ in length");
    return {(actual - nominal).squaredNorm(), nominal.squaredNorm()};
}

inline double resilience_from_terms(double deviation, double energy) {
    if (!(energy > 0.0)) throw DomainError("resilience index undefined: nominal trajectory has zero energy");
    return 1.0 - deviation / energy;
}

// R = 1 - sum ||x_k - x_nom_k||^2 / sum ||x_nom_k||^2
inline double resilience_index(const TrajectoryPair& pair) {
    if (pair.actual.size() != pair.nominal.size()) throw DimensionError("trajectories differ in length");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < pair.actual.size(); ++k) {
        const auto t = deviation_terms(pair.actual[k], pair.nominal[k]);
        num += t.deviation;
        den += t.energy;
    }
    return resilience_from_terms(num, den);
}

// Trailing-window resilience over per-step terms (each step may already be
// a sum over buses). Sums are recomputed from the window on every push.
class ResilienceWindow {
  public:
    explicit ResilienceWindow(std::size_t window = 100) : window_(window) {
        if (window_ == 0) throw ConfigError("resilience window must be positive");
    }

    double push(const DeviationTerms& t) {
        terms_.push_back(t);
        if (terms_.size() > window_) terms_.pop_front();
        double num = 0.0, den = 0.0;
        for (const auto& x : terms_) {
            num += x.deviation;
            den += x.energy;
        }
        return resilience_from_terms(num, den);
    }

    std::size_t window() const { return window_; }
    std::size_t size() const { return terms_.size(); }

  private:
    std::size_t window_;
    std::deque<DeviationTerms> terms_;
};

inline std::vector<double> windowed_resilience(const TrajectoryPair& pair, std::size_t window = 100) {
    if (pair.actual.size() != pair.nominal.size()) throw DimensionError("trajectories differ in length");
    ResilienceWindow w(window);
    std::vector<double> out;
    out.reserve(pair.actual.size());
    for (std::size_t k = 0; k < pair.actual.size(); ++k)
        out.push_back(w.push(deviation_terms(pair.actual[k], pair.nominal[k])));
    return out;
}

// Trailing mean; the first window-1 entries average what is available.
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
    if (window == 0) throw ConfigError("moving-average window must be positive");
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const std::size_t lo = k + 1 >= window ? k + 1 - window : 0;
        double s = 0.0;
        for (std::size_t j = lo; j <= k; ++j) s += x[j];
        out[k] = s / static_cast<double>(k - lo + 1);
    }
    return out;
}

struct SeriesStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double fraction_in_band = 0.0;
    std::vector<double> moving_average;
};

inline SeriesStats summarize(const std::vector<double>& x, std::size_t window = 100, double band_lo = 0.95,
                             double band_hi = 1.0) {
    if (x.empty()) throw DomainError("summarize: empty series");
    SeriesStats s;
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    std::size_t in = 0;
    for (double v : x) {
        sum += v;
        if (v >= band_lo && v <= band_hi) ++in;
    }
    s.mean = sum / static_cast<double>(x.size());
    s.fraction_in_band = static_cast<double>(in) / static_cast<double>(x.size());
    s.moving_average = moving_average(x, window);
    return s;
}

}  // namespace gridsim::metrics
