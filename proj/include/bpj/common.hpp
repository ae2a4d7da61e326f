#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bpj {

/// Error raised for invalid data or configuration. Carries a human-readable
/// message that names the offending file/field/value where applicable.
/// CLI code maps this to exit status 2 (data error); programming errors
/// (std::invalid_argument, std::logic_error) map to non-zero as well.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Logistic sigmoid, the activation applied to every probability-like and
/// box/offset channel during decoding.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Inverse sigmoid on the open interval (0,1).
inline double logit(double p) {
    return std::log(p / (1.0 - p));
}

/// Clamp a probability to [eps, 1-eps] before logit so target encoding never
/// produces infinities. The clamp width is part of the file-format contract:
/// encoded saturated targets decode back within 2*eps of 0 or 1.
inline constexpr double kProbClamp = 1e-6;

inline double clamped_logit(double p) {
    if (p < kProbClamp) p = kProbClamp;
    if (p > 1.0 - kProbClamp) p = 1.0 - kProbClamp;
    return logit(p);
}

}  // namespace bpj
