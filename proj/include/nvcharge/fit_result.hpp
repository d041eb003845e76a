#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/lsq.hpp"

namespace nvcharge {

// Parameter vector, uncertainties and residual report shared by all fitters.
struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> std_errors;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    double residual_rms = 0.0; // RMS of the unweighted residuals y - f
    std::size_t n_points = 0;
    std::size_t iterations = 0;
    std::size_t starts = 0;
    bool converged = false;
    std::string message;

    std::size_t index(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw DomainError("FitResult: no parameter named " + std::string(name));
    }
    double value(std::string_view name) const { return values[index(name)]; }
    double error(std::string_view name) const { return std_errors[index(name)]; }
};

inline FitResult make_fit_result(std::vector<std::string> names, const lsq::Result& r, std::size_t starts,
                                 std::size_t n_points, double unweighted_rss) {
    FitResult f;
    f.names = std::move(names);
    f.values.assign(r.params.data(), r.params.data() + r.params.size());
    f.std_errors.assign(r.std_errors.data(), r.std_errors.data() + r.std_errors.size());
    f.covariance = r.covariance;
    f.chi2 = r.chi2;
    f.n_points = n_points;
    f.residual_rms = f.n_points ? std::sqrt(unweighted_rss / static_cast<double>(f.n_points)) : 0.0;
    f.iterations = r.iterations;
    f.starts = starts;
    f.converged = r.converged;
    f.message = r.message;
    return f;
}

} // namespace nvcharge
