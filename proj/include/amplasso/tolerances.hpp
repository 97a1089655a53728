#pragma once

#include <string>

#include "amplasso/quadrature.hpp"

namespace amplasso {

/// Numerical settings for the state-evolution solvers.
struct SeConfig {
    /// Scan starts at alpha_min + alpha_offset.
    double alpha_offset = 1e-6;
    double alpha_upper = 50.0;
    int alpha_grid_points = 60;
    double alpha_min_tol = 1e-12;

    double fixed_point_rel_tol = 1e-12;
    int fixed_point_max_iter = 10000;

    double lambda_tol = 1e-9;
    double residual_tol = 1e-8;
    int bisection_max_iter = 200;

    double opt_lambda_lo = 1e-3;
    double opt_lambda_hi = 20.0;
    double opt_lambda_tol = 1e-6;
    double stationarity_tol = 1e-11;
};

/// Settings for level-set discovery of the density ratio q0/q.
struct LevelSetConfig {
    /// Zero-exclusion radius as a multiple of tau.
    double zero_band_factor = 1e-3;
    /// Scan grid step as a multiple of tau.
    double grid_step_factor = 1.0 / 200.0;
    double endpoint_tol = 1e-10;
    /// Absolute tolerance of tpp* when calibrating a threshold.
    double calibrate_tol = 1e-8;
};

struct LassoOptions {
    double change_tol = 1e-10;
    double gap_tol = 1e-8;
    long max_sweeps = 100000;
    double zero_snap = 1e-12;
    bool record_objective = false;
};

/// Every tolerance in one record; loadable from JSON via --tol-config.
struct Tolerances {
    QuadratureOptions quadrature;
    SeConfig se;
    LevelSetConfig level_set;
    LassoOptions lasso;
};

/// Reads a (possibly partial) tolerance record; unspecified keys keep defaults.
Tolerances load_tolerances(const std::string& path);
Tolerances tolerances_from_json_text(const std::string& text);
std::string tolerances_to_json_text(const Tolerances& tol);

}  // namespace amplasso
