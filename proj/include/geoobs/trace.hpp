#pragma once

#include "geoobs/types.hpp"

namespace geoobs {

/// Per-sample convergence quantities. Distances are in the observer's metric
/// (the Jacobi metric for mechanical runs).
struct ConvergenceDiagnostics {
    double t = 0.0;
    double D_xi = 0.0;         // D(ξ̂, ξ)
    double D_q = 0.0;          // D(ξ̂, q)
    double speed_err = 0.0;    // ‖v̂ − q̇‖
    double norm_err = 0.0;     // |‖v̂‖ − ‖q̇‖|
    double angle = 0.0;        // α between v̂ and q̇, in [0, π]
    double angle_bound = 0.0;  // α_A from the comparison triangle
    bool in_trap = true;       // D(ξ̂, q) < π / (4√A) when A > 0
    double speed = 0.0;        // ‖q̇‖
    double tau = 0.0;          // Maupertuis time (equals t for geodesic runs)
    double noise = 0.0;        // magnitude of the injected measurement noise
};

/// One simulation sample.
struct TraceRecord {
    double t = 0.0;
    Point q_true;
    Tangent qdot_true;
    Point q_meas;
    Point xi_hat;
    Tangent v_hat;
    Point xi_ref;
    ConvergenceDiagnostics diagnostics;
};

} // namespace geoobs
