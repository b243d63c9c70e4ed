#pragma once

#include "bmt/system.hpp"

namespace bmt {

/// SISO second-order test system used by the data-driven validation study:
/// x+ = [[1, 0.2], [-0.1, 0.9]] x + [1; 0.5] u,  y = x_1.
inline LtiSystem lti_validation_system() {
    Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1);
    A << 1.0, 0.2, -0.1, 0.9;
    B << 1.0, 0.5;
    C << 1.0, 0.0;
    D << 0.0;
    return LtiSystem(A, B, C, D);
}

/// Two-dimensional polynomial control benchmark:
/// x1+ = x1 + 0.4 x2 + 0.2 u,  x2+ = 0.8 x2 + u - 0.3 x1^2,  |u| <= 1.
inline PolynomialSystem nonlinear_control_system() {
    Polynomial f1{{{1, 0, 0}, 1.0}, {{0, 1, 0}, 0.4}, {{0, 0, 1}, 0.2}};
    Polynomial f2{{{0, 1, 0}, 0.8}, {{0, 0, 1}, 1.0}, {{2, 0, 0}, -0.3}};
    PolynomialSystem sys(2, 1, {f1, f2});
    sys.u_bounds = {{-1.0, 1.0}};
    return sys;
}

/// Constrained scalar quadratic graph x+ = x^2 + u on [-1, 1]^3.
inline PolynomialSystem poly_example_system() {
    Polynomial f{{{2, 0}, 1.0}, {{0, 1}, 1.0}};
    PolynomialSystem sys(1, 1, {f});
    sys.x_bounds = {{-1.0, 1.0}};
    sys.u_bounds = {{-1.0, 1.0}};
    return sys;
}

}  // namespace bmt
