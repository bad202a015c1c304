#pragma once

#include <stdexcept>
#include <string>

namespace sonav {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Query point lies in the interior of an obstacle; the projection is
/// ill-defined there.
struct InsideObstacle : Error {
  using Error::Error;
};

/// An iterative routine (ellipsoid projection, pair-distance refinement)
/// failed to reach its tolerance within the iteration budget.
struct NonConvergence : Error {
  using Error::Error;
};

/// Eigenvalue iteration or Newton solve did not converge.
struct NoConvergence : Error {
  using Error::Error;
};

/// Safety margin d_x <= 0: the damping gain and the control laws are
/// undefined at contact. Surfaced by the simulator as a collision event.
struct Unsafe : Error {
  using Error::Error;
};

/// The planner does not expose a scalar potential, so a potential-based
/// control law cannot be formed.
struct NoPotential : Error {
  using Error::Error;
};

/// Query point lies outside the domain of the navigation function
/// (obstacle proximity h(x) < 0).
struct OutsideDomain : Error {
  using Error::Error;
};

/// Argument outside the interval a piecewise function is defined on.
struct OutOfRange : Error {
  using Error::Error;
};

/// An equilibrium has a Jacobian eigenvalue with (near-)zero real part.
struct DegenerateEquilibrium : Error {
  using Error::Error;
};

/// Shell sampler exhausted its draw budget without hitting the shell.
struct EmptyShell : Error {
  using Error::Error;
};

/// Simulation started outside the interior of the free space.
struct BadInitialState : Error {
  using Error::Error;
};

/// Operation needs more trajectory samples than were provided.
struct TooShort : Error {
  using Error::Error;
};

/// Malformed scenario file.
struct ParseError : Error {
  using Error::Error;
};

/// Well-formed scenario that violates a constraint; message carries the
/// offending field path.
struct ValidationError : Error {
  using Error::Error;
};

/// World violates the obstacle separation requirement d(O_i, O_j) > 2r.
struct SeparationViolation : Error {
  using Error::Error;
};

}  // namespace sonav
