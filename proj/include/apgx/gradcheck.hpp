#pragma once

#include "apgx/env.hpp"
#include "apgx/rng.hpp"

namespace apgx {

// Finite-difference verification suites. Errors follow the project
// convention |analytic - fd| / max(1, |analytic|) (per entry for Jacobians,
// infinity-norm for gradient vectors).

// Max error of the analytic step derivatives over `samples` random (s, a)
// pairs. States are drawn from generous ranges; the pendulum sampler skips
// the measure-zero angle-wrap discontinuity where central differences are
// undefined.
double env_jacobian_max_err(EnvName name, int samples, double eps, Rng& rng);

// Max error of policy_backward / value_backward against central differences
// over `nets` random networks, inputs, and upstream vectors.
double net_gradient_max_err(int nets, Rng& rng);

// Max error of the rollout-loss backward pass against central differences
// of the replayed loss (identical resets and noise) for one lane count and
// horizon. Uses a small (8, 8) policy with std kept low enough that no
// action saturates; saturation would make the comparison meaningless and
// trips an internal check instead.
double bptt_max_err(EnvName name, int lanes, int horizon, double discount,
                    Rng& rng);

}  // namespace apgx
