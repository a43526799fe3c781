//! Closed-loop integration, Lyapunov instrumentation and equilibria.

pub mod dynamics;
pub mod equilibrium;
pub mod integrate;
pub mod lyapunov;
pub mod state;
pub mod steady;

pub use dynamics::{AgcLoop, ClosedLoop, Dynamics, Observables};
pub use equilibrium::{find_equilibrium, solve_predisturbance_equilibrium, Anchors, EQUILIBRIUM_TOL};
pub use integrate::{integrate, simulate, LoadEvent, Sampler, StepControl, Trajectory};
pub use lyapunov::{energy_w, lyapunov_v, Energy};
pub use state::{ClosedLoopState, Layout};
pub use steady::{detect_steady_state, rhs_norm};
