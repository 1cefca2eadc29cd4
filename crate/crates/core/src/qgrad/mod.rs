//! Analytic gradients (quaternion BPTT), a finite-difference oracle, and the
//! check that compares them.

mod backward;
mod check;
mod point;

pub use backward::{backward, qbptt, qbptt_with_loss, GradientSet};
pub use check::{
    batch_loss, compare_gradients, fd_oracle, grad_check, grad_check_with_eps, kink_distance,
    relative_error, Coordinate, GradCheckReport, ParamCheck, DEFAULT_FD_EPS,
};
pub use point::CheckPoint;
