/// Wall-clock source used to attribute computation time to local solves.
///
/// The core crate cannot read a clock in `no_std` builds, so runs take the
/// clock as a parameter. The CLI passes a monotonic clock; tests and
/// `no_std` consumers can pass [`NullClock`], which makes every timing
/// column zero without affecting iterate values.
pub trait Clock {
    /// Seconds since an arbitrary fixed origin.
    fn now_seconds(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}
