//! Wall-clock helpers that degrade gracefully on targets without a monotonic
//! clock (wasm32): there, stopwatches read zero and deadlines never expire.

use std::time::Duration;

#[cfg(not(target_arch = "wasm32"))]
mod imp {
    use std::time::{Duration, Instant};

    #[derive(Debug, Clone, Copy)]
    pub struct Stopwatch(Instant);

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch(Instant::now())
        }

        pub fn elapsed(&self) -> Duration {
            self.0.elapsed()
        }
    }

    #[derive(Debug, Clone, Copy, Default)]
    pub struct Deadline(Option<Instant>);

    impl Deadline {
        pub fn none() -> Self {
            Deadline(None)
        }

        pub fn after(d: Duration) -> Self {
            Deadline(Some(Instant::now() + d))
        }

        pub fn expired(&self) -> bool {
            self.0.is_some_and(|at| Instant::now() >= at)
        }

        /// Time left, saturating at zero. `None` when no deadline is set.
        pub fn remaining(&self) -> Option<Duration> {
            self.0.map(|at| at.saturating_duration_since(Instant::now()))
        }
    }
}

#[cfg(target_arch = "wasm32")]
mod imp {
    use std::time::Duration;

    #[derive(Debug, Clone, Copy)]
    pub struct Stopwatch;

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch
        }

        pub fn elapsed(&self) -> Duration {
            Duration::ZERO
        }
    }

    #[derive(Debug, Clone, Copy, Default)]
    pub struct Deadline;

    impl Deadline {
        pub fn none() -> Self {
            Deadline
        }

        pub fn after(_d: Duration) -> Self {
            Deadline
        }

        pub fn expired(&self) -> bool {
            false
        }

        pub fn remaining(&self) -> Option<Duration> {
            None
        }
    }
}

pub use imp::{Deadline, Stopwatch};

/// Deadline from an optional timeout.
pub fn deadline_from(timeout: Option<Duration>) -> Deadline {
    match timeout {
        Some(d) => Deadline::after(d),
        None => Deadline::none(),
    }
}
