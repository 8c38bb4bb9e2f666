use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

/// Cross-thread cancellation flag with an interruptible timed wait.
///
/// Waiting parks on a condition variable, so a blocked forward wakes as soon
/// as [`CancelToken::cancel`] is called rather than at its deadline.
#[derive(Debug, Clone, Default)]
pub struct CancelToken {
    inner: Arc<(Mutex<bool>, Condvar)>,
}

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        let (lock, cv) = &*self.inner;
        *lock.lock().unwrap() = true;
        cv.notify_all();
    }

    pub fn is_cancelled(&self) -> bool {
        *self.inner.0.lock().unwrap()
    }

    /// Run `f` under the flag's lock unless already cancelled.
    pub fn run_unless_cancelled<T>(&self, f: impl FnOnce() -> T) -> Option<T> {
        let flag = self.inner.0.lock().unwrap();
        if *flag {
            None
        } else {
            Some(f())
        }
    }

    /// Block for `dur`. Returns `false` if cancelled before the deadline.
    pub fn wait_for(&self, dur: Duration) -> bool {
        let deadline = Instant::now() + dur;
        let (lock, cv) = &*self.inner;
        let mut flag = lock.lock().unwrap();
        loop {
            if *flag {
                return false;
            }
            let now = Instant::now();
            if now >= deadline {
                return true;
            }
            flag = cv.wait_timeout(flag, deadline - now).unwrap().0;
        }
    }
}
