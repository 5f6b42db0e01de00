//! Piecewise-constant signals integrated into per-second averages.

/// Integrates a step function into one-second buckets.
#[derive(Debug, Clone, Default)]
pub struct SecondIntegrator {
    value: f64,
    since: f64,
    buckets: Vec<f64>,
}

impl SecondIntegrator {
    pub fn new(initial: f64) -> Self {
        SecondIntegrator { value: initial, since: 0.0, buckets: Vec::new() }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    fn integrate(&mut self, now: f64) {
        if now <= self.since {
            return;
        }
        if self.value != 0.0 {
            let mut t = self.since;
            while t < now {
                let sec = t.floor();
                let end = (sec + 1.0).min(now);
                let idx = sec as usize;
                if self.buckets.len() <= idx {
                    self.buckets.resize(idx + 1, 0.0);
                }
                self.buckets[idx] += self.value * (end - t);
                t = end;
            }
        }
        self.since = now;
    }

    /// Changes the signal to `value` from `now` on.
    pub fn set(&mut self, now: f64, value: f64) {
        // Unchanged values integrate later in whole pieces, keeping
        // constant signals exact.
        if value == self.value {
            return;
        }
        self.integrate(now);
        self.value = value;
    }

    /// Per-second averages over `[0, seconds)`.
    pub fn finish(mut self, seconds: usize) -> Vec<f64> {
        self.integrate(seconds as f64);
        self.buckets.resize(seconds, 0.0);
        self.buckets
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averages_within_seconds() {
        let mut s = SecondIntegrator::new(0.0);
        s.set(0.5, 2.0);
        s.set(2.25, 4.0);
        let b = s.finish(4);
        assert_eq!(b, vec![1.0, 2.0, 0.5 + 3.0, 4.0]);
    }

    #[test]
    fn constant_signal() {
        let s = SecondIntegrator::new(160.0);
        assert_eq!(s.finish(3), vec![160.0; 3]);
    }
}
