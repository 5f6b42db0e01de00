//! Virtual clock and priority event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Events that carry a tie-break rank (lower runs first at equal times).
pub trait Ranked {
    fn rank(&self) -> u8;
}

struct Entry<E> {
    at: f64,
    rank: u8,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Min-queue ordered by (time, rank, insertion order) with a
/// non-decreasing clock.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    seq: u64,
    now: f64,
}

impl<E: Ranked> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Ranked> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue { heap: BinaryHeap::new(), seq: 0, now: 0.0 }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedules `event` at `at`; times in the past are clamped to now.
    pub fn schedule(&mut self, at: f64, event: E) {
        let at = if at < self.now { self.now } else { at };
        let rank = event.rank();
        self.heap.push(Entry { at, rank, seq: self.seq, event });
        self.seq += 1;
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.at)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<(f64, E)> {
        let e = self.heap.pop()?;
        self.now = e.at;
        Some((e.at, e.event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq)]
    struct Ev(u8, &'static str);

    impl Ranked for Ev {
        fn rank(&self) -> u8 {
            self.0
        }
    }

    #[test]
    fn orders_by_time_rank_then_insertion() {
        let mut q = EventQueue::new();
        q.schedule(2.0, Ev(0, "late"));
        q.schedule(1.0, Ev(3, "publish"));
        q.schedule(1.0, Ev(0, "complete-a"));
        q.schedule(1.0, Ev(0, "complete-b"));
        let order: Vec<&str> = std::iter::from_fn(|| q.pop()).map(|(_, e)| e.1).collect();
        assert_eq!(order, vec!["complete-a", "complete-b", "publish", "late"]);
    }

    #[test]
    fn past_times_are_clamped() {
        let mut q = EventQueue::new();
        q.schedule(5.0, Ev(0, "a"));
        q.pop();
        q.schedule(1.0, Ev(0, "b"));
        assert_eq!(q.pop().unwrap().0, 5.0);
    }
}
