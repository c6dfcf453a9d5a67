use crate::types::Transition;

/// On-policy storage for one update interval.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    transitions: Vec<Transition>,
    capacity: usize,
}

/// A maximal run of consecutive transitions from one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    /// Whether the last transition was a true termination (no bootstrap).
    pub terminated: bool,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            transitions: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn is_full(&self) -> bool {
        self.transitions.len() >= self.capacity
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
    }

    pub fn take(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.transitions)
    }

    /// Episode segments; the final one may be cut by the end of the buffer.
    pub fn segments(&self) -> Vec<Segment> {
        segments(&self.transitions)
    }
}

pub fn segments(transitions: &[Transition]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in transitions.iter().enumerate() {
        let last = i + 1 == transitions.len();
        if t.episode_ended() || last {
            out.push(Segment {
                start,
                end: i + 1,
                terminated: t.terminated,
            });
            start = i + 1;
        }
    }
    out
}
