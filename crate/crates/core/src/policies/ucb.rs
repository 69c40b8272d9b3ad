//! Context-free UCB over the joint action set.

#[derive(Debug, Clone, PartialEq)]
pub struct Ucb {
    counts: Vec<u64>,
    means: Vec<f64>,
    total: u64,
    c: f64,
}

impl Ucb {
    pub fn new(actions: usize, c: f64) -> Self {
        Self {
            counts: vec![0; actions],
            means: vec![0.0; actions],
            total: 0,
            c,
        }
    }

    pub fn count(&self, a: usize) -> u64 {
        self.counts[a]
    }

    pub fn mean(&self, a: usize) -> f64 {
        self.means[a]
    }

    pub fn pulls(&self) -> u64 {
        self.total
    }

    /// `mean + c sqrt(2 ln t / n)`; infinite for unvisited actions.
    pub fn score(&self, a: usize) -> f64 {
        if self.counts[a] == 0 {
            return f64::INFINITY;
        }
        let t = (self.total.max(1)) as f64;
        self.means[a] + self.c * (2.0 * t.ln() / self.counts[a] as f64).sqrt()
    }

    /// Highest score plus `bonus(a)` among feasible actions; the first
    /// unvisited feasible action always wins.
    pub fn select_with(&self, feasible: &[bool], bonus: impl Fn(usize) -> f64) -> Option<usize> {
        if let Some(a) = (0..self.counts.len()).find(|a| feasible[*a] && self.counts[*a] == 0) {
            return Some(a);
        }
        (0..self.counts.len())
            .filter(|a| feasible[*a])
            .map(|a| (a, self.score(a) + bonus(a)))
            .fold(None, |best: Option<(usize, f64)>, (a, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((a, s)),
            })
            .map(|(a, _)| a)
    }

    pub fn select(&self, feasible: &[bool]) -> Option<usize> {
        self.select_with(feasible, |_| 0.0)
    }

    pub fn record(&mut self, a: usize, reward: f64) {
        self.counts[a] += 1;
        self.total += 1;
        self.means[a] += (reward - self.means[a]) / self.counts[a] as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unvisited_actions_come_first() {
        let mut u = Ucb::new(3, 1.0);
        u.record(0, 100.0);
        u.record(2, 100.0);
        assert_eq!(u.select(&[true, true, true]), Some(1));
        assert_eq!(u.select(&[true, false, true]), Some(0));
    }

    #[test]
    fn bonus_vanishes_for_large_counts() {
        let mut u = Ucb::new(2, 1.0);
        for _ in 0..5000 {
            u.record(0, 0.9);
            u.record(1, 0.1);
        }
        assert_eq!(u.select(&[true, true]), Some(0));
    }

    #[test]
    fn nothing_feasible() {
        let u = Ucb::new(2, 1.0);
        assert_eq!(u.select(&[false, false]), None);
    }
}
