//! Budget-enforcing wrapper around an [`Objective`] that records the
//! best-so-far trajectory an optimizer produces.

use crate::suite::Objective;

/// Everything a single optimizer run reports back.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    /// Best-so-far values, one per evaluation, padded to the budget. Values
    /// are gaps `f - fopt` when the objective knows its optimum, raw `f`
    /// otherwise.
    pub trajectory: Vec<f64>,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evaluations: usize,
    pub restarts: u32,
}

impl RunOutcome {
    pub fn final_value(&self) -> f64 {
        *self.trajectory.last().expect("trajectory is never empty")
    }
}

/// Counts evaluations, saturates points into the box and tracks the best.
pub struct Evaluator<'a> {
    objective: &'a mut dyn Objective,
    budget: usize,
    lower: f64,
    upper: f64,
    fopt: Option<f64>,
    trajectory: Vec<f64>,
    best_f: f64,
    best_x: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    /// # Panics
    /// If `budget` is zero.
    pub fn new(objective: &'a mut dyn Objective, budget: usize) -> Self {
        assert!(budget > 0, "budget must be positive");
        let (lower, upper) = objective.bounds();
        let fopt = objective.fopt();
        let dim = objective.dim();
        Evaluator {
            objective,
            budget,
            lower,
            upper,
            fopt,
            trajectory: Vec::with_capacity(budget),
            best_f: f64::INFINITY,
            best_x: vec![f64::NAN; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.best_x.len()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.trajectory.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used()
    }

    pub fn exhausted(&self) -> bool {
        self.used() >= self.budget
    }

    pub fn best_f(&self) -> f64 {
        self.best_f
    }

    /// Saturates `x` into the box.
    pub fn clamp(&self, x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = v.clamp(self.lower, self.upper));
    }

    /// Evaluates the saturated point. Returns `None` once the budget is spent.
    pub fn evaluate(&mut self, x: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        let mut xc = x.to_vec();
        self.clamp(&mut xc);
        let f = self.objective.evaluate(&xc);
        // NaN never becomes the incumbent.
        if f < self.best_f {
            self.best_f = f;
            self.best_x = xc;
        }
        let gap = match self.fopt {
            Some(o) => self.best_f - o,
            None => self.best_f,
        };
        self.trajectory.push(gap);
        Some(f)
    }

    pub fn finish(mut self, restarts: u32) -> RunOutcome {
        let evaluations = self.used();
        let fill = self.trajectory.last().copied().unwrap_or(f64::INFINITY);
        self.trajectory.resize(self.budget, fill);
        RunOutcome { trajectory: self.trajectory, best_x: self.best_x, best_f: self.best_f, evaluations, restarts }
    }
}
