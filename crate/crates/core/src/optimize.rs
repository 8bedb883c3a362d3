//! Derivative-free compass (pattern) search.

#[derive(Debug, Clone, Copy)]
pub struct PatternSearch {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl PatternSearch {
    /// Polls `x ± step·e_k` along every axis, moves to the best strictly
    /// improving poll, and halves the step when none improves. The returned
    /// value is never worse than `f(x0)`.
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, x0: Vec<f64>) -> SearchResult {
        let mut x = x0;
        let mut value = f(&x);
        let mut evals = 1;
        let mut step = self.initial_step;
        let mut trial = x.clone();
        while step >= self.min_step && evals < self.max_evals {
            let mut best: Option<(usize, f64, f64)> = None;
            for k in 0..x.len() {
                for sign in [1.0, -1.0] {
                    trial.copy_from_slice(&x);
                    trial[k] += sign * step;
                    let v = f(&trial);
                    evals += 1;
                    if v < value && best.is_none_or(|(_, _, bv)| v < bv) {
                        best = Some((k, sign, v));
                    }
                }
            }
            match best {
                Some((k, sign, v)) => {
                    x[k] += sign * step;
                    value = v;
                }
                None => step *= 0.5,
            }
        }
        SearchResult { x, value, evals }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let search = PatternSearch {
            initial_step: 1.0,
            min_step: 1e-10,
            max_evals: 100_000,
        };
        let r = search.minimize(
            |x| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.25).powi(2),
            vec![0.0, 0.0],
        );
        assert!((r.x[0] - 1.5).abs() < 1e-8);
        assert!((r.x[1] + 0.25).abs() < 1e-8);
    }

    #[test]
    fn never_worse_than_start() {
        let search = PatternSearch {
            initial_step: 0.1,
            min_step: 1e-3,
            max_evals: 50,
        };
        let f = |x: &[f64]| (x[0] * 7.0).sin() + x[0].abs();
        let r = search.minimize(f, vec![0.3]);
        assert!(r.value <= f(&[0.3]));
    }

    #[test]
    fn stays_at_kink_minimum() {
        let search = PatternSearch {
            initial_step: 0.5,
            min_step: 1e-12,
            max_evals: 10_000,
        };
        let r = search.minimize(|x| x[0].abs() + 2.0 * x[1].abs(), vec![0.0, 0.0]);
        assert_eq!(r.x, vec![0.0, 0.0]);
    }
}
