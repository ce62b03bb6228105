//! Hit-probability comparison between a single-source scoring generator
//! and a generator that splits its budget between two sources.

use rand::Rng;

use super::EvalError;

/// Per-rank hit probabilities for `N` proposals on the original image and
/// for the first `N / 2` proposals on the response map.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixAInstance {
    pub p: Vec<f64>,
    pub p_r: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixGap {
    /// Product of all `N` single-source probabilities.
    pub p_g: f64,
    /// Product of the first half of both sources.
    pub p_t: f64,
    pub p_d: f64,
    /// Second half of the single source over the response half.
    pub tau: f64,
}

impl AppendixAInstance {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidInstance(m));
        let n = self.p.len();
        if n == 0 || !n.is_multiple_of(2) {
            return bad(format!("N = {n} must be positive and even"));
        }
        if self.p_r.len() != n / 2 {
            return bad(format!("expected {} response probabilities, got {}", n / 2, self.p_r.len()));
        }
        if self.p.iter().chain(&self.p_r).any(|&v| !(v > 0.0 && v < 1.0)) {
            return bad("probabilities must lie in (0, 1)".into());
        }
        if self.p.windows(2).any(|w| w[0] <= w[1]) {
            return bad("p must be strictly decreasing".into());
        }
        if let Some(i) = (0..n / 2).find(|&i| self.p_r[i] <= self.p[i]) {
            return bad(format!("p_r[{i}] = {} does not exceed p[{i}] = {}", self.p_r[i], self.p[i]));
        }
        Ok(())
    }
}

pub fn appendix_a_gap(instance: &AppendixAInstance) -> Result<AppendixGap, EvalError> {
    instance.validate()?;
    let half = instance.p.len() / 2;
    let head: f64 = instance.p[..half].iter().product();
    let tail: f64 = instance.p[half..].iter().product();
    let response: f64 = instance.p_r.iter().product();
    let p_g = head * tail;
    let p_t = head * response;
    Ok(AppendixGap {
        p_g,
        p_t,
        p_d: p_g - p_t,
        tau: tail / response,
    })
}

/// Random valid instance with `n` (even) ranks.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> AppendixAInstance {
    loop {
        let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..0.999)).collect();
        p.sort_by(|a, b| b.total_cmp(a));
        let p_r: Vec<f64> = p[..n / 2]
            .iter()
            .map(|&v| v + rng.random_range(0.001..0.999) * (1.0 - v))
            .collect();
        let inst = AppendixAInstance { p, p_r };
        if inst.validate().is_ok() {
            return inst;
        }
    }
}

/// Generate `trials` random instances with `N` drawn from `{2, 4, ..., 20}`
/// and count those with `p_d < 0` and `tau < 1`.
pub fn check_appendix_instances<R: Rng + ?Sized>(rng: &mut R, trials: usize) -> (usize, usize) {
    let mut satisfied = 0;
    for _ in 0..trials {
        let n = 2 * rng.random_range(1..=10);
        let inst = random_instance(rng, n);
        let gap = appendix_a_gap(&inst).expect("generated instance is valid");
        if gap.p_d < 0.0 && gap.tau < 1.0 {
            satisfied += 1;
        }
    }
    (satisfied, trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_instance() {
        let inst = AppendixAInstance {
            p: vec![0.9, 0.8, 0.7, 0.6],
            p_r: vec![0.95, 0.85],
        };
        let g = appendix_a_gap(&inst).unwrap();
        assert!((g.p_g - 0.3024).abs() < 1e-12);
        assert!((g.p_t - 0.5814).abs() < 1e-12);
        assert!((g.p_d + 0.279).abs() < 1e-12);
        assert!((g.tau - 0.42 / 0.8075).abs() < 1e-12);
        assert!((g.tau - 0.520_123_8).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_dominating_response() {
        let inst = AppendixAInstance {
            p: vec![0.9, 0.8, 0.7, 0.6],
            p_r: vec![0.9, 0.8],
        };
        assert!(matches!(appendix_a_gap(&inst), Err(EvalError::InvalidInstance(_))));
        let unsorted = AppendixAInstance {
            p: vec![0.5, 0.8],
            p_r: vec![0.9],
        };
        assert!(appendix_a_gap(&unsorted).is_err());
        let odd = AppendixAInstance {
            p: vec![0.5, 0.4, 0.3],
            p_r: vec![0.9],
        };
        assert!(appendix_a_gap(&odd).is_err());
    }
}
