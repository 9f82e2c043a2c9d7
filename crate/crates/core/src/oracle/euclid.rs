use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Similarity between real numbers used by [`euclidean_vote`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EuclideanKind {
    /// `1 - kappa (x - c)^2`; the winner approximates the weighted mean.
    Quadratic,
    /// `1 - kappa |x - c|`; the winner approximates a weighted median.
    Linear,
}

/// Weighted vote of `points` (value, weight) over the `grid` of candidate
/// values. Scores may leave `[0, 1]`. Returns the first grid point with the
/// highest total.
pub fn euclidean_vote(points: &[(f64, f64)], kind: EuclideanKind, kappa: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid("kappa must be positive and finite"));
    }
    if points.iter().any(|&(x, w)| !x.is_finite() || !(w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("points need finite values and positive finite weights"));
    }
    let score = |c: f64| -> f64 {
        points
            .iter()
            .map(|&(x, w)| {
                let d = x - c;
                let s = match kind {
                    EuclideanKind::Quadratic => 1.0 - kappa * d * d,
                    EuclideanKind::Linear => 1.0 - kappa * d.abs(),
                };
                w * s
            })
            .sum()
    };
    let mut best = grid[0];
    let mut best_score = score(best);
    for &c in &grid[1..] {
        let s = score(c);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    Ok(best)
}

/// `lo, lo + step, ...` up to `hi` (inclusive within half a step), computed
/// by multiplication so no error accumulates.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("grid needs lo <= hi and a positive step"));
    }
    let n = ((hi - lo) / step + 0.5).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}
