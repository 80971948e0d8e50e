//! Bjøntegaard deltas between two rate-accuracy curves, from cubic
//! least-squares fits in log-rate space integrated over the overlap.

// Negated comparisons below also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub rate: f64,
    pub accuracy: f64,
}

impl CurvePoint {
    pub fn new(rate: f64, accuracy: f64) -> Self {
        CurvePoint { rate, accuracy }
    }
}

fn check(curve: &[CurvePoint]) -> Result<()> {
    if curve.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "curve needs at least 4 points, got {}",
            curve.len()
        )));
    }
    if curve
        .iter()
        .any(|p| !(p.rate > 0.0) || !p.rate.is_finite() || !p.accuracy.is_finite())
    {
        return Err(Error::InvalidArgument(
            "curve rates must be positive and values finite".into(),
        ));
    }
    Ok(())
}

/// Least-squares cubic in a centred, scaled abscissa.
struct Cubic {
    c: [f64; 4],
    shift: f64,
    scale: f64,
}

impl Cubic {
    fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = 0.5 * (lo + hi);
        let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        let mut a = [[0.0; 5]; 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let t = (xi - shift) / scale;
            let pw = [1.0, t, t * t, t * t * t];
            for r in 0..4 {
                for c in 0..4 {
                    a[r][c] += pw[r] * pw[c];
                }
                a[r][4] += pw[r] * yi;
            }
        }
        for col in 0..4 {
            let piv = (col..4)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            if a[piv][col].abs() < 1e-12 {
                return Err(Error::InvalidArgument(
                    "curve points too degenerate for a cubic fit".into(),
                ));
            }
            a.swap(col, piv);
            for r in 0..4 {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..5 {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        let c = std::array::from_fn(|i| a[i][4] / a[i][i]);
        Ok(Cubic { c, shift, scale })
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let prim = |x: f64| {
            let t = (x - self.shift) / self.scale;
            self.scale
                * (self.c[0] * t
                    + self.c[1] * t * t / 2.0
                    + self.c[2] * t.powi(3) / 3.0
                    + self.c[3] * t.powi(4) / 4.0)
        };
        prim(hi) - prim(lo)
    }
}

fn overlap(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let lo = a
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(b.iter().copied().fold(f64::INFINITY, f64::min));
    let hi = a
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .min(b.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    if !(hi > lo) {
        return Err(Error::InvalidArgument(
            "curves have no overlapping range".into(),
        ));
    }
    Ok((lo, hi))
}

/// Mean of fit(b) - fit(a) over the overlapping abscissa range.
fn mean_gap(xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64]) -> Result<f64> {
    let (lo, hi) = overlap(xa, xb)?;
    let fa = Cubic::fit(xa, ya)?;
    let fb = Cubic::fit(xb, yb)?;
    Ok((fb.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo))
}

/// Average rate change of `b` relative to `a` at equal accuracy, in percent.
/// Fits log-rate as a cubic in accuracy.
pub fn bd_rate(a: &[CurvePoint], b: &[CurvePoint]) -> Result<f64> {
    check(a)?;
    check(b)?;
    let acc = |c: &[CurvePoint]| c.iter().map(|p| p.accuracy).collect::<Vec<_>>();
    let lr = |c: &[CurvePoint]| c.iter().map(|p| p.rate.ln()).collect::<Vec<_>>();
    let gap = mean_gap(&acc(a), &lr(a), &acc(b), &lr(b))?;
    Ok(gap.exp_m1() * 100.0)
}

/// Average accuracy change of `b` relative to `a` at equal rate. Fits
/// accuracy as a cubic in log-rate.
pub fn bd_accuracy(a: &[CurvePoint], b: &[CurvePoint]) -> Result<f64> {
    check(a)?;
    check(b)?;
    let acc = |c: &[CurvePoint]| c.iter().map(|p| p.accuracy).collect::<Vec<_>>();
    let lr = |c: &[CurvePoint]| c.iter().map(|p| p.rate.ln()).collect::<Vec<_>>();
    mean_gap(&lr(a), &acc(a), &lr(b), &acc(b))
}
