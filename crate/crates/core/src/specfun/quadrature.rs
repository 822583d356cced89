//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest local error estimate is bisected until the
//! summed error estimate meets `max(abs_tol, rel_tol·|I|)` or the subdivision
//! budget is exhausted. Evaluation order depends only on the inputs, so results
//! are bit-reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error(
        "quadrature did not converge in {subdivisions} subdivisions \
         (estimate {estimate:.6e}, error bound {error:.3e})"
    )]
    NotConverged {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid integration interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
}

impl QuadratureError {
    /// Best estimate available when the error was raised, if any.
    pub fn partial_estimate(&self) -> Option<f64> {
        match self {
            QuadratureError::NotConverged { estimate, .. } => Some(*estimate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by position for determinism.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn kronrod15<E, F>(f: &mut F, lo: f64, hi: f64) -> Result<Panel, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut eval = |x: f64| -> Result<f64, E> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite { x }.into())
        }
    };

    let fc = eval(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    res_abs *= scale;
    res_asc *= scale;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { lo, hi, value, error })
}

/// Tolerances and budget for [`Quadrature::integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n.max(1);
        self
    }

    pub fn integrate<F>(&self, mut f: F, lo: f64, hi: f64) -> Result<QuadResult, QuadratureError>
    where
        F: FnMut(f64) -> f64,
    {
        self.try_integrate(|x| Ok::<_, QuadratureError>(f(x)), lo, hi)
    }

    /// Like [`integrate`](Self::integrate) for integrands that can fail, e.g. an
    /// inner quadrature of an iterated integral.
    pub fn try_integrate<F, E>(&self, mut f: F, lo: f64, hi: f64) -> Result<QuadResult, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
        E: From<QuadratureError>,
    {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(QuadratureError::BadInterval { lo, hi }.into());
        }
        if lo == hi {
            return Ok(QuadResult {
                value: 0.0,
                error: 0.0,
                subdivisions: 0,
                evaluations: 0,
            });
        }
        if lo > hi {
            let r = self.try_integrate(f, hi, lo)?;
            return Ok(QuadResult {
                value: -r.value,
                ..r
            });
        }

        let first = kronrod15(&mut f, lo, hi)?;
        let mut evaluations = 15;
        let mut total = first.value;
        let mut total_err = first.error;
        let mut heap = BinaryHeap::new();
        heap.push(first);
        let mut subdivisions = 1;

        loop {
            let tol = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= tol {
                break;
            }
            if subdivisions >= self.max_subdivisions {
                return Err(QuadratureError::NotConverged {
                    estimate: total,
                    error: total_err,
                    subdivisions,
                }
                .into());
            }
            let worst = heap.pop().expect("heap holds at least one panel");
            let mid = 0.5 * (worst.lo + worst.hi);
            if !(mid > worst.lo && mid < worst.hi) {
                // Interval can no longer be split in floating point.
                return Err(QuadratureError::NotConverged {
                    estimate: total,
                    error: total_err,
                    subdivisions,
                }
                .into());
            }
            let left = kronrod15(&mut f, worst.lo, mid)?;
            let right = kronrod15(&mut f, mid, worst.hi)?;
            evaluations += 30;
            subdivisions += 1;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }

        // Re-sum in a fixed order to avoid drift from the running update.
        let mut panels: Vec<Panel> = heap.into_vec();
        panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let value = panels.iter().map(|p| p.value).sum();
        let error = panels.iter().map(|p| p.error).sum();
        Ok(QuadResult {
            value,
            error,
            subdivisions,
            evaluations,
        })
    }
}

/// One-dimensional adaptive quadrature to absolute tolerance `tol`.
pub fn integrate_adaptive<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, QuadratureError>
where
    F: FnMut(f64) -> f64,
{
    Quadrature::new(tol, 0.0).integrate(f, lo, hi).map(|r| r.value)
}
