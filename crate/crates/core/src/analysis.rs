//! Critical-time extraction, Fermi-like decay fits and logarithmic scaling
//! regressions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Level (relative to the curve maximum) that defines the critical time.
pub const CRITICAL_LEVEL: f64 = 0.6;

/// Lower atom-number bound of the logarithmic regime.
pub const MIN_ATOMS_FOR_LOG_REGIME: f64 = 2e4;

const MAX_ITERATIONS: usize = 500;
const RELATIVE_DECREASE_TOL: f64 = 1e-10;

/// `f(t) = (1 - f∞) / (1 + exp((t - τ)/T)) + f∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermiCurve {
    pub tau_c: f64,
    pub width: f64,
    pub f_inf: f64,
}

impl FermiCurve {
    /// `1 / (1 + e^x)` without overflow for large |x|.
    fn logistic(x: f64) -> f64 {
        if x > 0.0 {
            let e = (-x).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + x.exp())
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = Self::logistic((t - self.tau_c) / self.width);
        (1.0 - self.f_inf) * s + self.f_inf
    }

    /// Time at which the curve equals `level` (must lie strictly between f∞ and 1).
    pub fn inverse(&self, level: f64) -> Option<f64> {
        if !(level > self.f_inf && level < 1.0) {
            return None;
        }
        let ratio = (1.0 - self.f_inf) / (level - self.f_inf) - 1.0;
        Some(self.tau_c + self.width * ratio.ln())
    }

    /// Partial derivatives with respect to (τ, T, f∞).
    fn gradient(&self, t: f64) -> [f64; 3] {
        let x = (t - self.tau_c) / self.width;
        let s = Self::logistic(x);
        let ds = (1.0 - self.f_inf) * s * (1.0 - s) / self.width;
        [ds, ds * x, 1.0 - s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermiFitResult {
    pub tau_c: f64,
    pub width: f64,
    pub f_inf: f64,
    pub residual_rms: f64,
    pub width_was_fixed: bool,
    pub iterations: usize,
}

impl FermiFitResult {
    pub fn curve(&self) -> FermiCurve {
        FermiCurve {
            tau_c: self.tau_c,
            width: self.width,
            f_inf: self.f_inf,
        }
    }
}

/// First downward crossing of `0.6 · max(F)`, linearly interpolated between
/// the bracketing samples. `None` when the curve never crosses.
pub fn critical_time(times: &[f64], values: &[f64]) -> Option<f64> {
    level_crossing(times, values, CRITICAL_LEVEL)
}

/// First downward crossing of `fraction · max(values)`.
pub fn level_crossing(times: &[f64], values: &[f64], fraction: f64) -> Option<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    crossing_of(times, values, fraction * max)
}

fn crossing_of(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    let n = times.len().min(values.len());
    (1..n).find_map(|i| {
        let (v0, v1) = (values[i - 1], values[i]);
        (v0 >= threshold && v1 < threshold).then(|| {
            let (t0, t1) = (times[i - 1], times[i]);
            t0 + (v0 - threshold) / (v0 - v1) * (t1 - t0)
        })
    })
}

/// Least-squares fit of the Fermi-like decay, with the width either fixed
/// (`Some(T)`) or free.
///
/// Starts from the 0.6-crossing, the mean of the last tenth of the samples,
/// and either the fixed width or one estimated from the 80%/20% crossings.
/// Levenberg–Marquardt iterations stop once an accepted step lowers the
/// residual sum of squares by less than a relative 1e-10, or after 500
/// iterations.
pub fn fermi_fit(times: &[f64], values: &[f64], fixed_width: Option<f64>) -> Result<FermiFitResult> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::FitPrecondition(format!(
            "need matching series of at least 4 samples, got {} times and {} values",
            times.len(),
            values.len()
        )));
    }
    if let Some(w) = fixed_width {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::FitPrecondition(format!("fixed width must be positive, got {w}")));
        }
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.9) {
        return Err(Error::FitPrecondition("curve never exceeds 0.9".into()));
    }
    let tau0 = critical_time(times, values)
        .ok_or_else(|| Error::FitPrecondition("curve does not fall below 0.6 of its maximum".into()))?;
    let tail = (values.len() / 10).max(1);
    let f_inf0 = (values[values.len() - tail..].iter().sum::<f64>() / tail as f64).clamp(0.0, 0.5);
    let width0 = fixed_width.unwrap_or_else(|| estimate_width(times, values, f_inf0, max));

    let mut fit = Lm {
        times,
        values,
        fixed_width,
    };
    let start = FermiCurve {
        tau_c: tau0,
        width: width0,
        f_inf: f_inf0,
    };
    let (curve, ssr, iterations) = fit.solve(start)?;
    if !(curve.width > 0.0 && (0.0..1.0).contains(&curve.f_inf) && curve.tau_c.is_finite() && ssr.is_finite()) {
        return Err(Error::FitDiverged(format!("{curve:?}")));
    }
    Ok(FermiFitResult {
        tau_c: curve.tau_c,
        width: curve.width,
        f_inf: curve.f_inf,
        residual_rms: (ssr / times.len() as f64).sqrt(),
        width_was_fixed: fixed_width.is_some(),
        iterations,
    })
}

fn estimate_width(times: &[f64], values: &[f64], f_inf: f64, max: f64) -> f64 {
    let span = max - f_inf;
    let hi = crossing_of(times, values, f_inf + 0.8 * span);
    let lo = crossing_of(times, values, f_inf + 0.2 * span);
    match (hi, lo) {
        // 80% → 20% of the logistic spans 2 ln 4 widths.
        (Some(a), Some(b)) if b > a => (b - a) / (2.0 * 4f64.ln()),
        _ => {
            let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
            (5.0 * dt).max(f64::EPSILON)
        }
    }
}

struct Lm<'a> {
    times: &'a [f64],
    values: &'a [f64],
    fixed_width: Option<f64>,
}

impl Lm<'_> {
    fn n_params(&self) -> usize {
        if self.fixed_width.is_some() {
            2
        } else {
            3
        }
    }

    fn pack(&self, c: &FermiCurve) -> DVector<f64> {
        match self.fixed_width {
            Some(_) => DVector::from_vec(vec![c.tau_c, c.f_inf]),
            None => DVector::from_vec(vec![c.tau_c, c.width, c.f_inf]),
        }
    }

    fn unpack(&self, p: &DVector<f64>) -> FermiCurve {
        match self.fixed_width {
            Some(w) => FermiCurve { tau_c: p[0], width: w, f_inf: p[1] },
            None => FermiCurve { tau_c: p[0], width: p[1], f_inf: p[2] },
        }
    }

    fn ssr(&self, c: &FermiCurve) -> f64 {
        self.times
            .iter()
            .zip(self.values)
            .map(|(&t, &y)| (c.eval(t) - y).powi(2))
            .sum()
    }

    fn normal_equations(&self, c: &FermiCurve) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.n_params();
        let mut jtj = DMatrix::zeros(m, m);
        let mut jtr = DVector::zeros(m);
        for (&t, &y) in self.times.iter().zip(self.values) {
            let r = c.eval(t) - y;
            let [dtau, dw, dfinf] = c.gradient(t);
            let row: [f64; 3] = [dtau, dw, dfinf];
            let row: Vec<f64> = match self.fixed_width {
                Some(_) => vec![row[0], row[2]],
                None => row.to_vec(),
            };
            for a in 0..m {
                jtr[a] += row[a] * r;
                for b in 0..m {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        (jtj, jtr)
    }

    fn admissible(c: &FermiCurve) -> bool {
        c.tau_c.is_finite() && c.width > 0.0 && c.width.is_finite() && (0.0..1.0).contains(&c.f_inf)
    }

    fn solve(&mut self, start: FermiCurve) -> Result<(FermiCurve, f64, usize)> {
        let mut p = self.pack(&start);
        let mut current = start;
        let mut ssr = self.ssr(&current);
        let mut lambda = 1e-3;
        let (mut jtj, mut jtr) = self.normal_equations(&current);
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS && ssr > 0.0 {
            iterations += 1;
            let mut damped = jtj.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let step = damped.lu().solve(&(-&jtr));
            let Some(step) = step else {
                lambda *= 10.0;
                continue;
            };
            let trial_p = &p + step;
            let trial = self.unpack(&trial_p);
            let trial_ssr = if Self::admissible(&trial) { self.ssr(&trial) } else { f64::INFINITY };
            if trial_ssr < ssr {
                let decrease = (ssr - trial_ssr) / ssr;
                p = trial_p;
                current = trial;
                ssr = trial_ssr;
                lambda = (lambda / 10.0).max(1e-15);
                if decrease < RELATIVE_DECREASE_TOL {
                    break;
                }
                (jtj, jtr) = self.normal_equations(&current);
            } else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    // No descent direction left: at a minimum to working precision.
                    break;
                }
            }
        }
        if !ssr.is_finite() {
            return Err(Error::FitDiverged("non-finite residuals".into()));
        }
        Ok((current, ssr, iterations))
    }
}

/// Ordinary least squares of `τ_C` against a logarithmic abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(abscissa, τ_C)` pairs the regression was run on.
    pub points: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

fn linear_regression(points: Vec<(f64, f64)>) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::FitPrecondition(format!(
            "scaling fit needs at least 3 records, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::FitPrecondition("non-finite scaling record".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < points.len() || sxx <= 0.0 {
        return Err(Error::FitPrecondition("scaling abscissas must be distinct".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        1.0 - ss_res / syy
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        points,
    })
}

/// Regression of `τ_C` on `-ln ε`; the slope estimates the time scale `t₀`
/// in `τ_C ≈ -t₀ ln ε`.
pub fn scaling_fit_epsilon(records: &[(f64, f64)]) -> Result<ScalingFit> {
    if let Some((e, _)) = records.iter().find(|(e, _)| !(*e > 0.0)) {
        return Err(Error::FitPrecondition(format!("epsilon must be positive, got {e}")));
    }
    linear_regression(records.iter().map(|&(e, t)| (-e.ln(), t)).collect())
}

/// Regression of `τ_C` on `ln N_A`, restricted to the logarithmic regime
/// `N_A ≥ 2·10⁴`.
pub fn scaling_fit_natoms(records: &[(f64, f64)]) -> Result<ScalingFit> {
    if let Some((n, _)) = records.iter().find(|(n, _)| !(*n >= MIN_ATOMS_FOR_LOG_REGIME)) {
        return Err(Error::FitPrecondition(format!(
            "atom number {n} is below the logarithmic regime ({MIN_ATOMS_FOR_LOG_REGIME})"
        )));
    }
    linear_regression(records.iter().map(|&(n, t)| (n.ln(), t)).collect())
}
