//! ICA-based LiNGAM causal discovery.
//!
//! Observed variables follow `x = Bx + e` with non-Gaussian independent
//! disturbances `e` and a `B` that is strictly lower-triangular under some
//! ordering. ICA recovers `W = I - B` up to row permutation and scaling; the
//! permutation is the one leaving no (near-)zeros on the diagonal, the scaling
//! is fixed by the unit diagonal of `W`.

mod ica;
mod structure;

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use ica::{
    center, center_observations, center_rows, fast_ica, DataMatrix, IcaConfig, Nonlinearity,
    UnmixingEstimate,
};
pub use structure::{
    causal_order, connection_matrix, normalize_diagonal, resolve_permutation, CausalOrder,
    RowPermutation, EXHAUSTIVE_MAX_DIM,
};

use crate::error::{Error, Result};
use crate::pipeline::ObservationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LingamConfig {
    pub ica: IcaConfig,
    /// Zero out `|b_ij|` below this value after estimation. Off by default.
    pub prune_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalModel {
    pub names: Vec<String>,
    /// `b[(i, j)]` is the strength of `x_j -> x_i`.
    pub b: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub order: CausalOrder,
    /// Row permutation applied to the ICA unmixing matrix.
    pub row_perm: Vec<usize>,
    /// Row scales removed during diagonal normalization.
    pub d_hat: Vec<f64>,
    /// Estimated disturbances `(I - B) x` of the centered data, `d x n`.
    pub e_residuals: DMatrix<f64>,
    pub means: Vec<f64>,
    pub ica_iterations: usize,
    /// False only when the ICA stage ran out of iterations and was allowed to.
    pub ica_converged: bool,
}

impl CausalModel {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_owned()))
    }

    pub fn strength(&self, from: &str, to: &str) -> Result<f64> {
        Ok(self.b[(self.index_of(to)?, self.index_of(from)?)])
    }

    /// True when `from` precedes `to` in the causal order.
    pub fn precedes(&self, from: &str, to: &str) -> Result<bool> {
        let (f, t) = (self.index_of(from)?, self.index_of(to)?);
        Ok(self.order.position(f) < self.order.position(t))
    }

    /// Full `B` as CSV with variable names on both axes.
    pub fn write_b_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let err = |e: csv::Error| Error::io(path, e.into());
        let mut header = vec!["effect\\cause".to_owned()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (i, name) in self.names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend((0..self.names.len()).map(|j| self.b[(i, j)].to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn fit_data(data: &DataMatrix, cfg: &LingamConfig) -> Result<CausalModel> {
    let est = fast_ica(data, &cfg.ica)?;
    let permuted = resolve_permutation(&est.w_ica)?;
    let (w, d_hat) = normalize_diagonal(&permuted.dw)?;
    let mut b = connection_matrix(&w);
    if let Some(t) = cfg.prune_threshold {
        b.apply(|v| {
            if v.abs() < t {
                *v = 0.0
            }
        });
    }
    let order = causal_order(&b);
    let d = b.nrows();
    let e_residuals = (DMatrix::identity(d, d) - &b) * &data.x;
    Ok(CausalModel {
        names: data.names.clone(),
        b,
        w,
        order,
        row_perm: permuted.perm,
        d_hat,
        e_residuals,
        means: data.means.clone(),
        ica_iterations: est.iterations,
        ica_converged: est.converged,
    })
}

/// Center, unmix, resolve permutation and scaling, then order the variables.
pub fn fit(obs: &ObservationMatrix, cfg: &LingamConfig) -> Result<CausalModel> {
    fit_data(&center_observations(obs)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// The variable causes the target.
    IntoTarget,
    /// The target precedes the variable.
    FromTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub variable: String,
    /// `B[target, variable]`.
    pub strength: f64,
    /// `None` when the strength is exactly zero.
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetEffects {
    pub target: String,
    pub entries: Vec<Effect>,
}

impl TargetEffects {
    pub fn direction_label(&self, e: &Effect) -> String {
        match e.direction {
            Some(Direction::IntoTarget) => format!("{} -> {}", e.variable, self.target),
            Some(Direction::FromTarget) => format!("{} -> {}", self.target, e.variable),
            None => "none".to_owned(),
        }
    }

    /// `variable,connection_strength,direction`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let err = |e: csv::Error| Error::io(path, e.into());
        w.write_record(["variable", "connection_strength", "direction"])
            .map_err(err)?;
        for e in &self.entries {
            w.write_record([
                e.variable.clone(),
                format!("{:.6}", e.strength),
                self.direction_label(e),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn target_effects(model: &CausalModel, target: &str) -> Result<TargetEffects> {
    let t = model.index_of(target)?;
    let entries = model
        .names
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != t)
        .map(|(i, name)| {
            let strength = model.b[(t, i)];
            let direction = (strength != 0.0).then(|| {
                if model.order.position(i) < model.order.position(t) {
                    Direction::IntoTarget
                } else {
                    Direction::FromTarget
                }
            });
            Effect {
                variable: name.clone(),
                strength,
                direction,
            }
        })
        .collect();
    Ok(TargetEffects {
        target: target.to_owned(),
        entries,
    })
}

/// Observation counts below this mark a diagnostic report as low-confidence.
pub const LOW_CONFIDENCE_N: usize = 20;
/// Minimum half-width of the "looks Gaussian" excess-kurtosis band.
pub const GAUSSIAN_KURTOSIS_BAND: f64 = 0.1;
/// Standard errors of the sample kurtosis added to the band at finite `n`.
pub const KURTOSIS_BAND_SE: f64 = 3.5;

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub excess_kurtosis: Vec<(String, f64)>,
    /// Half-width of the band around 0 used for the warning.
    pub band: f64,
    /// Every variable's excess kurtosis lies within `band` of a Gaussian's.
    pub gaussian_warning: bool,
    pub low_confidence: bool,
    pub n_obs: usize,
}

impl AssumptionReport {
    pub const CONFOUNDER_NOTE: &'static str =
        "absence of unobserved confounders cannot be tested from observational data";
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# n = {}", self.n_obs)?;
        for (name, k) in &self.excess_kurtosis {
            writeln!(f, "# excess_kurtosis {name} = {k:.4}")?;
        }
        if self.gaussian_warning {
            writeln!(
                f,
                "# WARNING: all variables look Gaussian (|excess kurtosis| <= {:.3}); directions are not identifiable",
                self.band
            )?;
        }
        if self.low_confidence {
            writeln!(f, "# WARNING: fewer than {LOW_CONFIDENCE_N} observations; low confidence")?;
        }
        writeln!(f, "# note: {}", Self::CONFOUNDER_NOTE)
    }
}

/// Biased-moment excess kurtosis `m4 / m2^2 - 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), &x| {
        let d2 = (x - mean) * (x - mean);
        (a + d2, b + d2 * d2)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        return f64::NAN;
    }
    m4 / (m2 * m2) - 3.0
}

/// Standard error of the sample excess kurtosis of a Gaussian sample of size `n`.
pub fn kurtosis_standard_error(n: usize) -> f64 {
    if n < 4 {
        return f64::INFINITY;
    }
    let n = n as f64;
    (24.0 * n * (n - 1.0).powi(2) / ((n - 3.0) * (n - 2.0) * (n + 3.0) * (n + 5.0))).sqrt()
}

pub fn check_assumptions(obs: &ObservationMatrix) -> AssumptionReport {
    let n = obs.n_obs();
    let excess_kurtosis: Vec<(String, f64)> = obs
        .columns
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), excess_kurtosis(&obs.column(j))))
        .collect();
    let band = GAUSSIAN_KURTOSIS_BAND.max(KURTOSIS_BAND_SE * kurtosis_standard_error(n));
    let gaussian_warning = !excess_kurtosis.is_empty()
        && excess_kurtosis.iter().all(|(_, k)| k.is_finite() && k.abs() <= band);
    AssumptionReport {
        excess_kurtosis,
        band,
        gaussian_warning,
        low_confidence: n < LOW_CONFIDENCE_N,
        n_obs: n,
    }
}

/// Table-shaped report: effects CSV followed by `#`-prefixed diagnostics.
pub fn write_report(
    effects: &TargetEffects,
    diagnostics: &AssumptionReport,
    path: &Path,
) -> Result<()> {
    effects.write_csv(path)?;
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    write!(f, "{diagnostics}").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(b: DMatrix<f64>, names: &[&str]) -> CausalModel {
        let d = b.nrows();
        let order = causal_order(&b);
        CausalModel {
            names: names.iter().map(|s| s.to_string()).collect(),
            w: DMatrix::identity(d, d) - &b,
            b,
            order,
            row_perm: (0..d).collect(),
            d_hat: vec![1.0; d],
            e_residuals: DMatrix::zeros(d, 0),
            means: vec![0.0; d],
            ica_iterations: 0,
            ica_converged: true,
        }
    }

    #[test]
    fn effects_on_target() {
        let mut b = DMatrix::zeros(2, 2);
        b[(1, 0)] = 0.8;
        let m = model_with(b, &["x1", "x2"]);
        let eff = target_effects(&m, "x2").unwrap();
        assert_eq!(eff.entries.len(), 1);
        assert_eq!(eff.entries[0].variable, "x1");
        assert_eq!(eff.entries[0].strength, 0.8);
        assert_eq!(eff.entries[0].direction, Some(Direction::IntoTarget));
        assert_eq!(eff.direction_label(&eff.entries[0]), "x1 -> x2");
    }

    #[test]
    fn zero_model_has_no_directions() {
        let m = model_with(DMatrix::zeros(3, 3), &["a", "b", "y"]);
        let eff = target_effects(&m, "y").unwrap();
        assert_eq!(eff.entries.len(), 2);
        assert!(eff.entries.iter().all(|e| e.strength == 0.0 && e.direction.is_none()));
    }

    #[test]
    fn unknown_target_is_an_error() {
        let m = model_with(DMatrix::zeros(2, 2), &["a", "b"]);
        assert!(matches!(target_effects(&m, "y"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn kurtosis_of_simple_samples() {
        // two-point distribution: m4/m2^2 = 1
        assert!((excess_kurtosis(&[-1.0, 1.0, -1.0, 1.0]) + 2.0).abs() < 1e-12);
        assert!(excess_kurtosis(&[3.0, 3.0, 3.0]).is_nan());
    }

    #[test]
    fn small_samples_are_low_confidence() {
        let obs = ObservationMatrix::new(
            (0..10).map(|i| format!("s{i}")).collect(),
            vec!["x".into(), "y".into()],
            (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect(),
        )
        .unwrap();
        let r = check_assumptions(&obs);
        assert!(r.low_confidence);
        assert_eq!(r.excess_kurtosis.len(), 2);
        assert!(r.to_string().contains("low confidence"));
    }

    #[test]
    fn band_shrinks_to_floor() {
        assert!(kurtosis_standard_error(5000) > 0.069 && kurtosis_standard_error(5000) < 0.07);
        assert_eq!(
            GAUSSIAN_KURTOSIS_BAND.max(KURTOSIS_BAND_SE * kurtosis_standard_error(10_000_000)),
            GAUSSIAN_KURTOSIS_BAND
        );
    }
}
