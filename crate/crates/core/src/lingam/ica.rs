//! Centering, whitening and symmetric fixed-point FastICA.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::ObservationMatrix;

/// Variables in rows, observations in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    /// Per-variable means removed by centering.
    pub means: Vec<f64>,
    pub centered: bool,
}

impl DataMatrix {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.x.ncols()
    }
}

/// Subtract each row's mean. Returns the centered matrix and the means.
pub fn center_rows(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut out = x.clone();
    let mut means = Vec::with_capacity(x.nrows());
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
        means.push(mean);
    }
    (out, means)
}

/// Validate and center a `d x n` matrix of raw observations.
pub fn center(x: &DMatrix<f64>, names: &[String]) -> Result<DataMatrix> {
    let (d, n) = x.shape();
    if names.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: names.len(),
        });
    }
    if n <= d {
        return Err(Error::TooFewObservations { n, d });
    }
    for (i, row) in x.row_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData(names[i].clone()));
        }
    }
    let (xc, means) = center_rows(x);
    for (i, row) in xc.row_iter().enumerate() {
        let spread = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread <= 1e-12 * means[i].abs().max(1.0) {
            return Err(Error::ConstantVariable(names[i].clone()));
        }
    }
    Ok(DataMatrix {
        x: xc,
        names: names.to_vec(),
        means,
        centered: true,
    })
}

/// Transpose an observation table (rows = stations) into a centered data matrix.
pub fn center_observations(obs: &ObservationMatrix) -> Result<DataMatrix> {
    let x = DMatrix::from_fn(obs.n_vars(), obs.n_obs(), |i, j| obs.rows[j][i]);
    center(&x, &obs.columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    /// `g(u) = tanh(u)`
    Tanh,
    /// `g(u) = u^3`
    Cube,
}

impl Nonlinearity {
    fn apply(self, u: f64) -> (f64, f64) {
        match self {
            Nonlinearity::Tanh => {
                let t = u.tanh();
                (t, 1.0 - t * t)
            }
            Nonlinearity::Cube => (u * u * u, 3.0 * u * u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub nonlinearity: Nonlinearity,
    pub seed: u64,
    /// Return the last iterate instead of failing when `max_iter` is reached.
    #[serde(default)]
    pub accept_unconverged: bool,
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig {
            tol: 1e-6,
            max_iter: 1000,
            nonlinearity: Nonlinearity::Tanh,
            seed: 0,
            accept_unconverged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmixingEstimate {
    /// Unmixing matrix for the centered data: `s = w_ica * x`.
    pub w_ica: DMatrix<f64>,
    /// Orthogonal rotation found in whitened space (`w_ica = rotation * whitening`).
    pub rotation: DMatrix<f64>,
    pub whitening: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl UnmixingEstimate {
    pub fn mixing(&self) -> Option<DMatrix<f64>> {
        self.w_ica.clone().try_inverse()
    }
}

/// `(W W^T)^{-1/2} W`
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(1e-300).sqrt()));
    &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

pub fn fast_ica(data: &DataMatrix, cfg: &IcaConfig) -> Result<UnmixingEstimate> {
    let (d, n) = data.x.shape();
    if d < 2 {
        return Err(Error::InvalidConfig(format!("ICA needs at least 2 variables, got {d}")));
    }
    if n <= d {
        return Err(Error::TooFewObservations { n, d });
    }
    if !data.centered {
        return Err(Error::InvalidConfig("ICA input must be centered".into()));
    }
    let x = &data.x;
    let nf = n as f64;

    let cov = (x * x.transpose()) / nf;
    let eig = SymmetricEigen::new(cov);
    let max_ev = eig.eigenvalues.max();
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-10 * max_ev.max(f64::MIN_POSITIVE))
        .count();
    if rank < d {
        return Err(Error::RankDeficient { rank, dim: d });
    }
    let whitening = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let z = &whitening * x;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);

    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut gz = DMatrix::zeros(d, n);
    let mut mean_dg = vec![0.0; d];
    while iterations < cfg.max_iter {
        iterations += 1;
        let wz = &w * &z;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..n {
                let (g, dg) = cfg.nonlinearity.apply(wz[(i, j)]);
                gz[(i, j)] = g;
                acc += dg;
            }
            mean_dg[i] = acc / nf;
        }
        let mut next = (&gz * z.transpose()) / nf;
        for i in 0..d {
            for j in 0..d {
                next[(i, j)] -= mean_dg[i] * w[(i, j)];
            }
        }
        let next = symmetric_decorrelation(&next);
        residual = (&next * w.transpose())
            .diagonal()
            .iter()
            .map(|c| (c.abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if residual < cfg.tol {
            break;
        }
    }
    let converged = residual < cfg.tol;
    if !converged && !cfg.accept_unconverged {
        return Err(Error::NotConverged {
            iterations,
            residual,
        });
    }
    let w_ica = &w * &whitening;
    if w_ica.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotConverged {
            iterations,
            residual: f64::NAN,
        });
    }
    Ok(UnmixingEstimate {
        w_ica,
        rotation: w,
        whitening,
        iterations,
        residual,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_rows() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 2.0]);
        let (c, means) = center_rows(&x);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]));
        assert_eq!(means, [2.0, 2.0]);
        let (again, m2) = center_rows(&c);
        assert_eq!(again, c);
        assert_eq!(m2, [0.0, 0.0]);
    }

    fn names(d: usize) -> Vec<String> {
        (1..=d).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn constant_variable_is_named() {
        let x = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 5.0, 7.0, 7.0, 7.0, 7.0]);
        assert!(matches!(center(&x, &names(2)), Err(Error::ConstantVariable(v)) if v == "x2"));
    }

    #[test]
    fn needs_more_observations_than_variables() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 5.0]);
        assert!(matches!(center(&x, &names(2)), Err(Error::TooFewObservations { n: 2, d: 2 })));
    }

    #[test]
    fn centered_data_is_unchanged() {
        let x = DMatrix::from_row_slice(2, 4, &[-1.0, 1.0, -2.0, 2.0, 0.5, -0.5, 1.0, -1.0]);
        let c = center(&x, &names(2)).unwrap();
        assert_eq!(c.x, x);
    }

    #[test]
    fn collinear_data_is_rank_deficient() {
        let row: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let mut vals = row.clone();
        vals.extend(row.iter().map(|v| 2.0 * v));
        let x = DMatrix::from_row_slice(2, 50, &vals);
        let data = center(&x, &names(2)).unwrap();
        assert!(matches!(
            fast_ica(&data, &IcaConfig::default()),
            Err(Error::RankDeficient { rank: 1, dim: 2 })
        ));
    }

    #[test]
    fn max_iter_exhaustion_reports_residual() {
        let vals: Vec<f64> = (0..200).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let x = DMatrix::from_row_slice(2, 100, &vals);
        let data = center(&x, &names(2)).unwrap();
        let cfg = IcaConfig {
            max_iter: 1,
            tol: 1e-15,
            ..Default::default()
        };
        match fast_ica(&data, &cfg) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decorrelation_yields_orthogonal_rows() {
        let w = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.3, 0.4, 2.0, -0.1, 0.0, 0.5, 0.7]);
        let o = symmetric_decorrelation(&w);
        let eye = &o * o.transpose();
        assert!((eye - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }
}
