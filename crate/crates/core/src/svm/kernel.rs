use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Kernel family without parameters. The derived order is the model-selection
/// tie-break order: simpler kernels first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Quadratic,
    Cubic,
    Rbf,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Quadratic => "quadratic",
            KernelKind::Cubic => "cubic",
            KernelKind::Rbf => "rbf",
        })
    }
}

/// Inner product in the mapped feature space.
///
/// * linear: `x·x'`
/// * quadratic: `(x·x' + 1)^2`
/// * cubic: `(x·x' + 1)^3`
/// * rbf: `exp(-|x - x'|^2 / (2 sigma^2))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", bound = "")]
pub enum Kernel<F: Scalar> {
    Linear,
    Quadratic,
    Cubic,
    Rbf { sigma: F },
}

impl<F: Scalar> Kernel<F> {
    pub fn kind(&self) -> KernelKind {
        match self {
            Kernel::Linear => KernelKind::Linear,
            Kernel::Quadratic => KernelKind::Quadratic,
            Kernel::Cubic => KernelKind::Cubic,
            Kernel::Rbf { .. } => KernelKind::Rbf,
        }
    }

    /// `sigma = sqrt(q / 2)`, so `2 sigma^2 = q`.
    pub fn default_sigma(q: usize) -> F {
        (F::from_usize_lossy(q.max(1)) / F::from_f64_lossy(2.0)).sqrt()
    }

    /// Builds a kernel of `kind`; RBF takes `sigma_scale` times the default width.
    pub fn from_kind(kind: KernelKind, q: usize, sigma_scale: F) -> Self {
        match kind {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Quadratic => Kernel::Quadratic,
            KernelKind::Cubic => Kernel::Cubic,
            KernelKind::Rbf => Kernel::Rbf {
                sigma: sigma_scale * Self::default_sigma(q),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Rbf { sigma } if !(*sigma > F::zero() && sigma.is_finite()) => {
                Err(Error::Config(format!("rbf sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[F], b: &[F]) -> F {
        let dot = || a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y);
        match *self {
            Kernel::Linear => dot(),
            Kernel::Quadratic => {
                let s = dot() + F::one();
                s * s
            }
            Kernel::Cubic => {
                let s = dot() + F::one();
                s * s * s
            }
            Kernel::Rbf { sigma } => {
                let d2 = a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| {
                    let d = x - y;
                    acc + d * d
                });
                (-d2 / (F::from_f64_lossy(2.0) * sigma * sigma)).exp()
            }
        }
    }

    pub fn eval(&self, a: &[F], b: &[F]) -> Result<F> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Ok(self.eval_unchecked(a, b))
    }
}

impl<F: Scalar> fmt::Display for Kernel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Rbf { sigma } => write!(f, "rbf(sigma={sigma:.4})"),
            k => write!(f, "{}", k.kind()),
        }
    }
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> SymMatrix<F> {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<F>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Ridge-shifted Gram matrix `K(x_i, x_j) + [i == j] / C` of the L2 soft margin.
pub fn gram_matrix<F: Scalar>(kernel: &Kernel<F>, x: &[Vec<F>], c: F) -> SymMatrix<F> {
    let n = x.len();
    let mut data = vec![F::zero(); n * n];
    let ridge = F::one() / c;
    for i in 0..n {
        for j in i..n {
            let mut v = kernel.eval_unchecked(&x[i], &x[j]);
            if i == j {
                v = v + ridge;
            }
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    SymMatrix { n, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn closed_forms() {
        let lin: Kernel<f64> = Kernel::Linear;
        assert_eq!(lin.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let quad: Kernel<f64> = Kernel::Quadratic;
        assert_eq!(quad.eval(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 4.0);
        let cubic: Kernel<f64> = Kernel::Cubic;
        assert_eq!(cubic.eval(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 8.0);
        for sigma in [0.1, 1.0, 7.5] {
            let rbf = Kernel::Rbf { sigma };
            assert_eq!(rbf.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        }
        let rbf = Kernel::Rbf { sigma: 1.0f64 };
        let v = rbf.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(
            lin.eval(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut r = SplitMix64::new(5);
        let kernels = [
            Kernel::Linear,
            Kernel::Quadratic,
            Kernel::Cubic,
            Kernel::Rbf { sigma: 0.7 },
        ];
        for _ in 0..50 {
            let a: Vec<f64> = (0..4).map(|_| r.uniform_in(-2.0, 2.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| r.uniform_in(-2.0, 2.0)).collect();
            for k in &kernels {
                assert_eq!(k.eval(&a, &b).unwrap(), k.eval(&b, &a).unwrap());
            }
        }
    }

    #[test]
    fn single_point_gram() {
        let g = gram_matrix(&Kernel::<f64>::Linear, &[vec![0.0]], 1.0);
        assert_eq!(g.to_rows(), vec![vec![1.0]]);
    }

    #[test]
    fn gram_symmetric_with_positive_diagonal() {
        let mut r = SplitMix64::new(9);
        let x: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| r.uniform()).collect())
            .collect();
        let g = gram_matrix(&Kernel::Cubic, &x, 10.0);
        for i in 0..12 {
            assert!(g.get(i, i) > 0.0);
            for j in 0..12 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn rbf_gram_spectrum_shifted_by_ridge() {
        // eigen-solve oracle: RBF Gram is PSD, so the ridge lifts every
        // eigenvalue to at least 1/C
        let mut r = SplitMix64::new(21);
        for c in [0.5, 1.0, 10.0] {
            let x: Vec<Vec<f64>> = (0..15)
                .map(|_| (0..2).map(|_| r.uniform()).collect())
                .collect();
            let g = gram_matrix(&Kernel::Rbf { sigma: 0.4 }, &x, c);
            let m = nalgebra::DMatrix::from_fn(15, 15, |i, j| g.get(i, j));
            let eig = m.symmetric_eigen();
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= 1.0 / c - 1e-9, "min eigenvalue {min} for C={c}");
        }
    }

    #[test]
    fn json_shape() {
        let k = Kernel::Rbf { sigma: 2.0f64 };
        assert_eq!(
            serde_json::to_string(&k).unwrap(),
            r#"{"variant":"rbf","sigma":2.0}"#
        );
        assert_eq!(
            serde_json::to_string(&Kernel::<f64>::Quadratic).unwrap(),
            r#"{"variant":"quadratic"}"#
        );
        assert!(Kernel::Rbf { sigma: 0.0f64 }.validate().is_err());
        assert!(KernelKind::Linear < KernelKind::Rbf);
    }
}
