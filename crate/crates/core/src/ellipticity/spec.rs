use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{random_elliptic, CMatrix, MatrixField};
use crate::error::{Error, Result};
use crate::sampling::sample_rng;

/// Matrix description in run configs.
///
/// Explicit matrices are `{"re": [[..]], "im": [[..]]}`; named families use a
/// `kind` tag, e.g. `{"kind": "rotation", "phi": 0.3, "d": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Explicit { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
    Named(NamedMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamedMatrix {
    Identity { d: usize },
    /// e^{iφ} I_d
    Rotation { phi: f64, d: usize },
    /// I + 0.35·G, G complex Gaussian from `(seed, stream)`, redrawn until Δ_p ≥ 0.1
    Random {
        seed: u64,
        #[serde(default)]
        stream: u64,
        d: usize,
        #[serde(default = "default_p")]
        p: f64,
    },
    /// (1 + 0.25 sin 2πx₁/ℓ)·e^{iφ cos 2πx₁/ℓ}·I_d, a smooth x-dependent field
    ModulatedRotation { phi: f64, d: usize },
}

fn default_p() -> f64 {
    4.0
}

impl MatrixSpec {
    pub fn rotation(phi: f64, d: usize) -> Self {
        MatrixSpec::Named(NamedMatrix::Rotation { phi, d })
    }

    pub fn identity(d: usize) -> Self {
        MatrixSpec::Named(NamedMatrix::Identity { d })
    }

    pub fn dim(&self) -> usize {
        match self {
            MatrixSpec::Explicit { re, .. } => re.len(),
            MatrixSpec::Named(n) => match *n {
                NamedMatrix::Identity { d }
                | NamedMatrix::Rotation { d, .. }
                | NamedMatrix::Random { d, .. }
                | NamedMatrix::ModulatedRotation { d, .. } => d,
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, MatrixSpec::Named(NamedMatrix::ModulatedRotation { .. }))
    }

    /// Builds a constant field; x-dependent kinds need [`MatrixSpec::build_on`].
    pub fn build(&self) -> Result<MatrixField> {
        match self {
            MatrixSpec::Explicit { re, im } => {
                let d = re.len();
                if im.len() != d || re.iter().chain(im.iter()).any(|row| row.len() != d) {
                    return Err(Error::Config("re and im must both be square of equal size".into()));
                }
                let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(re[i][j], im[i][j]));
                MatrixField::constant("explicit", m)
            }
            MatrixSpec::Named(n) => match *n {
                NamedMatrix::Identity { d } => Ok(MatrixField::identity(d)),
                NamedMatrix::Rotation { phi, d } => Ok(MatrixField::rotation(phi, d)),
                NamedMatrix::Random { seed, stream, d, p } => {
                    let mut rng = sample_rng(seed, stream);
                    MatrixField::constant(format!("random({seed},{stream})"), random_elliptic(&mut rng, d, p))
                }
                NamedMatrix::ModulatedRotation { .. } => Err(Error::Config(
                    "modulated_rotation depends on x and needs a grid".into(),
                )),
            },
        }
    }

    /// Builds the field at the given points of a torus of side `length`.
    pub fn build_on(&self, points: &[Vec<f64>], length: f64) -> Result<MatrixField> {
        match self {
            MatrixSpec::Named(NamedMatrix::ModulatedRotation { phi, d }) => {
                let values = points
                    .iter()
                    .map(|x| {
                        let w = std::f64::consts::TAU * x[0] / length;
                        let z = Complex64::from_polar(1.0 + 0.25 * w.sin(), phi * w.cos());
                        CMatrix::identity(*d, *d) * z
                    })
                    .collect();
                MatrixField::pointwise(format!("modulated_rotation({phi})"), values)
            }
            _ => self.build(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_forms() {
        let s: MatrixSpec = serde_json::from_str(r#"{"kind":"rotation","phi":0.3,"d":2}"#).unwrap();
        assert_eq!(s, MatrixSpec::rotation(0.3, 2));
        let e: MatrixSpec =
            serde_json::from_str(r#"{"re":[[1,0],[0,1]],"im":[[0,0.1],[0.1,0]]}"#).unwrap();
        let f = e.build().unwrap();
        assert_eq!(f.at(0)[(0, 1)], Complex64::new(0.0, 0.1));
        let r: MatrixSpec = serde_json::from_str(r#"{"kind":"random","seed":9,"d":2}"#).unwrap();
        assert_eq!(r.build().unwrap().at(0), r.build().unwrap().at(0));
    }

    #[test]
    fn modulated_needs_points() {
        let s = MatrixSpec::Named(NamedMatrix::ModulatedRotation { phi: 0.2, d: 1 });
        assert!(s.build().is_err());
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        assert_eq!(s.build_on(&pts, 8.0).unwrap().len(), 8);
    }
}
