//! Kernel functions with query-access semantics.
//!
//! Every entry of a kernel matrix is computable on demand from the two
//! input points, so the subsampling solver can touch only the entries it
//! needs. [`KernelQuery`] is the access point; [`CountingKernel`] wraps a
//! spec and counts queries.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

/// Polynomial degree used by [`KernelSpec::polynomial`].
pub const DEFAULT_POLY_DEGREE: u32 = 3;
/// Polynomial offset used by [`KernelSpec::polynomial`].
pub const DEFAULT_POLY_OFFSET: f64 = 1.0;
/// Sigmoid offset used by [`KernelSpec::sigmoid`].
pub const DEFAULT_SIGMOID_OFFSET: f64 = 1.0;

/// A kernel family together with its hyperparameters.
///
/// `h` is the bandwidth; every variant except `Linear` divides by it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-‖x-x′‖₂² / h)`
    Gaussian { h: f64 },
    /// `exp(-‖x-x′‖₁ / h)`
    Laplacian { h: f64 },
    /// `⟨x,x′⟩`
    Linear,
    /// `(⟨x,x′⟩/h + offset)^degree`
    Polynomial { h: f64, degree: u32, offset: f64 },
    /// `tanh(⟨x,x′⟩/h + offset)`
    Sigmoid { h: f64, offset: f64 },
}

impl KernelSpec {
    pub fn gaussian(h: f64) -> Self {
        KernelSpec::Gaussian { h }
    }

    pub fn laplacian(h: f64) -> Self {
        KernelSpec::Laplacian { h }
    }

    pub fn polynomial(h: f64) -> Self {
        KernelSpec::Polynomial {
            h,
            degree: DEFAULT_POLY_DEGREE,
            offset: DEFAULT_POLY_OFFSET,
        }
    }

    pub fn sigmoid(h: f64) -> Self {
        KernelSpec::Sigmoid {
            h,
            offset: DEFAULT_SIGMOID_OFFSET,
        }
    }

    /// Builds a kernel by family name with the default constants.
    /// Accepts `gaussian`/`rbf`, `laplacian`, `linear`, `polynomial`/`poly`
    /// and `sigmoid`.
    pub fn from_name(name: &str, h: f64) -> Result<Self> {
        let spec = match name.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Self::gaussian(h),
            "laplacian" => Self::laplacian(h),
            "linear" => KernelSpec::Linear,
            "polynomial" | "poly" => Self::polynomial(h),
            "sigmoid" => Self::sigmoid(h),
            other => return Err(Error::input(format!("unknown kernel `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Laplacian { .. } => "laplacian",
            KernelSpec::Linear => "linear",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::Sigmoid { .. } => "sigmoid",
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match *self {
            KernelSpec::Gaussian { h }
            | KernelSpec::Laplacian { h }
            | KernelSpec::Polynomial { h, .. }
            | KernelSpec::Sigmoid { h, .. } => Some(h),
            KernelSpec::Linear => None,
        }
    }

    /// Same family with a different bandwidth. `Linear` is returned unchanged.
    pub fn with_bandwidth(self, h: f64) -> Self {
        match self {
            KernelSpec::Gaussian { .. } => KernelSpec::Gaussian { h },
            KernelSpec::Laplacian { .. } => KernelSpec::Laplacian { h },
            KernelSpec::Linear => KernelSpec::Linear,
            KernelSpec::Polynomial { degree, offset, .. } => {
                KernelSpec::Polynomial { h, degree, offset }
            }
            KernelSpec::Sigmoid { offset, .. } => KernelSpec::Sigmoid { h, offset },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.bandwidth() {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::input(format!("bandwidth must be positive, got {h}")));
            }
        }
        match *self {
            KernelSpec::Polynomial { degree, offset, .. } => {
                if degree < 1 {
                    return Err(Error::input("polynomial degree must be at least 1"));
                }
                if !offset.is_finite() {
                    return Err(Error::input("polynomial offset must be finite"));
                }
            }
            KernelSpec::Sigmoid { offset, .. } if !offset.is_finite() => {
                return Err(Error::input("sigmoid offset must be finite"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Kernel value without dimension checks. Callers guarantee equal lengths.
    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            KernelSpec::Gaussian { h } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / h).exp()
            }
            KernelSpec::Laplacian { h } => {
                let d1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / h).exp()
            }
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { h, degree, offset } => {
                (dot(x, y) / h + offset).powi(degree as i32)
            }
            KernelSpec::Sigmoid { h, offset } => (dot(x, y) / h + offset).tanh(),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

impl fmt::Display for KernelSpec {
    /// Round-trippable text form, e.g. `gaussian h=10` or
    /// `polynomial h=1 degree=3 offset=1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Gaussian { h } => write!(f, "gaussian h={h:?}"),
            KernelSpec::Laplacian { h } => write!(f, "laplacian h={h:?}"),
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { h, degree, offset } => {
                write!(f, "polynomial h={h:?} degree={degree} offset={offset:?}")
            }
            KernelSpec::Sigmoid { h, offset } => write!(f, "sigmoid h={h:?} offset={offset:?}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| Error::input("empty kernel spec"))?;
        let mut h = None;
        let mut degree = None;
        let mut offset = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::input(format!("bad kernel parameter `{part}`")))?;
            let bad = || Error::input(format!("bad value in `{part}`"));
            match key {
                "h" => h = Some(value.parse::<f64>().map_err(|_| bad())?),
                "degree" => degree = Some(value.parse::<u32>().map_err(|_| bad())?),
                "offset" => offset = Some(value.parse::<f64>().map_err(|_| bad())?),
                _ => return Err(Error::input(format!("unknown kernel parameter `{key}`"))),
            }
        }
        let need_h = || h.ok_or_else(|| Error::input(format!("kernel `{name}` needs h=")));
        let spec = match name {
            "linear" => KernelSpec::Linear,
            "polynomial" => KernelSpec::Polynomial {
                h: need_h()?,
                degree: degree.unwrap_or(DEFAULT_POLY_DEGREE),
                offset: offset.unwrap_or(DEFAULT_POLY_OFFSET),
            },
            "sigmoid" => KernelSpec::Sigmoid {
                h: need_h()?,
                offset: offset.unwrap_or(DEFAULT_SIGMOID_OFFSET),
            },
            other => KernelSpec::from_name(other, need_h()?)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Query access to a kernel: one call yields one kernel entry.
pub trait KernelQuery: Sync {
    fn spec(&self) -> KernelSpec;
    fn query(&self, x: &[f64], y: &[f64]) -> f64;
}

impl KernelQuery for KernelSpec {
    fn spec(&self) -> KernelSpec {
        *self
    }

    #[inline]
    fn query(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value(x, y)
    }
}

/// Kernel wrapper that counts how many entries were queried.
#[derive(Debug)]
pub struct CountingKernel {
    inner: KernelSpec,
    count: AtomicUsize,
}

impl CountingKernel {
    pub fn new(inner: KernelSpec) -> Self {
        CountingKernel {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }
}

impl KernelQuery for CountingKernel {
    fn spec(&self) -> KernelSpec {
        self.inner
    }

    fn query(&self, x: &[f64], y: &[f64]) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x, y)
    }
}

/// Evaluates `k(x, y)`, checking dimensions.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "kernel inputs differ in dimension: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.value(x, y))
}

/// Full `n×n` kernel matrix. Only the upper triangle is evaluated; the
/// lower one is mirrored so the result is exactly symmetric.
pub fn kernel_matrix<Q: KernelQuery + ?Sized>(kernel: &Q, points: &FeatureMatrix) -> DMatrix<f64> {
    let all: Vec<usize> = (0..points.rows()).collect();
    kernel_submatrix(kernel, points, &all)
}

/// Kernel matrix restricted to `indices × indices`, querying only those
/// `s(s+1)/2` distinct entries.
pub fn kernel_submatrix<Q: KernelQuery + ?Sized>(
    kernel: &Q,
    points: &FeatureMatrix,
    indices: &[usize],
) -> DMatrix<f64> {
    let s = indices.len();
    let upper: Vec<Vec<f64>> = indices
        .par_iter()
        .enumerate()
        .map(|(a, &i)| {
            let xi = points.row(i);
            indices[a..]
                .iter()
                .map(|&j| kernel.query(xi, points.row(j)))
                .collect()
        })
        .collect();
    let mut out = DMatrix::zeros(s, s);
    for (a, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            out[(a, a + offset)] = v;
            out[(a + offset, a)] = v;
        }
    }
    out
}

/// Rectangular kernel block `rows × cols` over the same point set.
pub fn kernel_block<Q: KernelQuery + ?Sized>(
    kernel: &Q,
    points: &FeatureMatrix,
    rows: &[usize],
    cols: &[usize],
) -> DMatrix<f64> {
    let data: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|&i| {
            let xi = points.row(i);
            cols.iter().map(|&j| kernel.query(xi, points.row(j))).collect()
        })
        .collect();
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| data[a][b])
}

/// Vector `(k(x*, x_i))_i` over all rows of `points`.
pub fn cross_kernel<Q: KernelQuery + ?Sized>(
    kernel: &Q,
    points: &FeatureMatrix,
    x_star: &[f64],
) -> Result<DVector<f64>> {
    if points.cols() != x_star.len() {
        return Err(Error::input(format!(
            "query point has dimension {}, data has {}",
            x_star.len(),
            points.cols()
        )));
    }
    Ok(DVector::from_iterator(
        points.rows(),
        (0..points.rows()).map(|i| kernel.query(x_star, points.row(i))),
    ))
}
