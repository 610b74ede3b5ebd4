//! Visibility-aware basis reduction of SH color coefficients.
//!
//! Each SH basis function gets a weight `λ` equal to its mean absolute
//! response over the viewing directions of the input cameras. Coefficients
//! are scaled by `Δ = diag(λ)`, and the leading eigenvectors of the second
//! moment of `Δ·X` form the retained basis `W`:
//!
//! ```text
//! Z = Wᵀ·Δ·X        X̂ = Δ⁻¹·W·Z
//! ```

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::geometry::{self, Vec3};
use crate::model::{sh_dim, CameraView};
use crate::scalar::Real;
use crate::sh::ShBasis;

/// Floor applied to visibility weights so that `Δ⁻¹` stays bounded.
pub const VISIBILITY_FLOOR: f64 = 1e-4;

/// Default number of retained color components.
pub const DEFAULT_K: usize = 6;

/// Column-major `dim × cols` matrix; column `m` is `data[m*dim..(m+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix<T> {
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Real> CoeffMatrix<T> {
    pub fn zeros(dim: usize, cols: usize) -> Self {
        CoeffMatrix {
            dim,
            data: vec![T::zero(); dim * cols],
        }
    }

    pub fn from_columns<'a, I>(dim: usize, columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut data = Vec::new();
        for (m, col) in columns.into_iter().enumerate() {
            if col.len() != dim {
                return Err(Error::Shape(format!("column {m} has length {}, expected {dim}", col.len())));
            }
            data.extend_from_slice(col);
        }
        Ok(CoeffMatrix { dim, data })
    }

    pub fn cols(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn column(&self, m: usize) -> &[T] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    #[inline]
    pub fn column_mut(&mut self, m: usize) -> &mut [T] {
        &mut self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |s, &v| s + v * v).sqrt()
    }
}

/// Whether the basis was fitted on the raw second moment or on the
/// mean-centered covariance. The transform itself never subtracts a mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    #[default]
    Uncentered,
    Centered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VabrBasis<T> {
    pub degree: u32,
    /// Per-coefficient weights (length `d`), replicated across RGB.
    pub lambda: Vec<T>,
    /// `d × k` orthonormal columns, column-major.
    pub wmat: Vec<T>,
    pub k: usize,
    pub uncentered: bool,
}

/// A fitted basis and the full descending spectrum it was cut from.
#[derive(Debug, Clone)]
pub struct BasisFit<T> {
    pub basis: VabrBasis<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Real> VabrBasis<T> {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        let d = self.dim();
        &self.wmat[j * d..(j + 1) * d]
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize) -> T {
        self.wmat[j * self.dim() + i]
    }

    /// `λ = 1`, `W = I`: the transform is the identity with `k = d`.
    pub fn identity(degree: u32) -> Self {
        let d = sh_dim(degree);
        let mut wmat = vec![T::zero(); d * d];
        for i in 0..d {
            wmat[i * d + i] = T::one();
        }
        VabrBasis {
            degree,
            lambda: vec![T::one(); d],
            wmat,
            k: d,
            uncentered: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = sh_dim(self.degree);
        if self.lambda.len() != d {
            return Err(Error::Shape(format!("lambda has length {}, expected {d}", self.lambda.len())));
        }
        if self.k == 0 || self.k > d {
            return Err(Error::Shape(format!("k = {} outside [1, {d}]", self.k)));
        }
        if self.wmat.len() != d * self.k {
            return Err(Error::Shape(format!(
                "basis matrix has {} entries, expected {}",
                self.wmat.len(),
                d * self.k
            )));
        }
        if let Some(i) = self.lambda.iter().position(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::Validation {
                what: "visibility weight",
                index: i,
                message: format!("{} is not positive", self.lambda[i]),
            });
        }
        Ok(())
    }

    /// Largest absolute entry of `WᵀW − I`.
    pub fn orthonormality_error(&self) -> T {
        let mut worst = T::zero();
        for a in 0..self.k {
            for b in a..self.k {
                let dotp = self
                    .column(a)
                    .iter()
                    .zip(self.column(b))
                    .fold(T::zero(), |s, (&x, &y)| s + x * y);
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((dotp - target).abs());
            }
        }
        worst
    }

    pub fn cast<U: Real>(&self) -> VabrBasis<U> {
        VabrBasis {
            degree: self.degree,
            lambda: self.lambda.iter().map(|v| U::lit(v.as_f64())).collect(),
            wmat: self.wmat.iter().map(|v| U::lit(v.as_f64())).collect(),
            k: self.k,
            uncentered: self.uncentered,
        }
    }

    /// Rounds every entry to `f32`, the precision stored in containers.
    pub fn rounded_to_f32(&self) -> Self {
        self.cast::<f32>().cast()
    }
}

/// Nine world-space ray directions per view through a 3×3 grid of image
/// positions `((c+0.5)/3·W, (r+0.5)/3·H)`.
pub fn sample_directions<T: Real>(views: &[CameraView<T>]) -> Vec<Vec3<T>> {
    let mut dirs = Vec::with_capacity(views.len() * 9);
    let three = T::lit(3.0);
    for cam in views {
        let (w, h) = (T::lit(cam.width as f64), T::lit(cam.height as f64));
        for r in 0..3 {
            for c in 0..3 {
                let u = (T::from_usize_lossy(c) + T::lit(0.5)) / three * w;
                let v = (T::from_usize_lossy(r) + T::lit(0.5)) / three * h;
                let ray = [(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, T::one()];
                let world = geometry::mat_t_vec(&cam.rotation, &ray);
                dirs.push(geometry::normalize(&world));
            }
        }
    }
    dirs
}

/// Mean absolute SH response per basis function, floored at
/// [`VISIBILITY_FLOOR`] and replicated across the three color channels.
pub fn visibility_weights<T: Real>(dirs: &[Vec3<T>], degree: u32) -> Result<Vec<T>> {
    if dirs.is_empty() {
        return Err(Error::Degenerate("no viewing directions".into()));
    }
    let basis = ShBasis::new(degree)?;
    let nb = basis.len();
    let mut acc = vec![T::zero(); nb];
    let mut y = vec![T::zero(); nb];
    for dir in dirs {
        basis.eval_into(dir, &mut y);
        for (a, v) in acc.iter_mut().zip(&y) {
            *a = *a + v.abs();
        }
    }
    let n = T::from_usize_lossy(dirs.len());
    let floor = T::lit(VISIBILITY_FLOOR);
    let mut lambda = Vec::with_capacity(3 * nb);
    for a in acc {
        let l = (a / n).max(floor);
        lambda.extend([l, l, l]);
    }
    Ok(lambda)
}

/// Fits the `k` leading eigenvectors of the second moment of `Δ·X`.
///
/// Eigenvectors are ordered by descending eigenvalue (ties keep solver
/// order) and signed so their largest-magnitude entry is positive.
pub fn fit_basis_with_spectrum<T: Real>(
    x: &CoeffMatrix<T>,
    lambda: &[T],
    k: usize,
    centering: Centering,
    degree: u32,
) -> Result<BasisFit<T>> {
    let d = x.dim;
    if lambda.len() != d {
        return Err(Error::Shape(format!("lambda has length {}, matrix has {d} rows", lambda.len())));
    }
    if k == 0 || k > d {
        return Err(Error::Config(format!("k = {k} outside [1, {d}]")));
    }
    let m = x.cols();
    if m == 0 {
        return Err(Error::Degenerate("cannot fit a basis to zero Gaussians".into()));
    }

    let mut mean = vec![T::zero(); d];
    if centering == Centering::Centered {
        for col in 0..m {
            for (i, v) in x.column(col).iter().enumerate() {
                mean[i] = mean[i] + lambda[i] * *v;
            }
        }
        let mf = T::from_usize_lossy(m);
        mean.iter_mut().for_each(|v| *v = *v / mf);
    }

    let mut cov = vec![T::zero(); d * d];
    let mut y = vec![T::zero(); d];
    for col in 0..m {
        for (i, v) in x.column(col).iter().enumerate() {
            y[i] = lambda[i] * *v - mean[i];
        }
        for a in 0..d {
            let ya = y[a];
            for b in a..d {
                cov[a * d + b] = cov[a * d + b] + ya * y[b];
            }
        }
    }
    let mf = T::from_usize_lossy(m);
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / mf;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }

    let (values, vectors) = symmetric_eigen(&cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut wmat = Vec::with_capacity(d * k);
    for &j in order.iter().take(k) {
        let mut column: Vec<T> = (0..d).map(|i| vectors[i * d + j]).collect();
        let mut lead = 0;
        for i in 1..d {
            if column[i].abs() > column[lead].abs() {
                lead = i;
            }
        }
        if column[lead] < T::zero() {
            column.iter_mut().for_each(|v| *v = -*v);
        }
        wmat.extend(column);
    }
    Ok(BasisFit {
        basis: VabrBasis {
            degree,
            lambda: lambda.to_vec(),
            wmat,
            k,
            uncentered: centering == Centering::Uncentered,
        },
        eigenvalues: order.iter().map(|&j| values[j]).collect(),
    })
}

pub fn fit_basis<T: Real>(x: &CoeffMatrix<T>, lambda: &[T], k: usize, degree: u32) -> Result<VabrBasis<T>> {
    Ok(fit_basis_with_spectrum(x, lambda, k, Centering::Uncentered, degree)?.basis)
}

/// `Z = Wᵀ·Δ·X`
pub fn vabr_forward<T: Real>(x: &CoeffMatrix<T>, basis: &VabrBasis<T>) -> Result<CoeffMatrix<T>> {
    let d = basis.dim();
    if x.dim != d {
        return Err(Error::Shape(format!("input has {} rows, basis expects {d}", x.dim)));
    }
    let mut z = CoeffMatrix::zeros(basis.k, x.cols());
    let mut scaled = vec![T::zero(); d];
    for m in 0..x.cols() {
        for (i, v) in x.column(m).iter().enumerate() {
            scaled[i] = basis.lambda[i] * *v;
        }
        let out = z.column_mut(m);
        for (j, o) in out.iter_mut().enumerate() {
            *o = basis
                .column(j)
                .iter()
                .zip(&scaled)
                .fold(T::zero(), |s, (&w, &v)| s + w * v);
        }
    }
    Ok(z)
}

/// `X̂ = Δ⁻¹·W·Z`
pub fn vabr_inverse<T: Real>(z: &CoeffMatrix<T>, basis: &VabrBasis<T>) -> Result<CoeffMatrix<T>> {
    let d = basis.dim();
    if z.dim != basis.k {
        return Err(Error::Shape(format!("input has {} rows, basis has k = {}", z.dim, basis.k)));
    }
    let mut x = CoeffMatrix::zeros(d, z.cols());
    for m in 0..z.cols() {
        let zc = z.column(m);
        let out = x.column_mut(m);
        for (j, &zj) in zc.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(basis.column(j)) {
                *o = *o + w * zj;
            }
        }
        for (o, &l) in out.iter_mut().zip(&basis.lambda) {
            *o = *o / l;
        }
    }
    Ok(x)
}
