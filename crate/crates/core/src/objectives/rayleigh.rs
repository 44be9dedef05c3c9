use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_point, standard_normal_vec, BatchSampler, BatchSize, GradientSample, NoiseThirdMoment, StochasticObjective};
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, psd_sqrt, Matrix, SymmetricEigen, Tensor3};
use crate::rng::StreamKey;

const BINARY_MAGIC: &[u8; 8] = b"SDLRQ001";

/// Recipe for a seeded Rayleigh-quotient dataset.
///
/// The base matrices are `Qᵀ D_i Q` with one random orthogonal `Q` shared by
/// the dataset and diagonal `D_i[k] = lo + (hi − lo)·k/(d−1) + s·u_ik`,
/// `u_ik ~ U[0,1]`. The defaults (`lo = hi = 0`, `s = 1`) give
/// `D_i ~ U[0,1]^d`.
///
/// With `extra_atoms = m > 0`, each matrix also gets `Σ_j c_ij w_j w_jᵀ` over
/// `m` fixed random unit directions `w_j` with `c_ij = extra_scale·U[0,1]`.
/// Without them every `A_i` shares the eigenvectors of `Q`, and the gradient
/// noise vanishes at those eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayleighDatasetSpec {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub spectrum: [f64; 2],
    #[serde(default = "default_scale")]
    pub diag_noise: f64,
    #[serde(default)]
    pub extra_atoms: usize,
    #[serde(default = "default_scale")]
    pub extra_scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl RayleighDatasetSpec {
    pub fn new(dim: usize, samples: usize, seed: u64) -> Self {
        Self { dim, samples, seed, spectrum: [0.0, 0.0], diag_noise: 1.0, extra_atoms: 0, extra_scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(invalid("Rayleigh dataset needs d ≥ 2"));
        }
        if self.samples == 0 || self.samples > 1_000_000 {
            return Err(invalid("Rayleigh dataset needs 1 ≤ N ≤ 10⁶"));
        }
        if self.extra_atoms > 64 * self.dim {
            return Err(invalid("at most 64·d extra atoms"));
        }
        let [lo, hi] = self.spectrum;
        let ok = [lo, hi, self.diag_noise, self.extra_scale].iter().all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(invalid("spectrum, diag_noise and extra_scale must be finite and ≥ 0"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<RayleighQuotientObjective> {
        self.validate()?;
        let d = self.dim;
        let k = d + self.extra_atoms;
        let mut rng = StreamKey::new(self.seed, "rayleigh-dataset").stream(0);
        let basis = random_orthogonal(d, &mut rng);
        let mut rows = basis.to_rows();
        for _ in 0..self.extra_atoms {
            let w = standard_normal_vec(d, &mut rng);
            let n = dot(&w, &w).sqrt();
            rows.push(w.into_iter().map(|v| v / n).collect());
        }
        let atoms = Matrix::from_rows(&rows)?;
        let [lo, hi] = self.spectrum;
        let mut coeffs = Vec::with_capacity(self.samples * k);
        for _ in 0..self.samples {
            for j in 0..d {
                let base = lo + (hi - lo) * j as f64 / (d - 1) as f64;
                coeffs.push(base + self.diag_noise * rng.random::<f64>());
            }
            for _ in 0..self.extra_atoms {
                coeffs.push(self.extra_scale * rng.random::<f64>());
            }
        }
        RayleighQuotientObjective::from_atom_parts(atoms, coeffs)
    }
}

/// Rows of a random orthogonal matrix, by Gram–Schmidt on Gaussian rows.
fn random_orthogonal(d: usize, rng: &mut dyn RngCore) -> Matrix {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v = standard_normal_vec(d, rng);
        for _ in 0..2 {
            for r in &rows {
                let c = dot(&v, r);
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= c * ri;
                }
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-6 {
            rows.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Matrix::from_rows(&rows).expect("square")
}

/// `A_i = Σ_j c_ij u_j u_jᵀ` with `c_ij ≥ 0`.
#[derive(Debug, Clone)]
struct Atoms {
    /// `K × d`, row `j` is `u_j`.
    u: Matrix,
    /// `N × K`.
    coeffs: Vec<f64>,
    mean: Vec<f64>,
    /// Covariance of the coefficient rows over the dataset, `K × K`.
    cov: Matrix,
    cov_root: Matrix,
    /// `U Uᵀ`.
    gram: Matrix,
}

impl Atoms {
    fn k(&self) -> usize {
        self.u.rows()
    }

    fn row(&self, i: usize) -> &[f64] {
        let k = self.k();
        &self.coeffs[i * k..(i + 1) * k]
    }

    /// `[Uᵀ(c∘p) − (Σ c p²/q) x] / q`, the gradient for coefficients `c`.
    fn gradient(&self, x: &[f64], p: &[f64], q: f64, c: &[f64]) -> Vec<f64> {
        let cp: Vec<f64> = c.iter().zip(p).map(|(a, b)| a * b).collect();
        let v = self.u.tr_matvec(&cp);
        let f = dot(&cp, p);
        v.iter().zip(x).map(|(vi, xi)| (vi - f / q * xi) / q).collect()
    }

    /// `P_x Uᵀ(w∘p) / q`, with `P_x` the projection orthogonal to `x`.
    fn projected(&self, x: &[f64], p: &[f64], q: f64, w: &[f64]) -> Vec<f64> {
        let wp: Vec<f64> = w.iter().zip(p).map(|(a, b)| a * b).collect();
        let v = self.u.tr_matvec(&wp);
        let c = dot(&v, x) / q;
        v.iter().zip(x).map(|(vi, xi)| (vi - c * xi) / q).collect()
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Atoms(Atoms),
    Dense(Vec<Matrix>),
}

/// Finite-dataset Rayleigh quotient `L_i(x) = xᵀA_i x / (2 xᵀx)`.
///
/// Every per-sample loss is scale invariant, so the gradient is orthogonal to
/// `x` and undefined at the origin. Noise moments are exact averages over the
/// dataset.
///
/// Generated datasets are stored as nonnegative combinations of rank-one
/// atoms, which makes the noise covariance a `K × K` computation instead of
/// a pass over all `N` samples. Datasets loaded from files are stored densely.
#[derive(Debug, Clone)]
pub struct RayleighQuotientObjective {
    storage: Storage,
    dim: usize,
    samples: usize,
    /// Dataset mean `Ā`.
    mean: Matrix,
}

impl RayleighQuotientObjective {
    /// Dataset given explicitly; every matrix must be symmetric PSD.
    pub fn from_matrices(matrices: Vec<Matrix>) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| invalid("empty Rayleigh dataset"))?;
        let d = first.rows();
        if d == 0 {
            return Err(invalid("Rayleigh matrices must be at least 1×1"));
        }
        let mut mean = Matrix::zeros(d, d);
        let w = 1.0 / matrices.len() as f64;
        for m in &matrices {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.rows() });
            }
            if !m.is_finite() || !m.is_symmetric(1e-12 * m.max_abs().max(1.0)) {
                return Err(invalid("Rayleigh matrices must be finite and symmetric"));
            }
            let e = SymmetricEigen::new(m)?;
            if e.min_value() < -1e-10 * e.max_abs_value().max(1.0) {
                return Err(invalid("Rayleigh matrices must be positive semidefinite"));
            }
            mean.add_scaled(w, m);
        }
        mean.symmetrize();
        let samples = matrices.len();
        Ok(Self { storage: Storage::Dense(matrices), dim: d, samples, mean })
    }

    /// Dataset `A_i = Σ_j c_ij u_j u_jᵀ` given the atoms `u_j` (rows of
    /// `atoms`) and one row of nonnegative coefficients per sample.
    pub fn from_atoms(atoms: Matrix, coefficients: &[Vec<f64>]) -> Result<Self> {
        let k = atoms.rows();
        let mut flat = Vec::with_capacity(coefficients.len() * k);
        for row in coefficients {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: row.len() });
            }
            flat.extend_from_slice(row);
        }
        Self::from_atom_parts(atoms, flat)
    }

    fn from_atom_parts(u: Matrix, coeffs: Vec<f64>) -> Result<Self> {
        let (k, d) = (u.rows(), u.cols());
        if k == 0 || d == 0 || coeffs.is_empty() || !coeffs.len().is_multiple_of(k) {
            return Err(invalid("atom dataset needs K ≥ 1 atoms and N ≥ 1 coefficient rows"));
        }
        if !u.is_finite() || !coeffs.iter().all(|c| c.is_finite() && *c >= 0.0) {
            return Err(invalid("atoms must be finite and coefficients finite and ≥ 0"));
        }
        let n = coeffs.len() / k;
        let w = 1.0 / n as f64;
        let mut mean = vec![0.0; k];
        for row in coeffs.chunks(k) {
            for (m, c) in mean.iter_mut().zip(row) {
                *m += w * c;
            }
        }
        let mut cov = Matrix::zeros(k, k);
        let mut delta = vec![0.0; k];
        for row in coeffs.chunks(k) {
            for j in 0..k {
                delta[j] = row[j] - mean[j];
            }
            cov.add_outer(w, &delta);
        }
        cov.symmetrize();
        let cov_root = psd_sqrt(&cov)?;
        let gram = u.matmul(&u.transpose());
        let mut mean_matrix = u.transpose().matmul(&Matrix::from_diag(&mean)).matmul(&u);
        mean_matrix.symmetrize();
        let atoms = Atoms { u, coeffs, mean, cov, cov_root, gram };
        Ok(Self { storage: Storage::Atoms(atoms), dim: d, samples: n, mean: mean_matrix })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Dataset mean `Ā`.
    pub fn mean_matrix(&self) -> &Matrix {
        &self.mean
    }

    /// `A_i`.
    pub fn matrix(&self, i: usize) -> Matrix {
        match &self.storage {
            Storage::Dense(ms) => ms[i].clone(),
            Storage::Atoms(a) => {
                let mut m = a.u.transpose().matmul(&Matrix::from_diag(a.row(i))).matmul(&a.u);
                m.symmetrize();
                m
            }
        }
    }

    pub fn matrices(&self) -> Vec<Matrix> {
        (0..self.samples).map(|i| self.matrix(i)).collect()
    }

    fn sq_norm(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim)?;
        let q = dot(x, x);
        if q == 0.0 {
            return Err(Error::Origin);
        }
        Ok(q)
    }

    /// Calls `f` with `∇L_i(x) − ∇L(x)` for every sample.
    fn for_each_centered(&self, x: &[f64], mut f: impl FnMut(&[f64])) -> Result<()> {
        let q = self.sq_norm(x)?;
        match &self.storage {
            Storage::Atoms(a) => {
                let p = a.u.matvec(x);
                let mut delta = vec![0.0; a.k()];
                for i in 0..self.samples {
                    for (j, dj) in delta.iter_mut().enumerate() {
                        *dj = a.row(i)[j] - a.mean[j];
                    }
                    f(&a.projected(x, &p, q, &delta));
                }
            }
            Storage::Dense(ms) => {
                let mean = dense_gradient(&self.mean, x, q);
                for m in ms {
                    let g: Vec<f64> = dense_gradient(m, x, q).iter().zip(&mean).map(|(a, b)| a - b).collect();
                    f(&g);
                }
            }
        }
        Ok(())
    }

    /// Gradient averaged over the given dataset indices, duplicates counted.
    pub fn gradient_on_batch(&self, x: &[f64], ids: &[usize]) -> Result<Vec<f64>> {
        if ids.is_empty() {
            return Err(Error::InvalidBatchSize(0.0));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.samples) {
            return Err(invalid(format!("sample index {bad} out of range")));
        }
        let q = self.sq_norm(x)?;
        let w = 1.0 / ids.len() as f64;
        match &self.storage {
            Storage::Atoms(a) => {
                let mut c = vec![0.0; a.k()];
                for &i in ids {
                    for (cj, rj) in c.iter_mut().zip(a.row(i)) {
                        *cj += w * rj;
                    }
                }
                Ok(a.gradient(x, &a.u.matvec(x), q, &c))
            }
            Storage::Dense(ms) => {
                let mut acc = vec![0.0; self.dim];
                for &i in ids {
                    for (s, g) in acc.iter_mut().zip(dense_gradient(&ms[i], x, q)) {
                        *s += w * g;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Per-sample loss `L_i(x)`.
    pub fn sample_loss(&self, i: usize, x: &[f64]) -> Result<f64> {
        let q = self.sq_norm(x)?;
        if i >= self.samples {
            return Err(invalid(format!("sample index {i} out of range")));
        }
        let f = match &self.storage {
            Storage::Atoms(a) => a.row(i).iter().zip(a.u.matvec(x)).map(|(c, p)| c * p * p).sum(),
            Storage::Dense(ms) => dot(x, &ms[i].matvec(x)),
        };
        Ok(f / (2.0 * q))
    }

    /// Flat little-endian dump: magic `SDLRQ001`, `u64` N, `u64` d, then the
    /// N matrices row-major as `f64`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.samples as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for m in self.matrices() {
            for v in m.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(invalid("not a Rayleigh dataset file"));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let d = u64::from_le_bytes(word) as usize;
        if n == 0 || d == 0 || n.saturating_mul(d).saturating_mul(d) > 1 << 30 {
            return Err(invalid("implausible dataset header"));
        }
        let mut matrices = Vec::with_capacity(n);
        for _ in 0..n {
            let mut data = Vec::with_capacity(d * d);
            for _ in 0..d * d {
                r.read_exact(&mut word)?;
                data.push(f64::from_le_bytes(word));
            }
            matrices.push(Matrix::from_row_major(d, d, data)?);
        }
        Self::from_matrices(matrices)
    }

    /// Long-format CSV `index,row,col,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "index,row,col,value")?;
        for (i, m) in self.matrices().iter().enumerate() {
            for r in 0..self.dim {
                for c in 0..self.dim {
                    writeln!(w, "{i},{r},{c},{}", m[(r, c)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let r = BufReader::new(std::fs::File::open(path)?);
        let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "index,row,col,value" {
                    return Err(invalid("dataset CSV must start with header index,row,col,value"));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || invalid(format!("malformed dataset CSV line {}", lineno + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let p = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
            let v = f[3].trim().parse::<f64>().map_err(|_| bad())?;
            entries.push((p(f[0])?, p(f[1])?, p(f[2])?, v));
        }
        let n = entries.iter().map(|e| e.0 + 1).max().ok_or_else(|| invalid("empty dataset CSV"))?;
        let d = entries.iter().map(|e| e.1.max(e.2) + 1).max().unwrap_or(0);
        if entries.len() != n * d * d {
            return Err(invalid("dataset CSV does not list every matrix entry exactly once"));
        }
        let mut data = vec![vec![f64::NAN; d * d]; n];
        for (i, r, c, v) in entries {
            data[i][r * d + c] = v;
        }
        let matrices = data.into_iter().map(|m| Matrix::from_row_major(d, d, m)).collect::<Result<Vec<_>>>()?;
        if matrices.iter().any(|m| !m.is_finite()) {
            return Err(invalid("dataset CSV has missing or non-finite entries"));
        }
        Self::from_matrices(matrices)
    }
}


/// `(A x − (xᵀA x / q) x) / q`.
fn dense_gradient(a: &Matrix, x: &[f64], q: f64) -> Vec<f64> {
    let ax = a.matvec(x);
    let two_l = dot(x, &ax) / q;
    ax.iter().zip(x).map(|(v, xi)| (v - two_l * xi) / q).collect()
}

impl StochasticObjective for RayleighQuotientObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn family(&self) -> &'static str {
        "rayleigh"
    }

    fn is_scale_invariant(&self) -> bool {
        true
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        let q = self.sq_norm(x)?;
        Ok(dot(x, &self.mean.matvec(x)) / (2.0 * q))
    }

    fn expected_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.sq_norm(x)?;
        Ok(dense_gradient(&self.mean, x, q))
    }

    fn noise_covariance(&self, x: &[f64], batch: BatchSize) -> Result<Matrix> {
        let b = batch.count()? as f64;
        let q = self.sq_norm(x)?;
        let d = self.dim;
        let mut out = match &self.storage {
            Storage::Atoms(a) => {
                // P M P / q² with M = Uᵀ diag(p) C diag(p) U
                let p = a.u.matvec(x);
                let k = a.k();
                let mut w = a.cov.clone();
                for i in 0..k {
                    for j in 0..k {
                        w[(i, j)] *= p[i] * p[j];
                    }
                }
                let m = a.u.transpose().matmul(&w).matmul(&a.u);
                let mx = m.matvec(x);
                let xmx = dot(x, &mx);
                let mut s = Matrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        s[(i, j)] = (m[(i, j)] - (x[i] * mx[j] + mx[i] * x[j]) / q + xmx / (q * q) * x[i] * x[j])
                            / (q * q * b);
                    }
                }
                s
            }
            Storage::Dense(_) => {
                let mut cov = Matrix::zeros(d, d);
                let w = 1.0 / (self.samples as f64 * b);
                self.for_each_centered(x, |row| cov.add_outer(w, row))?;
                cov
            }
        };
        out.symmetrize();
        Ok(out)
    }

    fn noise_trace(&self, x: &[f64], batch: BatchSize) -> Result<f64> {
        let b = batch.count()? as f64;
        let q = self.sq_norm(x)?;
        match &self.storage {
            Storage::Atoms(a) => {
                // (Tr M − xᵀM x / q) / q²
                let p = a.u.matvec(x);
                let k = a.k();
                let (mut tr, mut pwp) = (0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        let wij = a.cov[(i, j)] * p[i] * p[j];
                        tr += wij * a.gram[(i, j)];
                        pwp += wij * p[i] * p[j];
                    }
                }
                Ok(((tr - pwp / q) / (q * q * b)).max(0.0))
            }
            Storage::Dense(_) => {
                let mut s = 0.0;
                self.for_each_centered(x, |row| s += dot(row, row))?;
                Ok(s / (self.samples as f64 * b))
            }
        }
    }

    fn hessian_vector_product(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let q = self.sq_norm(x)?;
        check_point(v, self.dim)?;
        let a = &self.mean;
        let ax = a.matvec(x);
        let av = a.matvec(v);
        let f = dot(x, &ax);
        let xv = dot(x, v);
        let axv = dot(&ax, v);
        let q2 = q * q;
        let q3 = q2 * q;
        Ok((0..self.dim)
            .map(|k| {
                av[k] / q - 2.0 / q2 * (ax[k] * xv + x[k] * axv) - f / q2 * v[k] + 4.0 * f / q3 * x[k] * xv
            })
            .collect())
    }

    /// Exact: `(1/N) Σ_i (∇L_i − ∇L)^{⊗3} / B²`.
    fn noise_third_moment(&self, x: &[f64], batch: BatchSize) -> Result<NoiseThirdMoment> {
        let b = batch.count()? as f64;
        let w = 1.0 / (self.samples as f64 * b * b);
        let mut t = Tensor3::zeros(self.dim);
        self.for_each_centered(x, |row| t.add_scaled(w, &Tensor3::cube(row)))?;
        Ok(NoiseThirdMoment { tensor: t })
    }

    fn sample_gradient(
        &self,
        x: &[f64],
        batch: BatchSize,
        sampler: &mut BatchSampler,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample> {
        let b = batch.count()?;
        let ids = sampler.draw(self.samples, b, rng)?;
        let gradient = self.gradient_on_batch(x, &ids)?;
        Ok(GradientSample { gradient, batch_ids: ids })
    }

    /// Exact draw from `N(0, Σ^B(x))`: for atom datasets
    /// `P_x Uᵀ(p ∘ C^{1/2} z) / (q √B)`, otherwise
    /// `Σ_i ξ_i (∇L_i − ∇L) / √(N B)`.
    fn sample_gaussian_noise(&self, x: &[f64], batch: BatchSize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let b = batch.count()? as f64;
        let q = self.sq_norm(x)?;
        match &self.storage {
            Storage::Atoms(a) => {
                let z = standard_normal_vec(a.k(), rng);
                let w = a.cov_root.matvec(&z);
                let s = 1.0 / b.sqrt();
                Ok(a.projected(x, &a.u.matvec(x), q, &w).into_iter().map(|v| v * s).collect())
            }
            Storage::Dense(_) => {
                let mut acc = vec![0.0; self.dim];
                self.for_each_centered(x, |row| {
                    let xi: f64 = rng.sample(StandardNormal);
                    for (a, r) in acc.iter_mut().zip(row) {
                        *a += xi * r;
                    }
                })?;
                let s = 1.0 / (self.samples as f64 * b).sqrt();
                Ok(acc.into_iter().map(|a| a * s).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sq;
    use crate::objectives::SamplingMode;

    fn single(diag: &[f64]) -> RayleighQuotientObjective {
        RayleighQuotientObjective::from_matrices(vec![Matrix::from_diag(diag)]).unwrap()
    }

    fn small() -> RayleighQuotientObjective {
        let mut spec = RayleighDatasetSpec::new(5, 30, 11);
        spec.extra_atoms = 3;
        spec.build().unwrap()
    }

    #[test]
    fn single_matrix_closed_form() {
        let r = single(&[2.0, 0.0]);
        assert!((r.loss(&[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        let g = r.expected_gradient(&[1.0, 1.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] + 0.5).abs() < 1e-15);
        assert_eq!(dot(&g, &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn origin_is_an_error() {
        let r = small();
        let z = vec![0.0; 5];
        assert!(matches!(r.expected_gradient(&z), Err(Error::Origin)));
        assert!(matches!(r.hessian_vector_product(&z, &z), Err(Error::Origin)));
        assert!(matches!(r.noise_covariance(&z, BatchSize::default()), Err(Error::Origin)));
    }

    #[test]
    fn generated_matrices_are_psd_and_match_mean() {
        let r = small();
        let mut mean = Matrix::zeros(5, 5);
        for m in r.matrices() {
            assert!(SymmetricEigen::new(&m).unwrap().min_value() > -1e-12);
            mean.add_scaled(1.0 / 30.0, &m);
        }
        assert!(mean.max_abs_diff(r.mean_matrix()) < 1e-13);
    }

    #[test]
    fn dense_and_factored_storage_agree() {
        let r = small();
        let dense = RayleighQuotientObjective::from_matrices(r.matrices()).unwrap();
        let x = [0.3, -1.0, 0.7, 2.0, 0.1];
        let b = BatchSize::new(3.0).unwrap();
        let g1 = r.gradient_on_batch(&x, &[0, 4, 4, 17]).unwrap();
        let g2 = dense.gradient_on_batch(&x, &[0, 4, 4, 17]).unwrap();
        for (a, c) in g1.iter().zip(&g2) {
            assert!((a - c).abs() < 1e-13);
        }
        let c1 = r.noise_covariance(&x, b).unwrap();
        let c2 = dense.noise_covariance(&x, b).unwrap();
        assert!(c1.max_abs_diff(&c2) < 1e-13);
        let t1 = r.noise_third_moment(&x, b).unwrap().tensor;
        let t2 = dense.noise_third_moment(&x, b).unwrap().tensor;
        assert!(t1.max_abs_diff(&t2) < 1e-13);
    }

    #[test]
    fn covariance_annihilates_x_and_matches_trace() {
        let r = small();
        let x = [1.0, 2.0, -0.5, 0.0, 0.3];
        let c = r.noise_covariance(&x, BatchSize::default()).unwrap();
        let xcx = dot(&x, &c.matvec(&x));
        assert!(xcx.abs() <= 1e-12 * c.frobenius_norm() * norm_sq(&x));
        let tr = r.noise_trace(&x, BatchSize::default()).unwrap();
        assert!((tr - c.trace()).abs() < 1e-14 * tr.max(1.0));
    }

    #[test]
    fn hvp_matches_finite_differences() {
        let r = small();
        let x = [0.4, -1.2, 0.9, 0.5, 1.1];
        let v = [1.0, 0.5, -0.3, 0.2, -0.8];
        let hv = r.hessian_vector_product(&x, &v).unwrap();
        let h = 1e-5;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let gp = r.expected_gradient(&xp).unwrap();
        let gm = r.expected_gradient(&xm).unwrap();
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err: f64 = hv.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * norm_sq(&hv).sqrt());
    }

    #[test]
    fn hessian_along_gradient_identity() {
        let r = small();
        let x = [0.4, -1.2, 0.9, 0.5, 1.1];
        let g = r.expected_gradient(&x).unwrap();
        let hg = r.hessian_vector_product(&x, &g).unwrap();
        assert!((dot(&x, &hg) + norm_sq(&g)).abs() < 1e-12 * norm_sq(&g));
    }

    #[test]
    fn gaussian_noise_has_the_enumerated_covariance() {
        let r = small();
        let x = [0.4, -1.2, 0.9, 0.5, 1.1];
        let b = BatchSize::new(2.0).unwrap();
        let c = r.noise_covariance(&x, b).unwrap();
        let mut rng = StreamKey::new(3, "noise").stream(0);
        let n = 40_000;
        let mut emp = Matrix::zeros(5, 5);
        for _ in 0..n {
            let z = r.sample_gaussian_noise(&x, b, &mut rng).unwrap();
            emp.add_outer(1.0 / n as f64, &z);
        }
        // entrywise 5 standard errors of a Wishart entry
        for i in 0..5 {
            for j in 0..5 {
                let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / n as f64).sqrt();
                assert!((emp[(i, j)] - c[(i, j)]).abs() < 5.0 * se + 1e-15);
            }
        }
    }

    #[test]
    fn dataset_round_trips_through_files() {
        let r = small();
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("d.bin");
        let csv = dir.path().join("d.csv");
        r.write_binary(&bin).unwrap();
        r.write_csv(&csv).unwrap();
        let a = RayleighQuotientObjective::read_binary(&bin).unwrap();
        let b = RayleighQuotientObjective::read_csv(&csv).unwrap();
        for i in 0..r.samples() {
            assert_eq!(a.matrix(i), r.matrix(i));
            assert_eq!(b.matrix(i), r.matrix(i));
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = RayleighDatasetSpec::new(4, 10, 5).build().unwrap();
        let b = RayleighDatasetSpec::new(4, 10, 5).build().unwrap();
        let c = RayleighDatasetSpec::new(4, 10, 6).build().unwrap();
        assert_eq!(a.matrix(3), b.matrix(3));
        assert_ne!(a.matrix(3), c.matrix(3));
    }

    #[test]
    fn sampled_gradient_is_orthogonal_and_scale_covariant() {
        let r = small();
        let mut rng = StreamKey::new(9, "s").stream(0);
        let mut s = BatchSampler::new(SamplingMode::WithReplacement);
        let x = [0.4, -1.2, 0.9, 0.5, 1.1];
        let g = r.sample_gradient(&x, BatchSize::new(4.0).unwrap(), &mut s, &mut rng).unwrap();
        assert!(dot(&g.gradient, &x).abs() < 1e-12 * norm_sq(&g.gradient).sqrt());
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let g2 = r.gradient_on_batch(&x2, &g.batch_ids).unwrap();
        for (a, b) in g.gradient.iter().zip(&g2) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }
}
