//! Seeded generators for designs, signals and oblivious noise.
//!
//! Every generator is a pure function of its parameters and a [`Seed`].

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{PcaProblem, RegressionProblem};
use crate::linalg::{DenseMatrix, DenseVector};

/// Magnitude of the planted outliers in the deterministic-noise model.
pub const DETERMINISTIC_OUTLIER: f64 = 1e6;

/// Hidden entries in the completion scenario carry noise of this many
/// multiples of `rho / n`.
pub const COMPLETION_HIDDEN_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for the stream labelled `tag`.
    pub fn derive(self, tag: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// Uniform on `[-zeta, zeta]` with probability `alpha`, otherwise a
    /// symmetric heavy-tailed value outside that interval.
    SymmetricMixture,
    /// Centered normal calibrated so that `P(|eta| <= zeta) = alpha`.
    Gaussian,
    /// `floor(alpha n)` bounded entries, the rest huge.
    DeterministicSparseOutliers,
    /// Even-integer law of the lower-bound construction.
    LbGeometricEven,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub alpha: f64,
    pub zeta: f64,
    pub outlier_scale: f64,
    pub xi: Option<f64>,
}

impl NoiseSpec {
    pub fn mixture(alpha: f64, zeta: f64, outlier_scale: f64) -> Self {
        Self { family: NoiseFamily::SymmetricMixture, alpha, zeta, outlier_scale, xi: None }
    }

    pub fn gaussian(alpha: f64, zeta: f64) -> Self {
        Self { family: NoiseFamily::Gaussian, alpha, zeta, outlier_scale: 1.0, xi: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::pre(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.zeta >= 0.0) || !self.zeta.is_finite() {
            return Err(Error::pre(format!("zeta must be non-negative, got {}", self.zeta)));
        }
        if !(self.outlier_scale > 0.0) || !self.outlier_scale.is_finite() {
            return Err(Error::pre(format!("outlier_scale must be positive, got {}", self.outlier_scale)));
        }
        if self.family == NoiseFamily::Gaussian && self.zeta == 0.0 && self.alpha < 1.0 {
            return Err(Error::pre("gaussian noise with zeta = 0 cannot have alpha < 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    KSparseVector,
    RankRFlatMatrix,
    LbBlockMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    /// `k` for vectors, `r` for matrices.
    pub size: usize,
    pub magnitude: f64,
    pub rho_over_n: f64,
}

fn cholesky_factor(sigma: &DenseMatrix) -> Result<DenseMatrix> {
    if !sigma.is_square() {
        return Err(Error::pre("covariance must be square"));
    }
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-12 * sigma.amax().max(1.0) {
        return Err(Error::Numeric(format!("covariance is not symmetric (max asymmetry {asym:e})")));
    }
    sigma
        .clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Numeric("covariance is not positive definite (Cholesky failed)".into()))
}

/// `n` i.i.d. rows from `N(0, sigma)`.
pub fn gen_gaussian_design(n: usize, d: usize, sigma: &DenseMatrix, seed: Seed) -> Result<DenseMatrix> {
    if sigma.nrows() != d {
        return Err(Error::pre(format!("covariance is {}x{}, expected {d}x{d}", sigma.nrows(), sigma.ncols())));
    }
    let chol = cholesky_factor(sigma)?;
    let mut rng = seed.rng();
    // Row-major draw order keeps the first rows stable when n grows.
    let mut z = DenseMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            z[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(z * chol.transpose())
}

/// A `k`-sparse vector with uniformly random support and entries
/// `+-magnitude`. The support is returned sorted.
pub fn gen_sparse_signal(d: usize, k: usize, magnitude: f64, seed: Seed) -> Result<(DenseVector, Vec<usize>)> {
    if k < 1 || k > d {
        return Err(Error::pre(format!("need 1 <= k <= d, got k = {k}, d = {d}")));
    }
    let mut rng = seed.rng();
    let mut support = index::sample(&mut rng, d, k).into_vec();
    support.sort_unstable();
    let mut beta = DenseVector::zeros(d);
    for &j in &support {
        beta[j] = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    }
    Ok((beta, support))
}

fn gaussian_sigma(alpha: f64, zeta: f64) -> f64 {
    if alpha >= 1.0 || zeta == 0.0 {
        return 0.0;
    }
    let std = Normal::new(0.0, 1.0).expect("valid standard normal");
    zeta / std.inverse_cdf(0.5 * (1.0 + alpha))
}

/// Entry sampler for the random oblivious families.
struct EntrySampler {
    family: NoiseFamily,
    alpha: f64,
    zeta: f64,
    outlier_scale: f64,
    sigma: f64,
}

impl EntrySampler {
    fn new(spec: &NoiseSpec) -> Result<Self> {
        spec.validate()?;
        match spec.family {
            NoiseFamily::SymmetricMixture | NoiseFamily::Gaussian => Ok(Self {
                family: spec.family,
                alpha: spec.alpha,
                zeta: spec.zeta,
                outlier_scale: spec.outlier_scale,
                sigma: gaussian_sigma(spec.alpha, spec.zeta),
            }),
            other => Err(Error::pre(format!("{other:?} is not an i.i.d. oblivious family"))),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.sigma * z
            }
            _ => {
                let inlier = rng.random_bool(self.alpha);
                if inlier {
                    if self.zeta == 0.0 {
                        0.0
                    } else {
                        rng.random_range(-self.zeta..=self.zeta)
                    }
                } else {
                    let c: f64 = Cauchy::new(0.0, 1.0).expect("valid Cauchy").sample(rng);
                    let magnitude = self.zeta + self.outlier_scale * c.abs();
                    if rng.random_bool(0.5) {
                        magnitude
                    } else {
                        -magnitude
                    }
                }
            }
        }
    }
}

pub fn gen_oblivious_noise_vector(n: usize, spec: &NoiseSpec, seed: Seed) -> Result<DenseVector> {
    let sampler = EntrySampler::new(spec)?;
    let mut rng = seed.rng();
    Ok(DenseVector::from_fn(n, |_, _| sampler.draw(&mut rng)))
}

/// `n x n` matrix of i.i.d. entries, drawn in column-major order.
pub fn gen_oblivious_noise_matrix(n: usize, spec: &NoiseSpec, seed: Seed) -> Result<DenseMatrix> {
    let sampler = EntrySampler::new(spec)?;
    let mut rng = seed.rng();
    Ok(DenseMatrix::from_fn(n, n, |_, _| sampler.draw(&mut rng)))
}

/// Exactly `floor(alpha n)` entries uniform on `[-1, 1]`; the remaining
/// entries have magnitude [`DETERMINISTIC_OUTLIER`] with alternating signs.
pub fn gen_deterministic_outlier_noise(n: usize, alpha: f64, seed: Seed) -> Result<DenseVector> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::pre(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let good = (alpha * n as f64).floor() as usize;
    if good < 1 {
        return Err(Error::pre(format!("floor(alpha n) must be at least 1 (alpha = {alpha}, n = {n})")));
    }
    let mut rng = seed.rng();
    let mut inliers = index::sample(&mut rng, n, good).into_vec();
    inliers.sort_unstable();
    let mut eta = DenseVector::zeros(n);
    let mut next = inliers.iter().peekable();
    let mut flip = false;
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
            eta[i] = rng.random_range(-1.0..=1.0);
        } else {
            eta[i] = if flip { -DETERMINISTIC_OUTLIER } else { DETERMINISTIC_OUTLIER };
            flip = !flip;
        }
    }
    Ok(eta)
}

/// Dispatches to the vector generator of the family in `spec`.
pub fn gen_noise_vector(n: usize, spec: &NoiseSpec, seed: Seed) -> Result<DenseVector> {
    match spec.family {
        NoiseFamily::DeterministicSparseOutliers => gen_deterministic_outlier_noise(n, spec.alpha, seed),
        NoiseFamily::LbGeometricEven => Err(Error::pre("the even-integer law is only defined for matrices")),
        _ => gen_oblivious_noise_vector(n, spec, seed),
    }
}

/// Sizes of `r` contiguous row blocks covering `n` rows; the first
/// `n mod r` blocks are one row longer.
pub fn block_sizes(n: usize, r: usize) -> Vec<usize> {
    (0..r).map(|k| n / r + usize::from(k < n % r)).collect()
}

/// Flat rank-`r` matrix: `rho_over_n * sum_k u_k v_k^T` with `u_k` a
/// random-sign indicator of row block `k` and `v_k` uniform in `{+-1}^n`.
pub fn gen_flat_lowrank(n: usize, r: usize, rho_over_n: f64, seed: Seed) -> Result<DenseMatrix> {
    if r < 1 || r > n {
        return Err(Error::pre(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    if !(rho_over_n > 0.0) || !rho_over_n.is_finite() {
        return Err(Error::pre(format!("rho/n must be positive, got {rho_over_n}")));
    }
    let mut rng = seed.rng();
    let mut sign = || if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut l = DenseMatrix::zeros(n, n);
    let mut row = 0;
    for size in block_sizes(n, r) {
        let u: Vec<f64> = (0..size).map(|_| sign()).collect();
        let v: Vec<f64> = (0..n).map(|_| sign()).collect();
        for (a, ua) in u.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                l[(row + a, j)] = rho_over_n * ua * vj;
            }
        }
        row += size;
    }
    Ok(l)
}

/// Parameters `(a, q)` of the law `P[N = l] = a q^{|l|/2}` on even `l`.
///
/// Valid whenever `xi sqrt(r / n) <= 1`; the error analysis of the
/// construction assumes additionally `xi <= 1/2`.
pub fn lb_noise_law(n: usize, r: usize, xi: f64) -> Result<(f64, f64)> {
    if r < 1 || r > n {
        return Err(Error::pre(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    let t = xi * (r as f64 / n as f64).sqrt();
    if !(xi > 0.0) || !(t <= 1.0) {
        return Err(Error::pre(format!("need 0 < xi and xi sqrt(r/n) <= 1, got xi = {xi}, n = {n}, r = {r}")));
    }
    let a = t / (2.0 - t);
    Ok((a, 1.0 - t))
}

/// `n x n` i.i.d. entries from the even-integer law.
pub fn gen_lb_noise(n: usize, r: usize, xi: f64, seed: Seed) -> Result<DenseMatrix> {
    let (a, q) = lb_noise_law(n, r, xi)?;
    let geom = Geometric::new(1.0 - q).map_err(|e| Error::Sampling(format!("geometric law: {e}")))?;
    let mut rng = seed.rng();
    Ok(DenseMatrix::from_fn(n, n, |_, _| {
        if rng.random_bool(a) {
            0.0
        } else {
            let m = 1 + geom.sample(&mut rng);
            let magnitude = 2.0 * m as f64;
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        }
    }))
}

/// Matrix completion as robust PCA: observed entries (probability `alpha`)
/// get noise uniform on `[-zeta, zeta]`, hidden ones get
/// `+-COMPLETION_HIDDEN_FACTOR * rho/n`. Returns the problem and the mask of
/// observed entries.
pub fn gen_matrix_completion_scenario(
    n: usize,
    r: usize,
    alpha: f64,
    zeta: f64,
    rho_over_n: f64,
    seed: Seed,
) -> Result<(PcaProblem, Vec<bool>)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::pre(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(zeta >= 0.0) || !zeta.is_finite() {
        return Err(Error::pre(format!("zeta must be non-negative, got {zeta}")));
    }
    let l = gen_flat_lowrank(n, r, rho_over_n, seed.derive(0))?;
    let mut rng = seed.derive(1).rng();
    let hidden = COMPLETION_HIDDEN_FACTOR * rho_over_n;
    let mut observed = Vec::with_capacity(n * n);
    let noise = DenseMatrix::from_fn(n, n, |_, _| {
        let seen = rng.random_bool(alpha);
        observed.push(seen);
        if seen {
            if zeta == 0.0 {
                0.0
            } else {
                rng.random_range(-zeta..=zeta)
            }
        } else if rng.random_bool(0.5) {
            hidden
        } else {
            -hidden
        }
    });
    let problem = PcaProblem::new(&l + noise, rho_over_n, zeta)?.with_truth(l, r)?;
    Ok((problem, observed))
}

/// Seeds of the three independent draws of a regression instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressionSeeds {
    pub design: Seed,
    pub signal: Seed,
    pub noise: Seed,
}

impl RegressionSeeds {
    pub fn from_master(seed: Seed) -> Self {
        Self { design: seed.derive(0), signal: seed.derive(1), noise: seed.derive(2) }
    }
}

/// `y = X beta* + eta` with a Gaussian design. The noise is drawn from its
/// own seed, which must differ from the design seed.
pub fn gen_regression_problem(
    n: usize,
    sigma: &DenseMatrix,
    signal_k: usize,
    magnitude: f64,
    noise: &NoiseSpec,
    seeds: RegressionSeeds,
) -> Result<RegressionProblem> {
    if seeds.design == seeds.noise {
        return Err(Error::pre("design and noise must be drawn from different seeds"));
    }
    let d = sigma.nrows();
    let eta = gen_noise_vector(n, noise, seeds.noise)?;
    let x = gen_gaussian_design(n, d, sigma, seeds.design)?;
    let (beta, support) = gen_sparse_signal(d, signal_k, magnitude, seeds.signal)?;
    let y = &x * &beta + eta;
    RegressionProblem::new(x, y)?.with_truth(beta, support)
}

/// `Y = L* + N` with a flat rank-`r` truth and i.i.d. oblivious noise.
pub fn gen_pca_problem(n: usize, r: usize, rho_over_n: f64, noise: &NoiseSpec, seed: Seed) -> Result<PcaProblem> {
    let l = gen_flat_lowrank(n, r, rho_over_n, seed.derive(0))?;
    let noise_m = gen_oblivious_noise_matrix(n, noise, seed.derive(1))?;
    PcaProblem::new(&l + noise_m, rho_over_n, noise.zeta)?.with_truth(l, r)
}
