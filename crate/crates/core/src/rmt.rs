//! Desk-scale random-matrix comparison.
//!
//! Two ways to produce samples whose normalized traces should approach the
//! free Gibbs law of `V = ½ΣX² + W`:
//! push GUE tuples through the computed transport by matrix functional
//! calculus, or sample `exp(−N Tr V(A))` directly with Metropolis-adjusted
//! Langevin. Both are reduced to per-word trace statistics.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::cyclic_gradient;
use crate::ncalg::{FloatPoly, NCPoly, PolyVec, Signature, Word};
use crate::onevar::{moment_recursion, OneVarSeries};
use crate::solver::{solve_transport, SolverConfig, SolverError};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Error)]
pub enum RmtError {
    #[error("matrix {index} has spectral radius {radius} ≥ {limit}")]
    SpectralRadius { index: usize, radius: f64, limit: f64 },
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<crate::error::AlgebraError> for RmtError {
    fn from(e: crate::error::AlgebraError) -> Self {
        RmtError::Solver(e.into())
    }
}

/// `n` Hermitian `N×N` matrices.
#[derive(Clone, Debug)]
pub struct MatrixTuple {
    pub mats: Vec<CMatrix>,
}

impl MatrixTuple {
    pub fn size(&self) -> usize {
        self.mats.first().map_or(0, |m| m.nrows())
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Largest `‖M − M*‖_max / max(1, ‖M‖_max)` over the tuple.
    pub fn hermiticity_defect(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| {
                let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
                (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
            })
            .fold(0.0, f64::max)
    }

    /// Spectral radius of each matrix.
    pub fn spectral_radii(&self) -> Vec<f64> {
        self.mats.iter().map(spectral_radius).collect()
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn spectral_radius(m: &CMatrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

fn gue_matrix(rng: &mut ChaCha8Rng, size: usize) -> CMatrix {
    let diag_sd = (1.0 / size as f64).sqrt();
    let off_sd = (0.5 / size as f64).sqrt();
    let mut m = CMatrix::zeros(size, size);
    for i in 0..size {
        let d: f64 = StandardNormal.sample(rng);
        m[(i, i)] = Complex64::new(diag_sd * d, 0.0);
        for j in i + 1..size {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let z = Complex64::new(off_sd * re, off_sd * im);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// `n` independent GUE matrices with entry variance `1/N`.
pub fn sample_gue(size: usize, n: usize, seed: u64) -> MatrixTuple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_gue_with(&mut rng, size, n)
}

fn sample_gue_with(rng: &mut ChaCha8Rng, size: usize, n: usize) -> MatrixTuple {
    MatrixTuple {
        mats: (0..n).map(|_| gue_matrix(rng, size)).collect(),
    }
}

/// Evaluates words at a tuple, sharing prefix products.
struct WordEvaluator<'a> {
    mats: &'a [CMatrix],
    memo: HashMap<Word, CMatrix>,
}

impl<'a> WordEvaluator<'a> {
    fn new(mats: &'a [CMatrix]) -> Self {
        Self {
            mats,
            memo: HashMap::new(),
        }
    }

    fn word(&mut self, w: &Word) -> CMatrix {
        if let Some(m) = self.memo.get(w) {
            return m.clone();
        }
        let l = w.letters();
        let m = match l.len() {
            0 => CMatrix::identity(self.mats[0].nrows(), self.mats[0].nrows()),
            1 => self.mats[l[0] as usize].clone(),
            k => {
                let head = self.word(&Word::from_letters(&l[..k - 1]));
                head * &self.mats[l[k - 1] as usize]
            }
        };
        self.memo.insert(w.clone(), m.clone());
        m
    }

    fn poly(&mut self, p: &FloatPoly) -> CMatrix {
        let size = self.mats[0].nrows();
        let mut acc = CMatrix::zeros(size, size);
        for (w, c) in p.iter() {
            acc += self.word(w).scale(*c);
        }
        acc
    }

    /// `(1/N) Re Tr w`.
    fn normalized_trace(&mut self, w: &Word) -> f64 {
        let size = self.mats[0].nrows() as f64;
        self.word(w).trace().re / size
    }
}

/// Applies each entry of `f` to `t` by matrix calculus. Every input must
/// have spectral radius below `radius`.
pub fn eval_series_at_matrices(f: &PolyVec<f64>, t: &MatrixTuple, radius: f64) -> Result<MatrixTuple, RmtError> {
    for (index, r) in t.spectral_radii().into_iter().enumerate() {
        if r >= radius {
            return Err(RmtError::SpectralRadius {
                index: index + 1,
                radius: r,
                limit: radius,
            });
        }
    }
    let mut ev = WordEvaluator::new(&t.mats);
    Ok(MatrixTuple {
        mats: f.entries().iter().map(|p| hermitian_part(&ev.poly(p))).collect(),
    })
}

/// Streaming mean and variance, mergeable.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Initial Langevin step `h`; adapted during burn-in.
    pub step_size: f64,
    /// Recorded steps after burn-in, per chain.
    pub steps: usize,
    pub burn_in: usize,
    /// Record every `thin`-th state.
    #[serde(default = "default_thin")]
    pub thin: usize,
    pub seed: u64,
}

fn default_thin() -> usize {
    1
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            steps: 2000,
            burn_in: 500,
            thin: 5,
            seed: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), RmtError> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(RmtError::InvalidConfig(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.thin == 0 || self.steps == 0 {
            return Err(RmtError::InvalidConfig("steps and thin must be positive".into()));
        }
        Ok(())
    }
}

/// `V = ½ΣX² + W` with its cyclic gradient, ready for matrix evaluation.
#[derive(Clone, Debug)]
pub struct MatrixPotential {
    pub w: FloatPoly,
    grad_w: PolyVec<f64>,
}

impl MatrixPotential {
    pub fn new(w: &FloatPoly) -> Self {
        Self {
            w: w.clone(),
            grad_w: cyclic_gradient(w),
        }
    }

    /// `N·Tr V(A)`.
    pub fn energy(&self, a: &MatrixTuple) -> f64 {
        let size = a.size() as f64;
        let mut ev = WordEvaluator::new(&a.mats);
        let quad: f64 = a.mats.iter().map(|m| (m * m).trace().re).sum::<f64>() * 0.5;
        size * (quad + ev.poly(&self.w).trace().re)
    }

    /// `(𝒟_j V)(A)`, the gradient of `Tr V` for the pairing `Re Tr(XY)`.
    pub fn gradient(&self, a: &MatrixTuple) -> MatrixTuple {
        let mut ev = WordEvaluator::new(&a.mats);
        MatrixTuple {
            mats: a
                .mats
                .iter()
                .zip(self.grad_w.entries())
                .map(|(m, g)| hermitian_part(&(m + ev.poly(g))))
                .collect(),
        }
    }
}

fn hs_norm_sq(d: &MatrixTuple) -> f64 {
    d.mats.iter().map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
}

fn axpy(a: &MatrixTuple, b: &MatrixTuple, s: f64) -> MatrixTuple {
    MatrixTuple {
        mats: a.mats.iter().zip(&b.mats).map(|(x, y)| x + y.scale(s)).collect(),
    }
}

/// `log q(to | from)` up to a constant, for the proposal
/// `to = from − (h/2)∇ + √h Z` with `Z` GUE: the Gaussian has density
/// `∝ exp(−N‖·‖²_HS / (2h))` in the real coordinates.
pub fn log_proposal(from: &MatrixTuple, grad_from: &MatrixTuple, to: &MatrixTuple, h: f64) -> f64 {
    let mean = axpy(from, grad_from, -0.5 * h);
    let diff = axpy(to, &mean, -1.0);
    -(from.size() as f64) * hs_norm_sq(&diff) / (2.0 * h)
}

/// Log Metropolis-Hastings ratio for a move `x → y`.
pub fn log_acceptance(pot: &MatrixPotential, x: &MatrixTuple, y: &MatrixTuple, h: f64) -> f64 {
    let gx = pot.gradient(x);
    let gy = pot.gradient(y);
    -pot.energy(y) + pot.energy(x) + log_proposal(y, &gy, x, h) - log_proposal(x, &gx, y, h)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    /// Per-word trace series, one value per recorded state.
    #[serde(skip)]
    pub series: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub final_step_size: f64,
    /// Recorded states dropped for a spectral radius above 4.
    pub rejected_out_of_range: usize,
    pub warning: Option<String>,
}

/// Spectral cut applied to both pipelines.
pub const OPERATOR_NORM_CUT: f64 = 4.0;

/// One MALA chain for `exp(−N Tr V(A))`, started at a GUE draw. The
/// proposal is preconditioned by the GUE covariance, so at `W = 0` it is
/// `A′ = (1 − h/2)A + √h Z`. The step adapts toward acceptance 0.57 during
/// burn-in only.
pub fn mala_chain(
    pot: &MatrixPotential,
    n: usize,
    size: usize,
    chain: &ChainConfig,
    stream: u64,
    words: &[Word],
) -> Result<ChainSummary, RmtError> {
    chain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(chain.seed);
    rng.set_stream(stream);
    let mut x = sample_gue_with(&mut rng, size, n);
    let mut energy = pot.energy(&x);
    let mut grad = pot.gradient(&x);
    let mut h = chain.step_size;
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut series = vec![Vec::with_capacity(chain.steps / chain.thin + 1); words.len()];
    let mut rejected_out_of_range = 0;
    for it in 0..chain.burn_in + chain.steps {
        let z = sample_gue_with(&mut rng, size, n);
        let mean = axpy(&x, &grad, -0.5 * h);
        let y = axpy(&mean, &z, h.sqrt());
        let ey = pot.energy(&y);
        let gy = pot.gradient(&y);
        let log_ratio = -ey + energy + log_proposal(&y, &gy, &x, h) - log_proposal(&x, &grad, &y, h);
        let u: f64 = rand::Rng::random(&mut rng);
        let accept = log_ratio.is_finite() && u.ln() < log_ratio;
        if accept {
            x = y;
            energy = ey;
            grad = gy;
        }
        if it < chain.burn_in {
            let target = 0.57;
            let a = if accept { 1.0 } else { 0.0 };
            h *= ((a - target) / (1.0 + it as f64).sqrt()).exp();
            continue;
        }
        proposed += 1;
        accepted += accept as usize;
        if (it - chain.burn_in).is_multiple_of(chain.thin) {
            if x.spectral_radii().iter().any(|r| *r > OPERATOR_NORM_CUT) {
                rejected_out_of_range += 1;
                continue;
            }
            let mut ev = WordEvaluator::new(&x.mats);
            for (s, w) in series.iter_mut().zip(words) {
                s.push(ev.normalized_trace(w));
            }
        }
    }
    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    let warning = (!(0.2..=0.8).contains(&acceptance_rate))
        .then(|| format!("acceptance rate {acceptance_rate:.3} outside [0.2, 0.8]"));
    Ok(ChainSummary {
        series,
        acceptance_rate,
        final_step_size: h,
        rejected_out_of_range,
        warning,
    })
}

/// Runs `chains` independent MALA chains in parallel.
pub fn mala_sample(
    w: &FloatPoly,
    size: usize,
    chain: &ChainConfig,
    chains: usize,
    words: &[Word],
) -> Result<Vec<ChainSummary>, RmtError> {
    let pot = MatrixPotential::new(w);
    let n = w.signature().n;
    (0..chains as u64)
        .into_par_iter()
        .map(|c| mala_chain(&pot, n, size, chain, c, words))
        .collect()
}

/// Mean, batch-means standard error and effective sample size of a set of
/// correlated series, batches of `√len` per series.
pub fn batch_means(series: &[&[f64]]) -> (f64, f64, f64) {
    let mut all = Welford::default();
    let mut batches = Welford::default();
    let mut batch_len = 0usize;
    for s in series {
        for x in s.iter() {
            all.push(*x);
        }
        let b = ((s.len() as f64).sqrt() as usize).max(1);
        batch_len = b;
        for chunk in s.chunks_exact(b) {
            batches.push(chunk.iter().sum::<f64>() / b as f64);
        }
    }
    if batches.count < 2 {
        return (all.mean, f64::INFINITY, 0.0);
    }
    let se = (batches.variance() * batch_len as f64 / all.count as f64).sqrt();
    let ess = if se > 0.0 { all.variance() / (se * se) } else { all.count as f64 };
    (all.mean, se, ess.min(all.count as f64))
}

#[derive(Clone, Debug, Serialize)]
pub struct WordStat {
    /// 1-based letters.
    pub word: Vec<usize>,
    pub transport_mean: f64,
    pub transport_se: f64,
    pub mala_mean: f64,
    pub mala_se: f64,
    pub mala_ess: f64,
    pub pooled_sigma: f64,
    /// `|transport − mala| / pooled_sigma`.
    pub z: f64,
    pub oracle: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub size: usize,
    pub n: usize,
    pub draws: usize,
    pub chains: usize,
    pub words: Vec<WordStat>,
    pub transport_rejected: usize,
    pub mala_rejected: usize,
    pub mala_acceptance: Vec<f64>,
    pub mala_min_ess: f64,
    pub warnings: Vec<String>,
    pub transport_certified: bool,
    /// Dropped mass of the transport solve, at radius `A`.
    pub transport_truncation_loss: f64,
    /// Worst Hermiticity defect of transported samples.
    pub hermiticity_defect: f64,
}

/// GUE draws for the transport pipeline use streams from here up; chains
/// use the streams below.
const TRANSPORT_STREAMS: u64 = 1 << 32;

/// Cyclic classes of even words of length `2..=max_len`, one
/// representative each.
pub fn test_words(n: usize, max_len: usize) -> Vec<Word> {
    let mut out: Vec<Word> = crate::verify::words_up_to(n, max_len)
        .into_iter()
        .filter(|w| !w.is_empty() && w.len() % 2 == 0)
        .map(|w| w.cyclic_representative())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Moment comparison between transported GUE tuples and the MALA ensemble.
/// GUE draws with a spectral radius above `min(A′, 4)` are dropped and
/// counted. At `n = 1` the one-variable oracle is attached to powers of `X`.
pub fn transport_compare(
    w: &FloatPoly,
    cfg: &SolverConfig,
    size: usize,
    draws: usize,
    chain: &ChainConfig,
    chains: usize,
) -> Result<CompareReport, RmtError> {
    let n = w.signature().n;
    let words = test_words(n, 6);
    let transport = solve_transport(w, cfg)?;
    let y = transport.y.clone();
    let cut = cfg.a_prime.min(OPERATOR_NORM_CUT);

    let per_draw: Vec<Option<(Vec<f64>, f64)>> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(chain.seed);
            rng.set_stream(TRANSPORT_STREAMS + d);
            let t = sample_gue_with(&mut rng, size, n);
            match eval_series_at_matrices(&y, &t, cut) {
                Ok(out) => {
                    let defect = out.hermiticity_defect();
                    let mut ev = WordEvaluator::new(&out.mats);
                    Some((words.iter().map(|w| ev.normalized_trace(w)).collect(), defect))
                }
                Err(_) => None,
            }
        })
        .collect();
    let mut t_stats = vec![Welford::default(); words.len()];
    let mut transport_rejected = 0;
    let mut hermiticity_defect: f64 = 0.0;
    for r in &per_draw {
        match r {
            Some((vals, defect)) => {
                hermiticity_defect = hermiticity_defect.max(*defect);
                for (s, v) in t_stats.iter_mut().zip(vals) {
                    s.push(*v);
                }
            }
            None => transport_rejected += 1,
        }
    }

    let runs = mala_sample(w, size, chain, chains, &words)?;
    let oracle = if n == 1 {
        let series = OneVarSeries::from_ncpoly(w, cfg.a);
        Some(moment_recursion(1.0, &series, 6, 8)?)
    } else {
        None
    };

    let mut stats = Vec::with_capacity(words.len());
    let mut min_ess = f64::INFINITY;
    for (k, word) in words.iter().enumerate() {
        let series: Vec<&[f64]> = runs.iter().map(|r| r.series[k].as_slice()).collect();
        let (mala_mean, mala_se, mala_ess) = batch_means(&series);
        min_ess = min_ess.min(mala_ess);
        let t = &t_stats[k];
        let pooled_sigma = (t.std_error().powi(2) + mala_se.powi(2)).sqrt();
        stats.push(WordStat {
            word: word.to_one_based(),
            transport_mean: t.mean,
            transport_se: t.std_error(),
            mala_mean,
            mala_se,
            mala_ess,
            pooled_sigma,
            z: (t.mean - mala_mean).abs() / pooled_sigma,
            oracle: oracle.as_ref().map(|o| o.moments[word.len()]),
        });
    }
    Ok(CompareReport {
        size,
        n,
        draws,
        chains,
        words: stats,
        transport_rejected,
        mala_rejected: runs.iter().map(|r| r.rejected_out_of_range).sum(),
        mala_acceptance: runs.iter().map(|r| r.acceptance_rate).collect(),
        mala_min_ess: min_ess,
        warnings: runs.iter().filter_map(|r| r.warning.clone()).collect(),
        transport_certified: transport.certified,
        transport_truncation_loss: transport.truncation_loss_total,
        hermiticity_defect,
    })
}

/// `Σ_j β·X_j⁴` in `n` generators.
pub fn quartic(n: usize, dmax: usize, beta: f64) -> Result<FloatPoly, RmtError> {
    let sig = Signature::new(n, dmax)?;
    Ok(NCPoly::from_terms(
        sig,
        (0..n).map(|j| (Word::from_letters(&[j as u8; 4]), beta)),
    )?)
}
