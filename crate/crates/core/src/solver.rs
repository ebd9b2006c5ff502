//! Fixed-point construction of the transport.
//!
//! The unknown is `ĝ`; `g = Σĝ`, `f = 𝒟g` and `Y = X + f`. One step maps
//! `ĝ ↦ 𝒮Π F(ĝ)` where
//! `F(ĝ) = −W(X+f) − ½ Σ_j f_j f_j + (1⊗τ+τ⊗1)Tr 𝒥f − Σ_{m≥0} (−1)^m/(m+2) Q_{m+2}`
//! and `Q_m = (1⊗τ+τ⊗1)Tr (𝒥f)^m`. The last two pieces together are the
//! partial trace of `Tr log(1 + 𝒥f)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{
    cyclic_gradient, cyclic_symmetrize, fdq, jacobian, project0, sigma_inv, sym_partial_trace, TensorMatrix,
};
use crate::error::AlgebraError;
use crate::ncalg::{FloatPoly, NCPoly, PolyVec, TruncationLoss, Word};
use crate::scalar::Coeff;
use crate::semitrace::TraceCache;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Outer norm radius.
    pub a: f64,
    /// Certificate radius, `4 < a_prime < a`.
    pub a_prime: f64,
    pub rho: f64,
    pub dmax: usize,
    pub tol_fix: f64,
    pub max_iter: usize,
    pub tol_series: f64,
    /// Run even when the contractivity conditions fail; results are then
    /// marked uncertified.
    #[serde(default)]
    pub override_conditions: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            a: 5.0,
            a_prime: 4.5,
            rho: 1.0,
            dmax: 8,
            tol_fix: 1e-13,
            max_iter: 200,
            tol_series: 1e-12,
            override_conditions: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.a > self.a_prime && self.a_prime > 4.0) {
            return bad(format!("need a > a_prime > 4, got a={} a_prime={}", self.a, self.a_prime));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("need 0 < rho <= 1, got {}", self.rho));
        }
        if self.dmax == 0 {
            return bad("dmax must be positive".into());
        }
        if !(self.tol_fix > 0.0 && self.tol_series > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("contractivity conditions fail: {}", .0.violations.join("; "))]
    ConditionsFailed(Box<ConditionReport>),
    #[error("series diverges: 2‖ĝ‖_A/A² = {ratio} ≥ 1")]
    Divergence { ratio: f64 },
    #[error("fixed-point iteration did not converge after {iterations} steps (last delta {last_delta:e})")]
    NonConvergence {
        iterations: usize,
        last_delta: f64,
        history: Vec<f64>,
    },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub a: f64,
    pub rho: f64,
    pub norm_w_a: f64,
    pub bound_rho12: f64,
    /// `Σ_j pnorm(∂_j W, A+ρ)`.
    pub sum_pnorm_dw: f64,
    pub a_gt_4: bool,
    pub norm_ok: bool,
    pub pnorm_ok: bool,
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Relative tolerance for the structural checks on float potentials.
const STRUCTURE_TOL: f64 = 1e-12;

fn structure_defects<C: Coeff>(w: &NCPoly<C>) -> (f64, f64) {
    let adj = w.max_abs_diff(&w.adjoint());
    let pw = project0(w);
    let cyc = cyclic_symmetrize(&pw).max_abs_diff(&pw);
    (adj, cyc)
}

/// Validates `W` and evaluates the three contractivity conditions.
pub fn check_conditions<C: Coeff>(w: &NCPoly<C>, cfg: &SolverConfig) -> Result<ConditionReport, SolverError> {
    let scale = w.iter().map(|(_, c)| c.abs_f64()).fold(0.0, f64::max);
    let tol = STRUCTURE_TOL * scale;
    if !w.constant_term().is_zero() {
        return Err(SolverError::InvalidPotential("nonzero constant term".into()));
    }
    let (adj, cyc) = structure_defects(w);
    if adj > tol {
        return Err(SolverError::InvalidPotential(format!("not self-adjoint (defect {adj:e})")));
    }
    if cyc > tol {
        return Err(SolverError::InvalidPotential(format!(
            "not cyclically symmetric (defect {cyc:e})"
        )));
    }
    let norm_w_a = w.norm_a(cfg.a);
    let bound_rho12 = cfg.rho / 12.0;
    let outer = cfg.a + cfg.rho;
    let mut sum_pnorm_dw = 0.0;
    for j in 0..w.signature().n {
        sum_pnorm_dw += fdq(w, j)?.pnorm(outer);
    }
    let a_gt_4 = cfg.a > 4.0;
    let norm_ok = norm_w_a < bound_rho12;
    let pnorm_ok = sum_pnorm_dw < 0.125;
    let mut violations = Vec::new();
    if !a_gt_4 {
        violations.push(format!("A = {} is not > 4", cfg.a));
    }
    if !norm_ok {
        violations.push(format!("‖W‖_A = {norm_w_a} is not < ρ/12 = {bound_rho12}"));
    }
    if !pnorm_ok {
        violations.push(format!("Σ_j ‖∂_j W‖_(A+ρ) = {sum_pnorm_dw} is not < 1/8"));
    }
    Ok(ConditionReport {
        a: cfg.a,
        rho: cfg.rho,
        norm_w_a,
        bound_rho12,
        sum_pnorm_dw,
        a_gt_4,
        norm_ok,
        pnorm_ok,
        passed: a_gt_4 && norm_ok && pnorm_ok,
        violations,
    })
}

/// `(1⊗τ+τ⊗1)Tr((𝒥𝒟Σĝ)^m)`.
pub fn q_m<C: Coeff>(cache: &TraceCache, ghat: &NCPoly<C>, m: usize) -> Result<(NCPoly<C>, TruncationLoss), SolverError> {
    let sig = ghat.signature();
    let jac = jacobian(&cyclic_gradient(&sigma_inv(ghat)));
    let mut loss = TruncationLoss::new();
    let mut power = TensorMatrix::identity(sig);
    for _ in 0..m {
        power = power.sharp_tracked(&jac, &mut loss)?;
    }
    Ok((sym_partial_trace(cache, &power.trace()), loss))
}

#[derive(Clone, Debug)]
pub struct SeriesEval<C: Coeff> {
    pub value: NCPoly<C>,
    /// Bound on the norm of the omitted terms.
    pub tail_bound: f64,
    /// Number of `Q_{m+2}` terms summed.
    pub terms: usize,
    pub loss: TruncationLoss,
}

/// Contraction ratio `2‖ĝ‖_A/A²` controlling the `Q` and log series.
pub fn series_ratio<C: Coeff>(ghat: &NCPoly<C>, a: f64) -> f64 {
    2.0 * ghat.norm_a(a) / (a * a)
}

/// Smallest `M` with `Σ_{m>M} 2 r^{m+2}/(m+2) ≤ 2 r^{M+3} / ((M+3)(1−r)) < tol`.
pub fn series_cutoff(r: f64, tol: f64) -> usize {
    if r == 0.0 {
        return 0;
    }
    let mut m = 0usize;
    while 2.0 * r.powi(m as i32 + 3) / ((m as f64 + 3.0) * (1.0 - r)) >= tol && m < 10_000 {
        m += 1;
    }
    m
}

pub(crate) fn q_series_from_jacobian<C: Coeff>(
    cache: &TraceCache,
    jac: &TensorMatrix<C>,
    r: f64,
    tol: f64,
) -> Result<SeriesEval<C>, SolverError> {
    let sig = jac.signature();
    let cutoff = series_cutoff(r, tol);
    let mut loss = TruncationLoss::new();
    let mut value = NCPoly::zero(sig);
    let mut power = jac.sharp_tracked(jac, &mut loss)?;
    let mut terms = 0;
    for m in 0..=cutoff {
        if power.is_zero() {
            break;
        }
        let q = sym_partial_trace(cache, &power.trace());
        let sign = if m % 2 == 0 { 1 } else { -1 };
        value.add_scaled(&q, &C::from_ratio(sign, m as i64 + 2))?;
        terms += 1;
        if m < cutoff {
            power = power.sharp_tracked(jac, &mut loss)?;
        }
    }
    let tail_bound = if r == 0.0 || power.is_zero() {
        0.0
    } else {
        2.0 * r.powi(cutoff as i32 + 3) / ((cutoff as f64 + 3.0) * (1.0 - r))
    };
    Ok(SeriesEval {
        value,
        tail_bound,
        terms,
        loss,
    })
}

/// `Q(Σĝ) = Σ_{m≥0} (−1)^m/(m+2) Q_{m+2}(Σĝ)`, cut where the geometric tail
/// bound falls under `cfg.tol_series`.
pub fn q_series<C: Coeff>(cache: &TraceCache, ghat: &NCPoly<C>, cfg: &SolverConfig) -> Result<SeriesEval<C>, SolverError> {
    let r = series_ratio(ghat, cfg.a);
    if r >= 1.0 {
        return Err(SolverError::Divergence { ratio: r });
    }
    let jac = jacobian(&cyclic_gradient(&sigma_inv(ghat)));
    q_series_from_jacobian(cache, &jac, r, cfg.tol_series)
}

#[derive(Clone, Debug)]
pub struct FEval<C: Coeff> {
    pub value: NCPoly<C>,
    pub loss: TruncationLoss,
    pub tail_bound: f64,
    pub series_terms: usize,
}

/// `F(ĝ)` in its `Q`-series form.
pub fn big_f<C: Coeff>(cache: &TraceCache, ghat: &NCPoly<C>, w: &NCPoly<C>, cfg: &SolverConfig) -> Result<FEval<C>, SolverError> {
    let sig = ghat.signature();
    sig.ensure_same(&w.signature())?;
    let r = series_ratio(ghat, cfg.a);
    if r >= 1.0 {
        return Err(SolverError::Divergence { ratio: r });
    }
    let f = cyclic_gradient(&sigma_inv(ghat));
    let y = PolyVec::identity(sig).try_add(&f)?;
    let mut loss = TruncationLoss::new();
    let mut value = w.substitute_tracked(&y, &mut loss)?.scale(&-C::one());
    let half = C::from_ratio(1, 2);
    for fj in f.entries() {
        value.add_scaled(&fj.mul_tracked(fj, &mut loss)?, &-half.clone())?;
    }
    let jac = jacobian(&f);
    value.add_scaled(&sym_partial_trace(cache, &jac.trace()), &C::one())?;
    let series = q_series_from_jacobian(cache, &jac, r, cfg.tol_series)?;
    value.add_scaled(&series.value, &-C::one())?;
    loss.absorb(&series.loss);
    Ok(FEval {
        value,
        loss,
        tail_bound: series.tail_bound,
        series_terms: series.terms,
    })
}

/// One fixed-point step `𝒮Π F(ĝ)`.
pub fn step<C: Coeff>(cache: &TraceCache, ghat: &NCPoly<C>, w: &NCPoly<C>, cfg: &SolverConfig) -> Result<(NCPoly<C>, FEval<C>), SolverError> {
    let eval = big_f(cache, ghat, w, cfg)?;
    Ok((cyclic_symmetrize(&project0(&eval.value)), eval))
}

/// Lipschitz bound for `F` between `ĝ` and `ĥ`, with `dw_pnorm_b` the sum of
/// the projective norms of `∂_j W` at radius `B ≥ A + max‖·‖_A`.
pub fn lipschitz_bound(norm_g: f64, norm_h: f64, dw_pnorm_b: f64, a: f64) -> f64 {
    let a2 = a * a;
    2.0 / a2 * (1.0 / ((1.0 - 2.0 * norm_g / a2) * (1.0 - 2.0 * norm_h / a2)) + 1.0) + dw_pnorm_b + 0.5 * (norm_g + norm_h)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportResult {
    pub g: FloatPoly,
    pub ghat: FloatPoly,
    pub f: PolyVec<f64>,
    pub y: PolyVec<f64>,
    pub h: Option<PolyVec<f64>>,
    pub iterations: usize,
    pub final_delta: f64,
    pub delta_history: Vec<f64>,
    /// Largest ratio of successive step sizes above the noise floor.
    pub contraction_ratio_estimate: f64,
    /// `pnorm_mat(𝒥f, A′)`.
    pub hessian_pnorm: f64,
    /// Dropped mass of the final `F` evaluation, at radius `A`.
    pub truncation_loss_total: f64,
    pub truncation_loss: TruncationLoss,
    pub series_tail_bound: f64,
    pub series_terms: usize,
    /// `‖ĝ − 𝒮ΠF(ĝ)‖_A` at the returned `ĝ`.
    pub fixed_point_residual: f64,
    /// Every iterate stayed in `‖ĝ_k‖_A < ρ/4`.
    pub ball_confined: bool,
    pub norm_w_a: f64,
    pub norm_g_a: f64,
    pub self_adjoint_defect: f64,
    pub cyclic_defect: f64,
    pub conditions: ConditionReport,
    /// Conditions passed, contraction observed and `hessian_pnorm < 1`.
    pub certified: bool,
}

/// Steps whose predecessor is below this multiple of `tol_fix` are treated
/// as roundoff when estimating the contraction ratio.
const RATIO_FLOOR: f64 = 100.0;

pub fn solve_transport(w: &FloatPoly, cfg: &SolverConfig) -> Result<TransportResult, SolverError> {
    solve_transport_with(TraceCache::global(), w, cfg)
}

pub fn solve_transport_with(cache: &TraceCache, w: &FloatPoly, cfg: &SolverConfig) -> Result<TransportResult, SolverError> {
    cfg.validate()?;
    if w.degree().is_some_and(|d| d > cfg.dmax) {
        return Err(SolverError::InvalidPotential(format!(
            "degree {} exceeds dmax {}",
            w.degree().unwrap_or(0),
            cfg.dmax
        )));
    }
    let w = w.with_dmax(cfg.dmax, &mut TruncationLoss::new());
    let sig = w.signature();
    let conditions = check_conditions(&w, cfg)?;
    if !conditions.passed && !cfg.override_conditions {
        return Err(SolverError::ConditionsFailed(Box::new(conditions)));
    }

    let ball = cfg.rho / 4.0;
    let mut ball_confined = w.norm_a(cfg.a) < ball;
    let mut ghat = w.clone();
    let mut history = Vec::new();
    let mut ratio: f64 = 0.0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (next, _) = step(cache, &ghat, &w, cfg)?;
        let delta = next.try_sub(&ghat)?.norm_a(cfg.a);
        if let Some(&prev) = history.last() {
            if prev > RATIO_FLOOR * cfg.tol_fix {
                ratio = ratio.max(delta / prev);
            }
        }
        history.push(delta);
        ball_confined &= next.norm_a(cfg.a) < ball;
        ghat = next;
        if !delta.is_finite() {
            break;
        }
        if delta < cfg.tol_fix {
            converged = true;
            break;
        }
    }
    let last_delta = history.last().copied().unwrap_or(f64::NAN);
    if !converged || ratio >= 1.0 {
        return Err(SolverError::NonConvergence {
            iterations: history.len(),
            last_delta,
            history,
        });
    }

    let (check, eval) = step(cache, &ghat, &w, cfg)?;
    let fixed_point_residual = check.try_sub(&ghat)?.norm_a(cfg.a);
    let g = sigma_inv(&ghat);
    let f = cyclic_gradient(&g);
    let y = PolyVec::identity(sig).try_add(&f)?;
    let hessian_pnorm = jacobian(&f).pnorm_mat(cfg.a_prime);
    let (self_adjoint_defect, cyclic_defect) = structure_defects(&g);
    let certified = conditions.passed && ratio < 1.0 && hessian_pnorm < 1.0;
    Ok(TransportResult {
        norm_g_a: g.norm_a(cfg.a),
        norm_w_a: w.norm_a(cfg.a),
        g,
        ghat,
        f,
        y,
        h: None,
        iterations: history.len(),
        final_delta: last_delta,
        delta_history: history,
        contraction_ratio_estimate: ratio,
        hessian_pnorm,
        truncation_loss_total: eval.loss.at(cfg.a),
        truncation_loss: eval.loss,
        series_tail_bound: eval.tail_bound,
        series_terms: eval.series_terms,
        fixed_point_residual,
        ball_confined,
        self_adjoint_defect,
        cyclic_defect,
        conditions,
        certified,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseResult {
    pub h: PolyVec<f64>,
    pub iterations: usize,
    pub contraction_ratio_estimate: f64,
    /// `max_j ‖H_j(X+f) − X_j‖_{A′}`.
    pub residual: f64,
    pub truncation_loss_total: f64,
}

/// Inverse of `X + f` through `G_k = X − f∘G_{k−1}` from `G_0 = X`.
pub fn invert_transport(f: &PolyVec<f64>, cfg: &SolverConfig) -> Result<InverseResult, SolverError> {
    cfg.validate()?;
    let sig = f.signature();
    let id = PolyVec::identity(sig);
    let mut g = id.clone();
    let mut history: Vec<f64> = Vec::new();
    let mut ratio: f64 = 0.0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let next = id.try_sub(&f.substitute_tracked(&g, &mut TruncationLoss::new())?)?;
        let delta = next.try_sub(&g)?.norm_a(cfg.a_prime);
        if let Some(&prev) = history.last() {
            if prev > RATIO_FLOOR * cfg.tol_fix {
                ratio = ratio.max(delta / prev);
            }
        }
        history.push(delta);
        g = next;
        if delta < cfg.tol_fix {
            converged = true;
            break;
        }
        if !delta.is_finite() {
            break;
        }
    }
    if !converged || ratio >= 1.0 {
        return Err(SolverError::NonConvergence {
            iterations: history.len(),
            last_delta: history.last().copied().unwrap_or(f64::NAN),
            history,
        });
    }
    let y = id.try_add(f)?;
    let mut loss = TruncationLoss::new();
    let composed = g.substitute_tracked(&y, &mut loss)?;
    let residual = composed.try_sub(&id)?.norm_a(cfg.a_prime);
    Ok(InverseResult {
        h: g,
        iterations: history.len(),
        contraction_ratio_estimate: ratio,
        residual,
        truncation_loss_total: loss.at(cfg.a_prime),
    })
}

/// `τ(w(Y))` for a word `w` in the generators.
pub fn moment_of_word(cache: &TraceCache, y: &PolyVec<f64>, word: &Word) -> Result<f64, SolverError> {
    let mono = NCPoly::monomial(y.signature(), word.clone(), 1.0)?;
    Ok(cache.tau_poly(&mono.substitute(y)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub beta: f64,
    pub result: TransportResult,
    /// `τ(w(Y_β))` per registered test word, in input order.
    pub moments: Vec<f64>,
}

/// Solves for `W = β·W_unit` at each `β`.
pub fn beta_sweep(w_unit: &FloatPoly, betas: &[f64], cfg: &SolverConfig, test_words: &[Word]) -> Result<Vec<SweepPoint>, SolverError> {
    let cache = TraceCache::global();
    betas
        .iter()
        .map(|&beta| {
            let result = solve_transport_with(cache, &w_unit.scale(&beta), cfg)?;
            let moments = test_words
                .iter()
                .map(|w| moment_of_word(cache, &result.y, w))
                .collect::<Result<_, _>>()?;
            Ok(SweepPoint { beta, result, moments })
        })
        .collect()
}

/// Root-mean-square residual of a least-squares polynomial fit `y ≈ p(x)`.
pub fn polynomial_fit_residual(xs: &[f64], ys: &[f64], degree: usize) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let rows = xs.len();
    let cols = degree + 1;
    let design = DMatrix::from_fn(rows, cols, |i, j| xs[i].powi(j as i32));
    let rhs = DVector::from_column_slice(ys);
    let svd = design.clone().svd(true, true);
    let coef = svd.solve(&rhs, 1e-14).expect("SVD computed with both factors");
    let resid = design * coef - rhs;
    (resid.norm_squared() / rows as f64).sqrt()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
