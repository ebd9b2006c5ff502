//! One generator, done with scalar power series.
//!
//! Everything commutes, so `𝒥f` becomes the bivariate difference quotient
//! `(f(x) − f(y))/(x − y)` and the partial traces become integrals against
//! the semicircle density. Truncation follows the multivariate engine (total
//! degree ≤ dmax for bivariate terms), which makes the two engines agree to
//! roundoff at `n = 1`.
//!
//! The moment oracle is independent of all of this: it solves the
//! loop equations for `τ_V(x^k)` as exact power series in `β`.

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::ncalg::{FloatPoly, NCPoly, Signature, Word};
use crate::scalar::{rational_from_f64, Rational};
use crate::solver::{check_conditions, series_cutoff, ConditionReport, SolverConfig, SolverError};

/// A truncated one-variable series `Σ c_k x^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneVarSeries {
    pub coeffs: Vec<f64>,
    /// Radius for `‖·‖_A`.
    pub radius: f64,
}

impl OneVarSeries {
    pub fn new(coeffs: Vec<f64>, radius: f64) -> Self {
        let mut s = Self { coeffs, radius };
        s.trim();
        s
    }

    pub fn zero(radius: f64) -> Self {
        Self::new(Vec::new(), radius)
    }

    /// `β·x^d`.
    pub fn monomial(d: usize, beta: f64, radius: f64) -> Self {
        let mut c = vec![0.0; d + 1];
        c[d] = beta;
        Self::new(c, radius)
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn norm(&self) -> f64 {
        norm_at(&self.coeffs, self.radius)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        let c = self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        Self::new(c, self.radius)
    }

    /// The same series as a polynomial in one noncommuting generator.
    pub fn to_ncpoly(&self, dmax: usize) -> Result<FloatPoly, SolverError> {
        let sig = Signature::new(1, dmax)?;
        Ok(NCPoly::from_terms(
            sig,
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (Word::from_letters(&vec![0u8; k]), c)),
        )?)
    }

    /// Reads back a polynomial in one generator.
    pub fn from_ncpoly(p: &FloatPoly, radius: f64) -> Self {
        let mut c = vec![0.0; p.degree().map_or(0, |d| d + 1)];
        for (w, v) in p.iter() {
            c[w.len()] += v;
        }
        Self::new(c, radius)
    }
}

fn norm_at(c: &[f64], a: f64) -> f64 {
    c.iter().enumerate().map(|(k, v)| v.abs() * a.powi(k as i32)).sum()
}

/// Truncated product; dropped mass goes to `loss` at radius `a`.
fn mul_trunc(p: &[f64], q: &[f64], dmax: usize, a: f64, loss: &mut f64) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; (p.len() + q.len() - 1).min(dmax + 1)];
    for (i, x) in p.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in q.iter().enumerate() {
            if i + j <= dmax {
                out[i + j] += x * y;
            } else {
                *loss += (x * y).abs() * a.powi((i + j) as i32);
            }
        }
    }
    out
}

fn add_into(acc: &mut Vec<f64>, p: &[f64], factor: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, v) in acc.iter_mut().zip(p) {
        *a += factor * v;
    }
}

/// Nodes `2cos(kπ/(m+1))` and weights `(2/(m+1))sin²(kπ/(m+1))` for the
/// semicircle density on `[−2, 2]`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Exact for polynomials of degree `≤ 2m − 1`.
    pub fn new(m: usize) -> Self {
        let h = std::f64::consts::PI / (m as f64 + 1.0);
        let (nodes, weights) = (1..=m)
            .map(|k| {
                let t = k as f64 * h;
                (2.0 * t.cos(), 2.0 / (m as f64 + 1.0) * t.sin().powi(2))
            })
            .unzip();
        Self { nodes, weights }
    }

    /// Smallest grid that integrates degree `d` exactly.
    pub fn for_degree(d: usize) -> Self {
        Self::new(d / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * h(*x)).sum()
    }

    /// `∫ y^k dη(y)` for `k = 0..=kmax`.
    pub fn moments(&self, kmax: usize) -> Vec<f64> {
        let mut out = vec![0.0; kmax + 1];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let mut p = *w;
            for m in out.iter_mut() {
                *m += p;
                p *= x;
            }
        }
        out
    }
}

/// Bivariate polynomial `Σ b[a][c] x^a y^c` with `a + c ≤ dmax`.
#[derive(Clone, Debug)]
struct Bivariate {
    dmax: usize,
    c: Vec<Vec<f64>>,
}

impl Bivariate {
    fn zero(dmax: usize) -> Self {
        Self {
            dmax,
            c: (0..=dmax).map(|a| vec![0.0; dmax - a + 1]).collect(),
        }
    }

    /// `(f(x) − f(y))/(x − y) = Σ_k f_k Σ_{a+c=k−1} x^a y^c`.
    fn difference_quotient(f: &[f64], dmax: usize) -> Self {
        let mut out = Self::zero(dmax);
        for (k, fk) in f.iter().enumerate().skip(1) {
            if k - 1 > dmax {
                break;
            }
            for a in 0..k {
                out.c[a][k - 1 - a] += fk;
            }
        }
        out
    }

    fn is_zero(&self) -> bool {
        self.c.iter().all(|r| r.iter().all(|v| *v == 0.0))
    }

    fn mul(&self, other: &Self, a_rad: f64, loss: &mut f64) -> Self {
        let d = self.dmax;
        let mut out = Self::zero(d);
        for (a1, row1) in self.c.iter().enumerate() {
            for (c1, x) in row1.iter().enumerate() {
                if *x == 0.0 {
                    continue;
                }
                for (a2, row2) in other.c.iter().enumerate() {
                    for (c2, y) in row2.iter().enumerate() {
                        let (a, c) = (a1 + a2, c1 + c2);
                        if a + c <= d {
                            out.c[a][c] += x * y;
                        } else {
                            *loss += (x * y).abs() * a_rad.powi((a + c) as i32);
                        }
                    }
                }
            }
        }
        out
    }

    /// `∫ b(x, y) dη(y) + ∫ b(y, x) dη(y)` as a polynomial in `x`.
    fn sym_integral(&self, moments: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dmax + 1];
        for (a, row) in self.c.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                out[a] += v * moments[c];
                out[c] += v * moments[a];
            }
        }
        out
    }

    fn pnorm(&self, a_rad: f64) -> f64 {
        self.c
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.iter().enumerate().map(move |(c, v)| v.abs() * a_rad.powi((a + c) as i32)))
            .sum()
    }
}

struct OneVarEval {
    value: Vec<f64>,
    loss: f64,
    tail_bound: f64,
    terms: usize,
}

/// `F(ĝ)` in one variable.
fn big_f_1d(ghat: &[f64], w: &[f64], cfg: &SolverConfig, moments: &[f64]) -> Result<OneVarEval, SolverError> {
    let dmax = cfg.dmax;
    let a = cfg.a;
    let r = 2.0 * norm_at(ghat, a) / (a * a);
    if r >= 1.0 {
        return Err(SolverError::Divergence { ratio: r });
    }
    // g = Σĝ and f = g′, so f_{k−1} = ĝ_k.
    let f: Vec<f64> = ghat.iter().skip(1).copied().collect();
    let mut y = f.clone();
    add_into(&mut y, &[0.0, 1.0], 1.0);
    let mut loss = 0.0;

    let mut value = Vec::new();
    let mut power = vec![1.0];
    for (d, wd) in w.iter().enumerate() {
        if d > 0 {
            power = mul_trunc(&power, &y, dmax, a, &mut loss);
        }
        if *wd != 0.0 {
            add_into(&mut value, &power, -wd);
        }
    }
    add_into(&mut value, &mul_trunc(&f, &f, dmax, a, &mut loss), -0.5);

    let jac = Bivariate::difference_quotient(&f, dmax);
    add_into(&mut value, &jac.sym_integral(moments), 1.0);

    let cutoff = series_cutoff(r, cfg.tol_series);
    let mut p = jac.mul(&jac, a, &mut loss);
    let mut terms = 0;
    for m in 0..=cutoff {
        if p.is_zero() {
            break;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        add_into(&mut value, &p.sym_integral(moments), -sign / (m as f64 + 2.0));
        terms += 1;
        if m < cutoff {
            p = p.mul(&jac, a, &mut loss);
        }
    }
    let tail_bound = if r == 0.0 || p.is_zero() {
        0.0
    } else {
        2.0 * r.powi(cutoff as i32 + 3) / ((cutoff as f64 + 3.0) * (1.0 - r))
    };
    value.truncate(dmax + 1);
    Ok(OneVarEval {
        value,
        loss,
        tail_bound,
        terms,
    })
}

fn project0(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(c) = v.first_mut() {
        *c = 0.0;
    }
    v
}

fn diff_norm(p: &[f64], q: &[f64], a: f64) -> f64 {
    let n = p.len().max(q.len());
    (0..n)
        .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs() * a.powi(k as i32))
        .sum()
}

/// One fixed-point step `ĝ ↦ ΠF(ĝ)`.
pub fn psi(ghat: &OneVarSeries, w: &OneVarSeries, cfg: &SolverConfig) -> Result<OneVarSeries, SolverError> {
    let moments = QuadratureGrid::new(2 * cfg.dmax).moments(cfg.dmax);
    let e = big_f_1d(&ghat.coeffs, &w.coeffs, cfg, &moments)?;
    Ok(OneVarSeries::new(project0(e.value), cfg.a))
}

#[derive(Clone, Debug, Serialize)]
pub struct OneVarSolution {
    pub ghat: OneVarSeries,
    pub g: OneVarSeries,
    pub f: OneVarSeries,
    /// `F(x) = x + f(x)`.
    pub transport: OneVarSeries,
    pub iterations: usize,
    pub delta_history: Vec<f64>,
    pub contraction_ratio_estimate: f64,
    pub fixed_point_residual: f64,
    pub series_terms: usize,
    pub series_tail_bound: f64,
    /// Dropped mass of the final evaluation at radius `A`.
    pub truncation_loss: f64,
    pub conditions: ConditionReport,
    pub certified: bool,
}

/// Same noise floor as the multivariate solver.
const RATIO_FLOOR: f64 = 100.0;

/// Solves the one-variable fixed point from `ĝ_0 = W`.
pub fn solve_1d(w: &OneVarSeries, cfg: &SolverConfig) -> Result<OneVarSolution, SolverError> {
    cfg.validate()?;
    if w.degree().is_some_and(|d| d > cfg.dmax) {
        return Err(SolverError::InvalidPotential(format!("degree exceeds dmax {}", cfg.dmax)));
    }
    let conditions = check_conditions(&w.to_ncpoly(cfg.dmax)?, cfg)?;
    if !conditions.passed && !cfg.override_conditions {
        return Err(SolverError::ConditionsFailed(Box::new(conditions)));
    }
    // 2·dmax nodes are exact to degree 4·dmax − 1, beyond any y-degree used.
    let moments = QuadratureGrid::new(2 * cfg.dmax).moments(cfg.dmax);
    let a = cfg.a;
    let mut ghat = w.coeffs.clone();
    let mut history: Vec<f64> = Vec::new();
    let mut ratio: f64 = 0.0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let next = project0(big_f_1d(&ghat, &w.coeffs, cfg, &moments)?.value);
        let delta = diff_norm(&next, &ghat, a);
        if let Some(&prev) = history.last() {
            if prev > RATIO_FLOOR * cfg.tol_fix {
                ratio = ratio.max(delta / prev);
            }
        }
        history.push(delta);
        ghat = next;
        if !delta.is_finite() {
            break;
        }
        if delta < cfg.tol_fix {
            converged = true;
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
    let eval = big_f_1d(&ghat, &w.coeffs, cfg, &moments)?;
    let fixed_point_residual = diff_norm(&project0(eval.value), &ghat, a);
    let g: Vec<f64> = ghat
        .iter()
        .enumerate()
        .map(|(k, c)| if k == 0 { 0.0 } else { c / k as f64 })
        .collect();
    let f: Vec<f64> = ghat.iter().skip(1).copied().collect();
    let mut transport = f.clone();
    add_into(&mut transport, &[0.0, 1.0], 1.0);
    let hessian = Bivariate::difference_quotient(&f, cfg.dmax).pnorm(cfg.a_prime);
    Ok(OneVarSolution {
        ghat: OneVarSeries::new(ghat, a),
        g: OneVarSeries::new(g, a),
        f: OneVarSeries::new(f, a),
        transport: OneVarSeries::new(transport, a),
        iterations: history.len(),
        delta_history: history,
        contraction_ratio_estimate: ratio,
        fixed_point_residual,
        series_terms: eval.terms,
        series_tail_bound: eval.tail_bound,
        truncation_loss: eval.loss,
        certified: conditions.passed && hessian < 1.0,
        conditions,
    })
}

/// `∫ F(x)^k dη(x)`, with `F^k` expanded in full.
pub fn pushforward_moment(transport: &OneVarSeries, k: usize) -> f64 {
    let mut power = vec![1.0];
    let mut sink = 0.0;
    for _ in 0..k {
        power = mul_trunc(&power, &transport.coeffs, usize::MAX / 2, 1.0, &mut sink);
    }
    let grid = QuadratureGrid::for_degree(power.len().saturating_sub(1));
    let m = grid.moments(power.len().saturating_sub(1));
    power.iter().zip(&m).map(|(c, mk)| c * mk).sum()
}

/// `∫ F(x)^k dη(x)` for `k = 0..=kmax`.
pub fn pushforward_moments(transport: &OneVarSeries, kmax: usize) -> Vec<f64> {
    (0..=kmax).map(|k| pushforward_moment(transport, k)).collect()
}

/// Smallest `F′` on a uniform grid of `[−2, 2]`.
pub fn min_derivative(transport: &OneVarSeries, points: usize) -> f64 {
    let d = transport.derivative();
    (0..points)
        .map(|i| d.eval(-2.0 + 4.0 * i as f64 / (points - 1) as f64))
        .fold(f64::INFINITY, f64::min)
}

/// `F′ > 0` on a 4001-point grid of `[−2, 2]`.
pub fn monotonicity_check(transport: &OneVarSeries) -> bool {
    min_derivative(transport, 4001) > 0.0
}

/// Coefficient of `β^q` in `m_i`; order `p` is still being filled in `cur`.
fn order_term<'a>(table: &'a [Vec<Rational>], cur: &'a [Rational], p: usize, q: usize, i: usize) -> &'a Rational {
    if q == p {
        &cur[i]
    } else {
        &table[q][i]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentOracle {
    pub beta: f64,
    /// `τ_V(x^k)` for `k = 0..=kmax`.
    pub moments: Vec<f64>,
    /// Per-moment error estimate from the last retained term and the ratio.
    pub error_estimate: Vec<f64>,
    /// Largest ratio of successive nonzero terms at the top of the series.
    pub ratio: f64,
    pub order: usize,
    /// `coefficients[k][p]`: coefficient of `β^p` in `τ_V(x^k)`.
    pub coefficients: Vec<Vec<f64>>,
}

/// Moments of the Gibbs law of `½x² + βU(x)`, where `U` is given by `unit`,
/// from the loop equations
/// `m_{k+1} + β Σ_d d·u_d·m_{k+d−1} = Σ_{l<k} m_l m_{k−1−l}`,
/// solved order by order in `β` up to `β^order` with exact rationals.
pub fn moment_recursion(beta: f64, unit: &OneVarSeries, kmax: usize, order: usize) -> Result<MomentOracle, SolverError> {
    if unit.coeff(0) != 0.0 {
        return Err(SolverError::InvalidPotential("constant term in unit potential".into()));
    }
    let u: Vec<(usize, Rational)> = unit
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(d, c)| {
            rational_from_f64(*c)
                .map(|r| (d, r * Rational::from_integer(d.into())))
                .ok_or_else(|| SolverError::InvalidPotential(format!("non-finite coefficient {c}")))
        })
        .collect::<Result<_, _>>()?;
    let deg = unit.degree().unwrap_or(0).max(2);
    // Order p needs indices up to kmax + (order − p)(deg − 2).
    let reach = |p: usize| kmax + (order - p) * (deg - 2);
    let mut table: Vec<Vec<Rational>> = Vec::with_capacity(order + 1);
    for p in 0..=order {
        let top = reach(p);
        let mut m = vec![Rational::zero(); top + 1];
        if p == 0 {
            m[0] = Rational::from_integer(1.into());
        }
        for k in 0..top {
            let mut v = Rational::zero();
            for l in 0..k {
                for q in 0..=p {
                    v += order_term(&table, &m, p, q, l) * order_term(&table, &m, p, p - q, k - 1 - l);
                }
            }
            if p > 0 {
                for (d, du) in &u {
                    v -= du * &table[p - 1][k + d - 1];
                }
            }
            m[k + 1] = v;
        }
        table.push(m);
    }

    let mut moments = Vec::with_capacity(kmax + 1);
    let mut error_estimate = Vec::with_capacity(kmax + 1);
    let mut coefficients = Vec::with_capacity(kmax + 1);
    let mut worst_ratio: f64 = 0.0;
    for k in 0..=kmax {
        let c: Vec<f64> = (0..=order).map(|p| table[p][k].to_f64().unwrap_or(f64::NAN)).collect();
        let terms: Vec<f64> = c.iter().enumerate().map(|(p, v)| v * beta.powi(p as i32)).collect();
        let nonzero: Vec<f64> = terms.iter().copied().filter(|t| *t != 0.0).collect();
        let (est, ratio) = match nonzero.len() {
            0 | 1 => (0.0, 0.0),
            len => {
                let last = nonzero[len - 1].abs();
                let ratio = last / nonzero[len - 2].abs();
                let est = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
                (est, ratio)
            }
        };
        worst_ratio = worst_ratio.max(ratio);
        moments.push(terms.iter().sum());
        error_estimate.push(est);
        coefficients.push(c);
    }
    if worst_ratio >= 1.0 {
        return Err(SolverError::Divergence { ratio: worst_ratio });
    }
    Ok(MomentOracle {
        beta,
        moments,
        error_estimate,
        ratio: worst_ratio,
        order,
        coefficients,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub beta: f64,
    pub k: usize,
    pub moment_transport: f64,
    pub moment_oracle: f64,
    pub abs_diff: f64,
}

/// Solves at each `β` and compares pushforward moments with the oracle.
pub fn oracle_comparison(
    unit: &OneVarSeries,
    betas: &[f64],
    cfg: &SolverConfig,
    kmax: usize,
    order: usize,
) -> Result<Vec<OracleRow>, SolverError> {
    let per_beta: Vec<Vec<OracleRow>> = betas
        .par_iter()
        .map(|&beta| {
            let w = OneVarSeries::new(unit.coeffs.iter().map(|c| c * beta).collect(), cfg.a);
            let sol = solve_1d(&w, cfg)?;
            let oracle = moment_recursion(beta, unit, kmax, order)?;
            let pushed = pushforward_moments(&sol.transport, kmax);
            Ok((0..=kmax)
                .map(|k| OracleRow {
                    beta,
                    k,
                    moment_transport: pushed[k],
                    moment_oracle: oracle.moments[k],
                    abs_diff: (pushed[k] - oracle.moments[k]).abs(),
                })
                .collect())
        })
        .collect::<Result<_, SolverError>>()?;
    Ok(per_beta.into_iter().flatten().collect())
}
