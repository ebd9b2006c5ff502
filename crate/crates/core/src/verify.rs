//! Independent checks on a computed transport.
//!
//! The law of `Y = X + f` is never built as a state. Everything is "τ of a
//! polynomial in `Y`", and the Gibbs property is tested through the
//! Schwinger-Dyson equation `τ(P·𝒟V) = (τ⊗τ)(Tr 𝒥P)` on monomial test
//! vectors. The lemma suite reruns the exact algebraic identities on random
//! rational inputs.

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{
    cyclic_derivative, cyclic_gradient, cyclic_symmetrize, fdq, fdq_adjoint, full_trace, jacobian, jacobian_adjoint,
    number_op, project0, sigma_inv, sym_partial_trace, TensorMatrix, TensorPoly,
};
use crate::error::AlgebraResult;
use crate::ncalg::{NCPoly, PolyVec, Signature, TruncationLoss, Word};
use crate::scalar::{Coeff, Rational};
use crate::semitrace::TraceCache;
use crate::solver::{q_series_from_jacobian, series_ratio, SolverConfig, SolverError};

#[derive(Clone, Debug, Serialize)]
pub struct SdEntry {
    /// 1-based slot holding the monomial.
    pub slot: usize,
    /// 1-based letters of the monomial.
    pub word: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`.
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SDReport {
    pub eval_dmax: usize,
    pub test_degree: usize,
    pub entries: Vec<SdEntry>,
    /// Largest `|defect|` over single-slot test vectors.
    pub max_single: f64,
    /// Largest residual over all vectors whose entries are monomials (or 0)
    /// of degree ≤ `test_degree`. The residual is additive over slots.
    pub max_residual: f64,
    /// Mass dropped while evaluating, at radius 2. Bounds the evaluation
    /// error because `|τ(w)| ≤ 2^{|w|}`.
    pub truncation_loss: f64,
}

fn lift<C: Coeff>(p: &NCPoly<C>, dmax: usize, loss: &mut TruncationLoss) -> NCPoly<C> {
    p.with_dmax(dmax, loss)
}

fn lift_vec<C: Coeff>(v: &PolyVec<C>, dmax: usize, loss: &mut TruncationLoss) -> AlgebraResult<PolyVec<C>> {
    let sig = v.signature().with_dmax(dmax);
    PolyVec::new(sig, v.entries().iter().map(|p| lift(p, dmax, loss)).collect())
}

/// Memoized `τ(w(Y))` for words in the abstract generators.
struct TraceAtY<'a, C: Coeff> {
    cache: &'a TraceCache,
    y: &'a PolyVec<C>,
    memo: HashMap<Word, C>,
    loss: TruncationLoss,
}

impl<'a, C: Coeff> TraceAtY<'a, C> {
    fn new(cache: &'a TraceCache, y: &'a PolyVec<C>) -> Self {
        Self {
            cache,
            y,
            memo: HashMap::new(),
            loss: TruncationLoss::new(),
        }
    }

    fn get(&mut self, w: &Word) -> AlgebraResult<C> {
        if let Some(v) = self.memo.get(w) {
            return Ok(v.clone());
        }
        let mono = NCPoly::monomial(self.y.signature(), w.clone(), C::one())?;
        let v = self.cache.tau_poly(&mono.substitute_tracked(self.y, &mut self.loss)?);
        self.memo.insert(w.clone(), v.clone());
        Ok(v)
    }
}

/// Schwinger-Dyson defect `τ(P_j(Y)·(𝒟_jV)(Y)) − (τ⊗τ)(∂_jP_j)(Y)` for the
/// test vector with `p` in slot `j` and zeros elsewhere, `V = ½ΣX² + W`.
/// Returns `(lhs, rhs, loss)`; everything lives in `y`'s signature.
pub fn sd_defect<C: Coeff>(
    cache: &TraceCache,
    y: &PolyVec<C>,
    w: &NCPoly<C>,
    j: usize,
    p: &NCPoly<C>,
) -> Result<(C, C, TruncationLoss), SolverError> {
    let sig = y.signature();
    sig.ensure_same(&w.signature())?;
    sig.ensure_same(&p.signature())?;
    let mut loss = TruncationLoss::new();
    let dv = NCPoly::var(sig, j)?.try_add(&cyclic_derivative(w, j)?)?;
    let dv_y = dv.substitute_tracked(y, &mut loss)?;
    let p_y = p.substitute_tracked(y, &mut loss)?;
    let lhs = cache.tau_poly(&p_y.mul_tracked(&dv_y, &mut loss)?);
    let mut at_y = TraceAtY::new(cache, y);
    let mut rhs = C::zero();
    for ((a, b), c) in fdq(p, j)?.iter() {
        let ta = at_y.get(a)?;
        if ta.is_zero() {
            continue;
        }
        rhs += c.clone() * ta * at_y.get(b)?;
    }
    loss.absorb(&at_y.loss);
    Ok((lhs, rhs, loss))
}

/// `|LHS − RHS|` of the Schwinger-Dyson equation for a full test vector.
pub fn sd_residual<C: Coeff>(
    cache: &TraceCache,
    y: &PolyVec<C>,
    w: &NCPoly<C>,
    p: &PolyVec<C>,
) -> Result<f64, SolverError> {
    let mut total = C::zero();
    for (j, pj) in p.entries().iter().enumerate() {
        let (lhs, rhs, _) = sd_defect(cache, y, w, j, pj)?;
        total += lhs - rhs;
    }
    Ok(total.abs_f64())
}

/// All words of length `≤ degree` over `n` letters, in (length, lex) order.
pub fn words_up_to(n: usize, degree: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..degree {
        let mut next = Vec::with_capacity(layer.len() * n);
        for w in &layer {
            for j in 0..n {
                next.push(w.concat(&Word::letter(j)));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Evaluates the Schwinger-Dyson defect on every single-slot monomial test
/// vector of degree `≤ test_degree`, inside a signature of degree cap
/// `eval_dmax` (at least the one of `y`).
pub fn sd_report<C: Coeff>(
    cache: &TraceCache,
    y: &PolyVec<C>,
    w: &NCPoly<C>,
    test_degree: usize,
    eval_dmax: usize,
) -> Result<SDReport, SolverError> {
    let eval_dmax = eval_dmax.max(y.signature().dmax);
    let mut lift_loss = TruncationLoss::new();
    let y = lift_vec(y, eval_dmax, &mut lift_loss)?;
    let w = lift(w, eval_dmax, &mut lift_loss);
    let sig = y.signature();
    let cases: Vec<(usize, Word)> = (0..sig.n)
        .flat_map(|j| words_up_to(sig.n, test_degree).into_iter().map(move |m| (j, m)))
        .collect();
    let evaluated: Vec<_> = cases
        .par_iter()
        .map(|(j, m)| {
            let p = NCPoly::monomial(sig, m.clone(), C::one())?;
            let (lhs, rhs, loss) = sd_defect(cache, &y, &w, *j, &p)?;
            Ok::<_, SolverError>((*j, m.clone(), lhs, rhs, loss))
        })
        .collect::<Result<_, _>>()?;

    let mut loss = TruncationLoss::new();
    let mut entries = Vec::with_capacity(evaluated.len());
    let mut hi = vec![0.0f64; sig.n];
    let mut lo = vec![0.0f64; sig.n];
    for (j, m, lhs, rhs, l) in evaluated {
        loss.absorb(&l);
        let defect = (lhs.clone() - rhs.clone()).as_f64();
        hi[j] = hi[j].max(defect);
        lo[j] = lo[j].min(defect);
        entries.push(SdEntry {
            slot: j + 1,
            word: m.to_one_based(),
            lhs: lhs.as_f64(),
            rhs: rhs.as_f64(),
            defect,
        });
    }
    let max_single = entries.iter().map(|e| e.defect.abs()).fold(0.0, f64::max);
    let max_residual = hi.iter().sum::<f64>().max(-lo.iter().sum::<f64>());
    Ok(SDReport {
        eval_dmax,
        test_degree,
        entries,
        max_single,
        max_residual,
        truncation_loss: loss.at(2.0),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyShift {
    /// `(τ⊗τ)Tr log(1 + 𝒥𝒟g)` from the alternating matrix-power series.
    pub value: f64,
    /// The same quantity rebuilt from `½τ(Q_1) − ½τ(Q)`.
    pub value_via_q: f64,
    /// `(τ⊗τ)Tr 𝒥𝒟g`.
    pub first_order: f64,
    /// `−½(τ⊗τ)Tr (𝒥𝒟g)²`.
    pub second_order: f64,
    pub tail_bound: f64,
    pub tail_bound_via_q: f64,
    pub terms: usize,
    /// `pnorm_mat(𝒥𝒟g, 2)`, the ratio of the direct series.
    pub ratio: f64,
    pub truncation_loss: f64,
}

/// Entropy shift of the transport with potential `g`.
pub fn entropy_shift<C: Coeff>(cache: &TraceCache, g: &NCPoly<C>, cfg: &SolverConfig) -> Result<EntropyShift, SolverError> {
    let sig = g.signature();
    let jac = jacobian(&cyclic_gradient(g));
    let guard = jac.pnorm_mat(cfg.a_prime);
    if guard >= 1.0 {
        return Err(SolverError::Divergence { ratio: guard });
    }
    let s = jac.pnorm_mat(2.0);
    let n = sig.n as f64;
    // |(τ⊗τ)Tr M| ≤ n·pnorm_mat(M, 2), and pnorm_mat is submultiplicative.
    let tail = |m: usize| n * s.powi(m as i32 + 1) / ((m as f64 + 1.0) * (1.0 - s));
    let mut cutoff = 1;
    while s > 0.0 && tail(cutoff) >= cfg.tol_series && cutoff < 10_000 {
        cutoff += 1;
    }

    let mut loss = TruncationLoss::new();
    let mut power = jac.clone();
    let mut value = C::zero();
    let mut first_order = C::zero();
    let mut second_order = C::zero();
    let mut terms = 0;
    for m in 1..=cutoff {
        if power.is_zero() {
            break;
        }
        let t = full_trace(cache, &power.trace());
        let sign = if m % 2 == 1 { 1 } else { -1 };
        let term = t * C::from_ratio(sign, m as i64);
        match m {
            1 => first_order = term.clone(),
            2 => second_order = term.clone(),
            _ => {}
        }
        value += term;
        terms += 1;
        if m < cutoff {
            power = power.sharp_tracked(&jac, &mut loss)?;
        }
    }
    let tail_bound = if s == 0.0 || power.is_zero() { 0.0 } else { tail(cutoff) };

    let q1 = sym_partial_trace(cache, &jac.trace());
    let r = series_ratio(&number_op(g), cfg.a);
    if r >= 1.0 {
        return Err(SolverError::Divergence { ratio: r });
    }
    let series = q_series_from_jacobian(cache, &jac, r, cfg.tol_series)?;
    loss.absorb(&series.loss);
    let half = C::from_ratio(1, 2);
    let via_q = half.clone() * cache.tau_poly(&q1) - half * cache.tau_poly(&series.value);

    Ok(EntropyShift {
        value: value.as_f64(),
        value_via_q: via_q.as_f64(),
        first_order: first_order.as_f64(),
        second_order: second_order.as_f64(),
        tail_bound,
        // τ of the Q tail is bounded by its norm at radius 2 ≤ A.
        tail_bound_via_q: 0.5 * series.tail_bound,
        terms,
        ratio: s,
        truncation_loss: loss.at(2.0),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub n: usize,
    pub degree_cap: usize,
    pub trials: usize,
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

type ExactVec = PolyVec<Rational>;
type Exact = NCPoly<Rational>;

fn random_coeff(rng: &mut ChaCha8Rng) -> Rational {
    let num = rng.random_range(-4i64..=4);
    let den = rng.random_range(1i64..=3);
    Rational::from_ratio(num, den)
}

fn random_word(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Word {
    let letters: Vec<u8> = (0..len).map(|_| rng.random_range(0..n) as u8).collect();
    Word::from_letters(&letters)
}

/// Random polynomial with 1 to 5 terms of degree in `1..=degree_cap`.
fn random_poly(rng: &mut ChaCha8Rng, sig: Signature, degree_cap: usize) -> Exact {
    let count = rng.random_range(1..=5);
    let terms: Vec<(Word, Rational)> = (0..count)
        .map(|_| {
            let len = rng.random_range(1..=degree_cap);
            (random_word(rng, sig.n, len), random_coeff(rng))
        })
        .collect();
    NCPoly::from_terms(sig, terms).expect("words fit the signature")
}

fn random_cyclic(rng: &mut ChaCha8Rng, sig: Signature, degree_cap: usize) -> Exact {
    cyclic_symmetrize(&random_poly(rng, sig, degree_cap))
}

fn random_cyclic_self_adjoint(rng: &mut ChaCha8Rng, sig: Signature, degree_cap: usize) -> Exact {
    let h = random_poly(rng, sig, degree_cap);
    let half = Rational::from_ratio(1, 2);
    cyclic_symmetrize(&h.try_add(&h.adjoint()).expect("same signature").scale(&half))
}

/// `Σ_j a_j b_j`.
fn dot(a: &ExactVec, b: &ExactVec) -> AlgebraResult<Exact> {
    let mut out = NCPoly::zero(a.signature());
    for (x, y) in a.entries().iter().zip(b.entries()) {
        out.add_scaled(&x.mul(y)?, &Rational::from_int(1))?;
    }
    Ok(out)
}

fn map_vec(v: &ExactVec, f: impl Fn(&Exact) -> Exact) -> ExactVec {
    PolyVec::new(v.signature(), v.entries().iter().map(f).collect()).expect("same length")
}

fn matrix_power(m: &TensorMatrix<Rational>, k: usize) -> AlgebraResult<TensorMatrix<Rational>> {
    let mut out = TensorMatrix::identity(m.signature());
    for _ in 0..k {
        out = out.sharp(m)?;
    }
    Ok(out)
}

/// Triple tensors, keyed by legs.
type Triple = BTreeMap<(Word, Word, Word), Rational>;

fn add_triple(t: &mut Triple, key: (Word, Word, Word), c: &Rational) {
    *t.entry(key).or_insert_with(|| Rational::from_int(0)) += c.clone();
}

fn prune(t: Triple) -> Triple {
    t.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

/// `(∂_j ⊗ 1)∂_k` of a polynomial.
fn left_then_split(p: &Exact, j: usize, k: usize) -> AlgebraResult<Triple> {
    let mut out = Triple::new();
    for ((a, b), c) in fdq(p, k)?.iter() {
        let la = a.letters();
        for (i, &x) in la.iter().enumerate() {
            if x as usize == j {
                let key = (Word::from_letters(&la[..i]), Word::from_letters(&la[i + 1..]), b.clone());
                add_triple(&mut out, key, c);
            }
        }
    }
    Ok(prune(out))
}

/// `(1 ⊗ ∂_k)∂_j` of a polynomial.
fn right_then_split(p: &Exact, j: usize, k: usize) -> AlgebraResult<Triple> {
    let mut out = Triple::new();
    for ((a, b), c) in fdq(p, j)?.iter() {
        let lb = b.letters();
        for (i, &x) in lb.iter().enumerate() {
            if x as usize == k {
                let key = (a.clone(), Word::from_letters(&lb[..i]), Word::from_letters(&lb[i + 1..]));
                add_triple(&mut out, key, c);
            }
        }
    }
    Ok(prune(out))
}

/// `⟨a⊗b, c⊗d⟩ = τ(a*c)·τ(b*d)`, extended bilinearly.
fn tensor_pairing(cache: &TraceCache, q: &TensorPoly<Rational>, r: &TensorPoly<Rational>) -> Rational {
    let mut acc = Rational::from_int(0);
    for ((a, b), c) in q.iter() {
        for ((x, y), d) in r.iter() {
            let left: Rational = cache.tau_coeff(&a.reversed().concat(x));
            if left.is_zero() {
                continue;
            }
            let right: Rational = cache.tau_coeff(&b.reversed().concat(y));
            acc += c.clone() * d.clone() * left * right;
        }
    }
    acc
}

struct Outcome {
    cases: usize,
    failure: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            cases: 0,
            failure: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failure.push(what());
        }
    }

    fn finish(self, name: &str) -> IdentityCheck {
        IdentityCheck {
            name: name.to_string(),
            cases: self.cases,
            failures: self.failure.len(),
            first_failure: self.failure.into_iter().next(),
        }
    }
}

type Check = fn(&TraceCache, &mut ChaCha8Rng, Signature, usize, usize) -> AlgebraResult<Outcome>;

fn check_derivative_ignores_symmetrization(
    _: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let h = random_poly(rng, sig, cap);
        let lhs = cyclic_gradient(&cyclic_symmetrize(&project0(&h)));
        out.record(lhs == cyclic_gradient(&h), || format!("h = {h:?}"));
    }
    Ok(out)
}

fn check_symmetrization_formula(
    _: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let g = random_poly(rng, sig, cap);
        let rhs = sigma_inv(&dot(&cyclic_gradient(&g), &PolyVec::identity(sig))?);
        out.record(cyclic_symmetrize(&g) == rhs, || format!("g = {g:?}"));
    }
    Ok(out)
}

fn check_number_commutator(
    _: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let g = random_poly(rng, sig, cap);
        let dg = cyclic_gradient(&g);
        let lhs = map_vec(&dg, number_op);
        let rhs = cyclic_gradient(&number_op(&g)).try_sub(&dg)?;
        out.record(lhs == rhs, || format!("g = {g:?}"));
    }
    Ok(out)
}

fn check_jacobian_euler(
    _: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let f = PolyVec::new(sig, (0..sig.n).map(|_| random_poly(rng, sig, cap)).collect())?;
        let lhs = jacobian(&f).sharp_vec(&PolyVec::identity(sig))?;
        out.record(lhs == map_vec(&f, number_op), || format!("f = {f:?}"));
    }
    Ok(out)
}

fn check_flip_symmetry(
    _: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let g = random_poly(rng, sig, cap);
        let jac = jacobian(&cyclic_gradient(&g));
        out.record(jac.transpose().flip() == jac, || format!("g = {g:?}"));
    }
    Ok(out)
}

fn check_dagger_symmetry(
    _: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let g = random_cyclic_self_adjoint(rng, sig, cap);
        let jac = jacobian(&cyclic_gradient(&g));
        let ok = (0..sig.n).all(|i| (0..sig.n).all(|j| jac.get(i, j).dagger() == *jac.get(i, j)));
        out.record(ok, || format!("g = {g:?}"));
    }
    Ok(out)
}

fn check_coderivation(
    _: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let len = rng.random_range(0..=cap);
        let word = random_word(rng, sig.n, len);
        let p = NCPoly::monomial(sig, word.clone(), Rational::from_int(1))?;
        for j in 0..sig.n {
            for k in 0..sig.n {
                let ok = left_then_split(&p, j, k)? == right_then_split(&p, j, k)?;
                out.record(ok, || format!("word {word}, j={}, k={}", j + 1, k + 1));
            }
        }
    }
    Ok(out)
}

/// `(1/(m+2))𝒟[(1⊗τ+τ⊗1)Tr J^{m+2}] = −𝒥*(J^{m+2}) + J#𝒥*(J^{m+1})`, `J = 𝒥𝒟g`.
fn trace_identity_holds(cache: &TraceCache, g: &Exact, m: i64) -> AlgebraResult<bool> {
    let jac = jacobian(&cyclic_gradient(g));
    let top = matrix_power(&jac, (m + 2) as usize)?;
    let below = matrix_power(&jac, (m + 1) as usize)?;
    let lhs = cyclic_gradient(&sym_partial_trace(cache, &top.trace())).scale(&Rational::from_ratio(1, m + 2));
    let rhs = jac
        .sharp_vec(&jacobian_adjoint(cache, &below)?)?
        .try_sub(&jacobian_adjoint(cache, &top)?)?;
    Ok(lhs == rhs)
}

fn check_trace_identity(
    cache: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let g = random_cyclic(rng, sig, cap);
        for m in -1..=1 {
            let ok = trace_identity_holds(cache, &g, m)?;
            out.record(ok, || format!("m = {m}, g = {g:?}"));
        }
    }
    Ok(out)
}

/// `−𝒥*(𝒥f) − f = 𝒟{(1⊗τ+τ⊗1)Tr 𝒥𝒟g − 𝒩g}` with `f = 𝒟g`.
fn check_k_formula(
    cache: &TraceCache,
    rng: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    trials: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    for _ in 0..trials {
        let g = random_cyclic(rng, sig, cap);
        let f = cyclic_gradient(&g);
        let jac = jacobian(&f);
        let lhs = jacobian_adjoint(cache, &jac)?.scale(&Rational::from_int(-1)).try_sub(&f)?;
        let inner = sym_partial_trace(cache, &jac.trace()).try_sub(&number_op(&g))?;
        out.record(lhs == cyclic_gradient(&inner), || format!("g = {g:?}"));
    }
    Ok(out)
}

/// `τ((∂_j*q)*·p) = ⟨q, ∂_j p⟩`, exhaustive over monomials `p` and
/// elementary `q` of degree `≤ cap`.
fn check_adjoint_pairing(
    cache: &TraceCache,
    _: &mut ChaCha8Rng,
    sig: Signature,
    cap: usize,
    _: usize,
) -> AlgebraResult<Outcome> {
    let mut out = Outcome::new();
    let words = words_up_to(sig.n, cap);
    let one = Rational::from_int(1);
    for j in 0..sig.n {
        for a in &words {
            for b in words.iter().filter(|b| a.len() + b.len() <= cap) {
                let q = TensorPoly::elementary(sig, a.clone(), b.clone(), one.clone())?;
                let adj = fdq_adjoint(cache, &q, j)?.adjoint();
                for p in &words {
                    let pp = NCPoly::monomial(sig, p.clone(), one.clone())?;
                    let lhs = cache.tau_poly(&adj.mul(&pp)?);
                    let rhs = tensor_pairing(cache, &q, &fdq(&pp, j)?);
                    out.record(lhs == rhs, || format!("j={}, q={a}⊗{b}, p={p}", j + 1));
                }
            }
        }
    }
    Ok(out)
}

const CHECKS: [(&str, Check); 10] = [
    ("cyclic gradient ignores symmetrization", check_derivative_ignores_symmetrization),
    ("symmetrization from the cyclic gradient", check_symmetrization_formula),
    ("number operator commutator", check_number_commutator),
    ("jacobian contracted with X is the number operator", check_jacobian_euler),
    ("jacobian of a gradient is flip-symmetric", check_flip_symmetry),
    ("jacobian of a self-adjoint gradient is dagger-invariant", check_dagger_symmetry),
    ("difference quotients commute as a coderivation", check_coderivation),
    ("partial-trace identity for m = -1, 0, 1", check_trace_identity),
    ("K formula", check_k_formula),
    ("adjoint pairing", check_adjoint_pairing),
];

/// Runs every exact identity on `trials` random rational inputs with `n`
/// generators and degree `≤ degree_cap`. The degree cap of the algebra is
/// chosen large enough that no truncation occurs.
pub fn lemma_suite(seed: u64, n: usize, degree_cap: usize, trials: usize) -> Result<LemmaReport, SolverError> {
    let sig = Signature::new(n, 4 * degree_cap.max(1) + 2)?;
    let cache = TraceCache::global();
    let checks: Vec<IdentityCheck> = CHECKS
        .par_iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            check(cache, &mut rng, sig, degree_cap, trials).map(|o| o.finish(name))
        })
        .collect::<AlgebraResult<_>>()?;
    let passed = checks.iter().all(|c| c.failures == 0);
    Ok(LemmaReport {
        seed,
        n,
        degree_cap,
        trials,
        checks,
        passed,
    })
}
