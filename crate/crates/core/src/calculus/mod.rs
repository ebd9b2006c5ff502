//! Derivations, graded operators and the tensor contractions.
//!
//! Generator indices are 0-based. Products inside the tensor algebra are
//! truncated by total degree `|a| + |b|`, the same rule used for words.

mod tensor;

pub use tensor::{TensorMatrix, TensorPoly};

use crate::error::{AlgebraError, AlgebraResult};
use crate::ncalg::{NCPoly, PolyVec, Word};
use crate::scalar::Coeff;
use crate::semitrace::TraceCache;

fn check_letter(j: usize, n: usize) -> AlgebraResult<()> {
    if j < n {
        Ok(())
    } else {
        Err(AlgebraError::LetterOutOfRange { letter: j + 1, n })
    }
}

/// Free difference quotient: `Σ_{q = A X_j B} A⊗B`.
pub fn fdq<C: Coeff>(p: &NCPoly<C>, j: usize) -> AlgebraResult<TensorPoly<C>> {
    let sig = p.signature();
    check_letter(j, sig.n)?;
    let mut out = TensorPoly::zero(sig);
    for (w, c) in p.iter() {
        let l = w.letters();
        for (i, &x) in l.iter().enumerate() {
            if x as usize == j {
                out.push_term(Word::from_letters(&l[..i]), Word::from_letters(&l[i + 1..]), c.clone());
            }
        }
    }
    Ok(out)
}

/// Cyclic derivative: `Σ_{q = A X_j B} B A`.
pub fn cyclic_derivative<C: Coeff>(p: &NCPoly<C>, j: usize) -> AlgebraResult<NCPoly<C>> {
    let sig = p.signature();
    check_letter(j, sig.n)?;
    let mut out = NCPoly::zero(sig);
    for (w, c) in p.iter() {
        let l = w.letters();
        for (i, &x) in l.iter().enumerate() {
            if x as usize == j {
                out.push_term(Word::concat3(&l[i + 1..], &[], &l[..i]), c.clone());
            }
        }
    }
    Ok(out)
}

/// `(𝒟_1 p, ..., 𝒟_n p)`.
pub fn cyclic_gradient<C: Coeff>(p: &NCPoly<C>) -> PolyVec<C> {
    let sig = p.signature();
    let entries = (0..sig.n)
        .map(|j| cyclic_derivative(p, j).expect("index below n"))
        .collect();
    PolyVec::new(sig, entries).expect("one entry per generator")
}

/// Multiplies each degree-k monomial by k.
pub fn number_op<C: Coeff>(p: &NCPoly<C>) -> NCPoly<C> {
    let mut out = NCPoly::zero(p.signature());
    for (w, c) in p.iter() {
        out.push_term(w.clone(), c.clone() * C::from_int(w.len() as i64));
    }
    out
}

/// Drops the constant term.
pub fn project0<C: Coeff>(p: &NCPoly<C>) -> NCPoly<C> {
    let mut out = NCPoly::zero(p.signature());
    for (w, c) in p.iter().filter(|(w, _)| !w.is_empty()) {
        out.push_term(w.clone(), c.clone());
    }
    out
}

/// Inverse of the number operator on the non-constant part.
pub fn sigma_inv<C: Coeff>(p: &NCPoly<C>) -> NCPoly<C> {
    let mut out = NCPoly::zero(p.signature());
    for (w, c) in p.iter().filter(|(w, _)| !w.is_empty()) {
        out.push_term(w.clone(), c.clone() / C::from_int(w.len() as i64));
    }
    out
}

/// Averages each word over its cyclic rotations.
pub fn cyclic_symmetrize<C: Coeff>(p: &NCPoly<C>) -> NCPoly<C> {
    let mut out = NCPoly::zero(p.signature());
    for (w, c) in p.iter() {
        if w.is_empty() {
            out.push_term(w.clone(), c.clone());
            continue;
        }
        let share = c.clone() / C::from_int(w.len() as i64);
        for k in 0..w.len() {
            out.push_term(w.rotated(k), share.clone());
        }
    }
    out
}

pub fn is_cyclically_symmetric<C: Coeff>(p: &NCPoly<C>) -> bool {
    cyclic_symmetrize(p) == *p
}

/// `(𝒥f)_ij = ∂_j f_i`.
pub fn jacobian<C: Coeff>(f: &PolyVec<C>) -> TensorMatrix<C> {
    let sig = f.signature();
    TensorMatrix::from_fn(sig, |i, j| fdq(f.get(i), j).expect("index below n"))
}

/// Adjoint of `∂_j` for the semicircle pairing, via
/// `∂_j*(a⊗b) = a X_j b − (1⊗τ)(∂_j a)·b − a·(τ⊗1)(∂_j b)`.
pub fn fdq_adjoint<C: Coeff>(cache: &TraceCache, q: &TensorPoly<C>, j: usize) -> AlgebraResult<NCPoly<C>> {
    let sig = q.signature();
    check_letter(j, sig.n)?;
    if let Some(d) = q.total_degree() {
        if d >= sig.dmax {
            return Err(AlgebraError::TruncationOverflow { degree: d, dmax: sig.dmax });
        }
    }
    let letter = [j as u8];
    let mut out = NCPoly::zero(sig);
    for ((a, b), c) in q.iter() {
        let (al, bl) = (a.letters(), b.letters());
        out.push_term(Word::concat3(al, &letter, bl), c.clone());
        // a = a' X_j a'': τ(a'')·a'·b
        for (i, &x) in al.iter().enumerate() {
            if x as usize == j {
                let t: C = cache.tau_coeff(&Word::from_letters(&al[i + 1..]));
                if !t.is_zero() {
                    out.push_term(Word::concat3(&al[..i], &[], bl), -(c.clone() * t));
                }
            }
        }
        // b = b' X_j b'': τ(b')·a·b''
        for (i, &x) in bl.iter().enumerate() {
            if x as usize == j {
                let t: C = cache.tau_coeff(&Word::from_letters(&bl[..i]));
                if !t.is_zero() {
                    out.push_term(Word::concat3(al, &[], &bl[i + 1..]), -(c.clone() * t));
                }
            }
        }
    }
    Ok(out)
}

/// `(𝒥*M)_j = Σ_i ∂_i*(M_ji)`.
pub fn jacobian_adjoint<C: Coeff>(cache: &TraceCache, m: &TensorMatrix<C>) -> AlgebraResult<PolyVec<C>> {
    let sig = m.signature();
    let mut out = Vec::with_capacity(sig.n);
    for j in 0..sig.n {
        let mut acc = NCPoly::zero(sig);
        for i in 0..sig.n {
            acc.add_scaled(&fdq_adjoint(cache, m.get(j, i), i)?, &C::one())?;
        }
        out.push(acc);
    }
    PolyVec::new(sig, out)
}

/// `(1⊗τ + τ⊗1)(q)`.
pub fn sym_partial_trace<C: Coeff>(cache: &TraceCache, q: &TensorPoly<C>) -> NCPoly<C> {
    cache.tau_tensor_sym(q)
}

/// `(τ⊗τ)(q)`.
pub fn full_trace<C: Coeff>(cache: &TraceCache, q: &TensorPoly<C>) -> C {
    cache.tau_tau(q)
}
