use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{AlgebraError, AlgebraResult};
use crate::ncalg::{accumulate, NCPoly, PolyVec, Signature, TruncationLoss, Word};
use crate::scalar::Coeff;

/// Left terms handled per parallel task. Fixed so that float sums do not
/// depend on the number of threads.
const CHUNK: usize = 64;

/// Element of the algebraic tensor product with the opposite algebra.
/// Terms satisfy `|a| + |b| ≤ dmax`.
#[derive(Clone, PartialEq)]
pub struct TensorPoly<C: Coeff> {
    sig: Signature,
    terms: BTreeMap<(Word, Word), C>,
}

impl<C: Coeff> TensorPoly<C> {
    pub fn zero(sig: Signature) -> Self {
        Self {
            sig,
            terms: BTreeMap::new(),
        }
    }

    /// `1⊗1`.
    pub fn one(sig: Signature) -> Self {
        let mut t = Self::zero(sig);
        t.terms.insert((Word::empty(), Word::empty()), C::one());
        t
    }

    pub fn elementary(sig: Signature, a: Word, b: Word, c: C) -> AlgebraResult<Self> {
        Self::from_terms(sig, [((a, b), c)])
    }

    pub fn from_terms(sig: Signature, terms: impl IntoIterator<Item = ((Word, Word), C)>) -> AlgebraResult<Self> {
        let mut t = Self::zero(sig);
        for ((a, b), c) in terms {
            let len = a.len() + b.len();
            if len > sig.dmax {
                return Err(AlgebraError::WordTooLong { len, dmax: sig.dmax });
            }
            if let Some(&l) = a.letters().iter().chain(b.letters()).find(|&&l| l as usize >= sig.n) {
                return Err(AlgebraError::LetterOutOfRange {
                    letter: l as usize + 1,
                    n: sig.n,
                });
            }
            accumulate(&mut t.terms, (a, b), c);
        }
        Ok(t)
    }

    pub(crate) fn push_term(&mut self, a: Word, b: Word, c: C) {
        debug_assert!(a.len() + b.len() <= self.sig.dmax);
        accumulate(&mut self.terms, (a, b), c);
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Word, Word), &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, a: &Word, b: &Word) -> C {
        // BTreeMap lookup needs an owned key pair.
        self.terms
            .get(&(a.clone(), b.clone()))
            .cloned()
            .unwrap_or_else(C::zero)
    }

    /// Largest `|a| + |b|` over stored terms.
    pub fn total_degree(&self) -> Option<usize> {
        self.terms.keys().map(|(a, b)| a.len() + b.len()).max()
    }

    pub fn try_add(&self, other: &Self) -> AlgebraResult<Self> {
        let mut out = self.clone();
        out.add_scaled(other, &C::one())?;
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> AlgebraResult<Self> {
        let mut out = self.clone();
        out.add_scaled(other, &-C::one())?;
        Ok(out)
    }

    pub fn add_scaled(&mut self, other: &Self, factor: &C) -> AlgebraResult<()> {
        self.sig.ensure_same(&other.sig)?;
        for (k, c) in &other.terms {
            accumulate(&mut self.terms, k.clone(), c.clone() * factor.clone());
        }
        Ok(())
    }

    pub fn scale(&self, factor: &C) -> Self {
        let mut out = Self::zero(self.sig);
        for (k, c) in &self.terms {
            accumulate(&mut out.terms, k.clone(), c.clone() * factor.clone());
        }
        out
    }

    /// `σ(a⊗b) = b⊗a`.
    pub fn flip(&self) -> Self {
        let mut out = Self::zero(self.sig);
        for ((a, b), c) in &self.terms {
            out.terms.insert((b.clone(), a.clone()), c.clone());
        }
        out
    }

    /// `(a⊗b)† = b*⊗a*`, extended linearly.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zero(self.sig);
        for ((a, b), c) in &self.terms {
            out.terms.insert((b.reversed(), a.reversed()), c.clone());
        }
        out
    }

    /// Projective-norm upper bound induced by the stored representation:
    /// `Σ |c| A^{|a|+|b|}`.
    pub fn pnorm(&self, a: f64) -> f64 {
        self.terms
            .iter()
            .map(|((l, r), c)| c.abs_f64() * a.powi((l.len() + r.len()) as i32))
            .sum()
    }

    fn total_degree_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.total_degree().map_or(0, |d| d + 1)];
        for ((a, b), c) in &self.terms {
            mass[a.len() + b.len()] += c.abs_f64();
        }
        mass
    }

    /// Terms sorted by total degree, plus `start[d]` = first index of degree ≥ d.
    fn by_total_degree(&self) -> (Vec<(&Word, &Word, &C)>, Vec<usize>) {
        let mut v: Vec<_> = self.terms.iter().map(|((a, b), c)| (a, b, c)).collect();
        v.sort_by_key(|(a, b, _)| a.len() + b.len());
        let dmax = self.sig.dmax;
        let mut start = vec![v.len(); dmax + 2];
        for (i, (a, b, _)) in v.iter().enumerate().rev() {
            for s in start.iter_mut().take(a.len() + b.len() + 1) {
                *s = i;
            }
        }
        (v, start)
    }

    /// `(a⊗b)#(A⊗B) = aA⊗Bb`, truncated by total degree.
    pub fn sharp_tracked(&self, other: &Self, loss: &mut TruncationLoss) -> AlgebraResult<Self> {
        self.sig.ensure_same(&other.sig)?;
        let dmax = self.sig.dmax;
        let (right, start) = other.by_total_degree();
        let right_mass = other.total_degree_mass();
        let left: Vec<_> = self.terms.iter().collect();
        let parts: Vec<(BTreeMap<(Word, Word), C>, TruncationLoss)> = left
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = BTreeMap::new();
                let mut lost = TruncationLoss::new();
                for ((a, b), c) in chunk {
                    let t1 = a.len() + b.len();
                    let room = dmax - t1;
                    for (ra, rb, rc) in &right[..start[room + 1]] {
                        accumulate(&mut acc, (a.concat(ra), rb.concat(b)), (*c).clone() * (*rc).clone());
                    }
                    let a1 = c.abs_f64();
                    for (e, &m) in right_mass.iter().enumerate().skip(room + 1) {
                        lost.add(t1 + e, a1 * m);
                    }
                }
                (acc, lost)
            })
            .collect();
        Ok(Self::merge(self.sig, parts, loss))
    }

    fn merge(sig: Signature, parts: Vec<(BTreeMap<(Word, Word), C>, TruncationLoss)>, loss: &mut TruncationLoss) -> Self {
        let mut iter = parts.into_iter();
        let Some((mut terms, first_loss)) = iter.next() else {
            return Self::zero(sig);
        };
        loss.absorb(&first_loss);
        for (part, lost) in iter {
            for (k, c) in part {
                accumulate(&mut terms, k, c);
            }
            loss.absorb(&lost);
        }
        Self { sig, terms }
    }

    pub fn sharp(&self, other: &Self) -> AlgebraResult<Self> {
        self.sharp_tracked(other, &mut TruncationLoss::new())
    }

    /// `(a⊗b)#g = a·g·b`, truncated.
    pub fn sharp_poly_tracked(&self, g: &NCPoly<C>, loss: &mut TruncationLoss) -> AlgebraResult<NCPoly<C>> {
        self.sig.ensure_same(&g.signature())?;
        let dmax = self.sig.dmax;
        let right: Vec<_> = g.iter().collect();
        let mut start = vec![right.len(); dmax + 2];
        for (i, (w, _)) in right.iter().enumerate().rev() {
            for s in start.iter_mut().take(w.len() + 1) {
                *s = i;
            }
        }
        let right_mass = g.degree_mass();
        let mut out = BTreeMap::new();
        for ((a, b), c) in &self.terms {
            let t1 = a.len() + b.len();
            let room = dmax - t1;
            for (w, gc) in &right[..start[room + 1]] {
                accumulate(
                    &mut out,
                    Word::concat3(a.letters(), w.letters(), b.letters()),
                    c.clone() * (*gc).clone(),
                );
            }
            let a1 = c.abs_f64();
            for (e, &m) in right_mass.iter().enumerate().skip(room + 1) {
                loss.add(t1 + e, a1 * m);
            }
        }
        Ok(NCPoly::from_map(self.sig, out))
    }

    pub fn sharp_poly(&self, g: &NCPoly<C>) -> AlgebraResult<NCPoly<C>> {
        self.sharp_poly_tracked(g, &mut TruncationLoss::new())
    }

    pub fn to_float(&self) -> TensorPoly<f64> {
        let mut out = TensorPoly::zero(self.sig);
        for (k, c) in &self.terms {
            accumulate(&mut out.terms, k.clone(), c.as_f64());
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (k, c) in &self.terms {
            let o = other.terms.get(k).cloned().unwrap_or_else(C::zero);
            m = m.max((c.clone() - o).abs_f64());
        }
        for (k, c) in &other.terms {
            if !self.terms.contains_key(k) {
                m = m.max(c.abs_f64());
            }
        }
        m
    }
}

impl<C: Coeff> fmt::Debug for TensorPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, ((a, b), c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}·{}⊗{}", c.to_decimal_string(), a, b)?;
        }
        Ok(())
    }
}

/// Square `n×n` matrix of tensor elements, row-major.
#[derive(Clone, PartialEq)]
pub struct TensorMatrix<C: Coeff> {
    sig: Signature,
    entries: Vec<TensorPoly<C>>,
}

impl<C: Coeff> TensorMatrix<C> {
    pub fn zero(sig: Signature) -> Self {
        Self {
            sig,
            entries: vec![TensorPoly::zero(sig); sig.n * sig.n],
        }
    }

    pub fn identity(sig: Signature) -> Self {
        let mut m = Self::zero(sig);
        for i in 0..sig.n {
            m.entries[i * sig.n + i] = TensorPoly::one(sig);
        }
        m
    }

    pub fn from_fn(sig: Signature, mut f: impl FnMut(usize, usize) -> TensorPoly<C>) -> Self {
        let n = sig.n;
        let entries = (0..n * n).map(|k| f(k / n, k % n)).collect();
        Self { sig, entries }
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn dim(&self) -> usize {
        self.sig.n
    }

    pub fn get(&self, i: usize, j: usize) -> &TensorPoly<C> {
        &self.entries[i * self.sig.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: TensorPoly<C>) {
        self.entries[i * self.sig.n + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(TensorPoly::is_zero)
    }

    pub fn try_add(&self, other: &Self) -> AlgebraResult<Self> {
        self.sig.ensure_same(&other.sig)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.try_add(b))
            .collect::<AlgebraResult<_>>()?;
        Ok(Self { sig: self.sig, entries })
    }

    pub fn scale(&self, factor: &C) -> Self {
        Self {
            sig: self.sig,
            entries: self.entries.iter().map(|e| e.scale(factor)).collect(),
        }
    }

    /// `(M#N)_ik = Σ_j M_ij # N_jk`.
    pub fn sharp_tracked(&self, other: &Self, loss: &mut TruncationLoss) -> AlgebraResult<Self> {
        self.sig.ensure_same(&other.sig)?;
        let n = self.sig.n;
        let cells: Vec<AlgebraResult<(TensorPoly<C>, TruncationLoss)>> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, l) = (k / n, k % n);
                let mut acc = TensorPoly::zero(self.sig);
                let mut lost = TruncationLoss::new();
                for j in 0..n {
                    let prod = self.get(i, j).sharp_tracked(other.get(j, l), &mut lost)?;
                    acc.add_scaled(&prod, &C::one())?;
                }
                Ok((acc, lost))
            })
            .collect();
        let mut entries = Vec::with_capacity(n * n);
        for cell in cells {
            let (e, lost) = cell?;
            loss.absorb(&lost);
            entries.push(e);
        }
        Ok(Self { sig: self.sig, entries })
    }

    pub fn sharp(&self, other: &Self) -> AlgebraResult<Self> {
        self.sharp_tracked(other, &mut TruncationLoss::new())
    }

    /// `(M#g)_i = Σ_j M_ij # g_j`.
    pub fn sharp_vec_tracked(&self, g: &PolyVec<C>, loss: &mut TruncationLoss) -> AlgebraResult<PolyVec<C>> {
        self.sig.ensure_same(&g.signature())?;
        let n = self.sig.n;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = NCPoly::zero(self.sig);
            for j in 0..n {
                acc.add_scaled(&self.get(i, j).sharp_poly_tracked(g.get(j), loss)?, &C::one())?;
            }
            out.push(acc);
        }
        PolyVec::new(self.sig, out)
    }

    pub fn sharp_vec(&self, g: &PolyVec<C>) -> AlgebraResult<PolyVec<C>> {
        self.sharp_vec_tracked(g, &mut TruncationLoss::new())
    }

    /// `Σ_i M_ii`.
    pub fn trace(&self) -> TensorPoly<C> {
        let mut acc = TensorPoly::zero(self.sig);
        for i in 0..self.sig.n {
            acc.add_scaled(self.get(i, i), &C::one()).expect("entries share the signature");
        }
        acc
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.sig, |i, j| self.get(j, i).clone())
    }

    /// Entrywise `σ`.
    pub fn flip(&self) -> Self {
        Self::from_fn(self.sig, |i, j| self.get(i, j).flip())
    }

    /// `max_i Σ_j pnorm(M_ij)`.
    pub fn pnorm_mat(&self, a: f64) -> f64 {
        (0..self.sig.n)
            .map(|i| (0..self.sig.n).map(|j| self.get(i, j).pnorm(a)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_float(&self) -> TensorMatrix<f64> {
        TensorMatrix {
            sig: self.sig,
            entries: self.entries.iter().map(TensorPoly::to_float).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

impl<C: Coeff> fmt::Debug for TensorMatrix<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.sig.n;
        let rows: Vec<_> = (0..n).map(|i| &self.entries[i * n..(i + 1) * n]).collect();
        f.debug_list().entries(rows).finish()
    }
}
