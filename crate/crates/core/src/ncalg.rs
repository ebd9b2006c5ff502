//! Sparse noncommutative polynomials truncated at a global degree.
//!
//! A polynomial lives in a [`Signature`] `(n, dmax)`: words use letters
//! `1..=n` and never exceed length `dmax`. Products drop longer words and
//! record the dropped `‖·‖_A` mass per degree in a [`TruncationLoss`], so
//! the discarded amount can be evaluated afterwards at any radius.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{AlgebraError, AlgebraResult};
use crate::scalar::{Coeff, Rational};

/// Number of generators and the truncation degree shared by every operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub n: usize,
    pub dmax: usize,
}

impl Signature {
    pub fn new(n: usize, dmax: usize) -> AlgebraResult<Self> {
        if n == 0 || n > u8::MAX as usize || dmax == 0 {
            return Err(AlgebraError::InvalidSignature { n, dmax });
        }
        Ok(Self { n, dmax })
    }

    pub fn with_dmax(self, dmax: usize) -> Self {
        Self { n: self.n, dmax }
    }

    pub(crate) fn ensure_same(&self, other: &Signature) -> AlgebraResult<()> {
        if self == other {
            Ok(())
        } else {
            Err(AlgebraError::SignatureMismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, dmax={})", self.n, self.dmax)
    }
}

/// A monomial. Letters are stored 0-based; the public 1-based form appears
/// only at the I/O boundary.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(SmallVec<[u8; 16]>);

impl Word {
    pub fn empty() -> Self {
        Word(SmallVec::new())
    }

    /// Builds from 0-based letters without validation.
    pub fn from_letters(letters: &[u8]) -> Self {
        Word(SmallVec::from_slice(letters))
    }

    pub fn letter(j: usize) -> Self {
        Word(SmallVec::from_slice(&[j as u8]))
    }

    /// Builds from 1-based letters, validated against `sig`.
    pub fn from_one_based(letters: &[usize], sig: Signature) -> AlgebraResult<Self> {
        if letters.len() > sig.dmax {
            return Err(AlgebraError::WordTooLong {
                len: letters.len(),
                dmax: sig.dmax,
            });
        }
        let mut w = SmallVec::with_capacity(letters.len());
        for &l in letters {
            if l == 0 || l > sig.n {
                return Err(AlgebraError::LetterOutOfRange { letter: l, n: sig.n });
            }
            w.push((l - 1) as u8);
        }
        Ok(Word(w))
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&l| l as usize + 1).collect()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = SmallVec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn concat3(a: &[u8], mid: &[u8], b: &[u8]) -> Word {
        let mut v = SmallVec::with_capacity(a.len() + mid.len() + b.len());
        v.extend_from_slice(a);
        v.extend_from_slice(mid);
        v.extend_from_slice(b);
        Word(v)
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// Rotation moving the first `k` letters to the back.
    pub fn rotated(&self, k: usize) -> Word {
        let k = k % self.len().max(1);
        let mut v = SmallVec::with_capacity(self.len());
        v.extend_from_slice(&self.0[k..]);
        v.extend_from_slice(&self.0[..k]);
        Word(v)
    }

    /// Smallest rotation in the (length, lex) order.
    pub fn cyclic_representative(&self) -> Word {
        (0..self.len().max(1))
            .map(|k| self.rotated(k))
            .min()
            .unwrap_or_default()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.as_slice().cmp(other.0.as_slice()))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "1");
        }
        for &l in &self.0 {
            write!(f, "X{}", l as usize + 1)?;
        }
        Ok(())
    }
}

/// Dropped `‖·‖_A` mass, kept per degree so that it can be evaluated at
/// any radius. Entries are coefficient masses; index = degree.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationLoss {
    by_degree: Vec<f64>,
}

impl TruncationLoss {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, degree: usize, mass: f64) {
        if mass == 0.0 {
            return;
        }
        if self.by_degree.len() <= degree {
            self.by_degree.resize(degree + 1, 0.0);
        }
        self.by_degree[degree] += mass;
    }

    pub fn absorb(&mut self, other: &TruncationLoss) {
        self.absorb_scaled(other, 1.0);
    }

    pub fn absorb_scaled(&mut self, other: &TruncationLoss, factor: f64) {
        for (d, &m) in other.by_degree.iter().enumerate() {
            self.add(d, m * factor);
        }
    }

    /// Loss propagated through a later product with a factor whose absolute
    /// coefficient mass per degree is `mass`.
    pub fn convolve(&self, mass: &[f64]) -> TruncationLoss {
        let mut out = TruncationLoss::new();
        for (d, &m) in self.by_degree.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (e, &me) in mass.iter().enumerate() {
                out.add(d + e, m * me);
            }
        }
        out
    }

    pub fn at(&self, a: f64) -> f64 {
        self.by_degree
            .iter()
            .enumerate()
            .map(|(d, &m)| m * a.powi(d as i32))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.by_degree.iter().all(|&m| m == 0.0)
    }

    pub fn by_degree(&self) -> &[f64] {
        &self.by_degree
    }
}

/// Sparse truncated noncommutative polynomial.
#[derive(Clone, PartialEq)]
pub struct NCPoly<C: Coeff> {
    sig: Signature,
    terms: BTreeMap<Word, C>,
}

pub type FloatPoly = NCPoly<f64>;
pub type ExactPoly = NCPoly<Rational>;

pub(crate) fn accumulate<K: Ord, C: Coeff>(map: &mut BTreeMap<K, C>, key: K, value: C) {
    match map.entry(key) {
        Entry::Occupied(mut e) => {
            *e.get_mut() += value;
            if e.get().is_negligible() {
                e.remove();
            }
        }
        Entry::Vacant(e) => {
            if !value.is_negligible() {
                e.insert(value);
            }
        }
    }
}

impl<C: Coeff> NCPoly<C> {
    pub fn zero(sig: Signature) -> Self {
        Self {
            sig,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(sig: Signature) -> Self {
        Self::constant(sig, C::one())
    }

    pub fn constant(sig: Signature, c: C) -> Self {
        let mut p = Self::zero(sig);
        accumulate(&mut p.terms, Word::empty(), c);
        p
    }

    /// The generator `X_{j+1}`; generator indices are 0-based throughout the API.
    pub fn var(sig: Signature, j: usize) -> AlgebraResult<Self> {
        Self::monomial(sig, Word::from_one_based(&[j + 1], sig)?, C::one())
    }

    pub fn monomial(sig: Signature, word: Word, c: C) -> AlgebraResult<Self> {
        Self::from_terms(sig, [(word, c)])
    }

    /// Sums duplicate words, prunes zeros, validates letters and lengths.
    pub fn from_terms(sig: Signature, terms: impl IntoIterator<Item = (Word, C)>) -> AlgebraResult<Self> {
        let mut p = Self::zero(sig);
        for (w, c) in terms {
            if w.len() > sig.dmax {
                return Err(AlgebraError::WordTooLong {
                    len: w.len(),
                    dmax: sig.dmax,
                });
            }
            if let Some(&l) = w.letters().iter().find(|&&l| l as usize >= sig.n) {
                return Err(AlgebraError::LetterOutOfRange {
                    letter: l as usize + 1,
                    n: sig.n,
                });
            }
            accumulate(&mut p.terms, w, c);
        }
        Ok(p)
    }

    /// Internal constructor from already-valid terms.
    pub(crate) fn from_map(sig: Signature, terms: BTreeMap<Word, C>) -> Self {
        Self { sig, terms }
    }

    pub(crate) fn push_term(&mut self, word: Word, c: C) {
        debug_assert!(word.len() <= self.sig.dmax);
        accumulate(&mut self.terms, word, c);
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn terms(&self) -> &BTreeMap<Word, C> {
        &self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, w: &Word) -> C {
        self.terms.get(w).cloned().unwrap_or_else(C::zero)
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Word::empty())
    }

    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().next_back().map(Word::len)
    }

    /// Lowest degree with a stored term.
    pub fn valuation(&self) -> Option<usize> {
        self.terms.keys().next().map(Word::len)
    }

    pub fn try_add(&self, other: &Self) -> AlgebraResult<Self> {
        self.sig.ensure_same(&other.sig)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            accumulate(&mut out.terms, w.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> AlgebraResult<Self> {
        self.sig.ensure_same(&other.sig)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            accumulate(&mut out.terms, w.clone(), -c.clone());
        }
        Ok(out)
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &Self, factor: &C) -> AlgebraResult<()> {
        self.sig.ensure_same(&other.sig)?;
        for (w, c) in &other.terms {
            accumulate(&mut self.terms, w.clone(), c.clone() * factor.clone());
        }
        Ok(())
    }

    pub fn scale(&self, factor: &C) -> Self {
        let mut out = Self::zero(self.sig);
        for (w, c) in &self.terms {
            accumulate(&mut out.terms, w.clone(), c.clone() * factor.clone());
        }
        out
    }

    /// Absolute coefficient mass per degree.
    pub fn degree_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.degree().map_or(0, |d| d + 1)];
        for (w, c) in &self.terms {
            mass[w.len()] += c.abs_f64();
        }
        mass
    }

    /// Truncated product; the dropped mass is added to `loss`.
    pub fn mul_tracked(&self, other: &Self, loss: &mut TruncationLoss) -> AlgebraResult<Self> {
        self.sig.ensure_same(&other.sig)?;
        let dmax = self.sig.dmax;
        let right: Vec<(&Word, &C)> = other.terms.iter().collect();
        // start[d] = index of the first right term of length >= d
        let mut start = vec![right.len(); dmax + 2];
        for (i, (w, _)) in right.iter().enumerate().rev() {
            for s in start.iter_mut().take(w.len() + 1) {
                *s = i;
            }
        }
        let right_mass = other.degree_mass();
        let mut out = BTreeMap::new();
        for (w1, c1) in &self.terms {
            let room = dmax - w1.len();
            for (w2, c2) in &right[..start[room + 1]] {
                accumulate(&mut out, w1.concat(w2), c1.clone() * (*c2).clone());
            }
            let a1 = c1.abs_f64();
            for (e, &m) in right_mass.iter().enumerate().skip(room + 1) {
                loss.add(w1.len() + e, a1 * m);
            }
        }
        Ok(Self::from_map(self.sig, out))
    }

    pub fn mul(&self, other: &Self) -> AlgebraResult<Self> {
        self.mul_tracked(other, &mut TruncationLoss::new())
    }

    pub fn norm_a(&self, a: f64) -> f64 {
        self.terms
            .iter()
            .map(|(w, c)| c.abs_f64() * a.powi(w.len() as i32))
            .sum()
    }

    /// Reverses every word; coefficients are real so conjugation is trivial.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.sig);
        for (w, c) in &self.terms {
            accumulate(&mut out.terms, w.reversed(), c.clone());
        }
        out
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.adjoint() == *self
    }

    /// Replaces each letter `j` by `args_j` and expands under truncation.
    /// Prefix products are shared between words.
    pub fn substitute_tracked(&self, args: &PolyVec<C>, loss: &mut TruncationLoss) -> AlgebraResult<Self> {
        if args.len() != self.sig.n {
            return Err(AlgebraError::ArityMismatch {
                expected: self.sig.n,
                found: args.len(),
            });
        }
        let target = args.signature();
        let masses: Vec<Vec<f64>> = args.entries().iter().map(NCPoly::degree_mass).collect();
        let mut memo: HashMap<Word, (Self, TruncationLoss)> = HashMap::new();
        memo.insert(Word::empty(), (Self::one(target), TruncationLoss::new()));
        let mut out = Self::zero(target);
        // Sorted by length, so each prefix finds its parent already memoized.
        let mut prefixes: Vec<Word> = Vec::new();
        for w in self.terms.keys() {
            for k in 1..=w.len() {
                prefixes.push(Word::from_letters(&w.letters()[..k]));
            }
        }
        prefixes.sort();
        prefixes.dedup();
        for p in prefixes {
            if memo.contains_key(&p) {
                continue;
            }
            let (head, last) = p.letters().split_at(p.len() - 1);
            let (prev, prev_loss) = &memo[&Word::from_letters(head)];
            let last = last[0] as usize;
            let mut step_loss = prev_loss.convolve(&masses[last]);
            let prod = prev.mul_tracked(&args.entries()[last], &mut step_loss)?;
            memo.insert(p, (prod, step_loss));
        }
        for (w, c) in &self.terms {
            let (val, l) = &memo[w];
            out.add_scaled(val, c)?;
            loss.absorb_scaled(l, c.abs_f64());
        }
        Ok(out)
    }

    pub fn substitute(&self, args: &PolyVec<C>) -> AlgebraResult<Self> {
        self.substitute_tracked(args, &mut TruncationLoss::new())
    }

    /// Re-homes the polynomial in a signature with a different `dmax`.
    /// Words that no longer fit are dropped into `loss`.
    pub fn with_dmax(&self, dmax: usize, loss: &mut TruncationLoss) -> Self {
        let sig = self.sig.with_dmax(dmax);
        let mut out = Self::zero(sig);
        for (w, c) in &self.terms {
            if w.len() <= dmax {
                out.terms.insert(w.clone(), c.clone());
            } else {
                loss.add(w.len(), c.abs_f64());
            }
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> NCPoly<D> {
        let mut out = NCPoly::zero(self.sig);
        for (w, c) in &self.terms {
            accumulate(&mut out.terms, w.clone(), f(c));
        }
        out
    }

    pub fn to_float(&self) -> FloatPoly {
        self.map_coeffs(|c| c.as_f64())
    }

    /// Largest coefficient difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (w, c) in &self.terms {
            m = m.max((c.clone() - other.coeff(w)).abs_f64());
        }
        for (w, c) in &other.terms {
            if !self.terms.contains_key(w) {
                m = m.max(c.abs_f64());
            }
        }
        m
    }

    pub fn to_doc(&self) -> PolyDoc {
        PolyDoc {
            n: self.sig.n,
            dmax: self.sig.dmax,
            terms: self
                .terms
                .iter()
                .map(|(w, c)| TermDoc(w.to_one_based(), c.to_decimal_string()))
                .collect(),
        }
    }

    pub fn from_doc(doc: &PolyDoc) -> AlgebraResult<Self> {
        let sig = Signature::new(doc.n, doc.dmax)?;
        let mut terms = Vec::with_capacity(doc.terms.len());
        for TermDoc(word, coeff) in &doc.terms {
            terms.push((Word::from_one_based(word, sig)?, C::parse_decimal(coeff)?));
        }
        Self::from_terms(sig, terms)
    }
}

impl<C: Coeff> fmt::Debug for NCPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<C: Coeff> fmt::Display for NCPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}·{}", c.to_decimal_string(), w)?;
        }
        Ok(())
    }
}

impl<C: Coeff> Add for &NCPoly<C> {
    type Output = NCPoly<C>;

    /// Panics on signature mismatch; use [`NCPoly::try_add`] to get an error.
    fn add(self, rhs: Self) -> NCPoly<C> {
        self.try_add(rhs).expect("signature mismatch in +")
    }
}

impl<C: Coeff> Sub for &NCPoly<C> {
    type Output = NCPoly<C>;

    fn sub(self, rhs: Self) -> NCPoly<C> {
        self.try_sub(rhs).expect("signature mismatch in -")
    }
}

impl<C: Coeff> Neg for &NCPoly<C> {
    type Output = NCPoly<C>;

    fn neg(self) -> NCPoly<C> {
        self.scale(&-C::one())
    }
}

/// One `(word, coefficient)` pair of the text format; words are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDoc(pub Vec<usize>, pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyDoc {
    pub n: usize,
    pub dmax: usize,
    pub terms: Vec<TermDoc>,
}

impl<C: Coeff> Serialize for NCPoly<C> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de, C: Coeff> Deserialize<'de> for NCPoly<C> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = PolyDoc::deserialize(d)?;
        Self::from_doc(&doc).map_err(serde::de::Error::custom)
    }
}

/// An n-vector of polynomials sharing one signature.
#[derive(Clone, PartialEq)]
pub struct PolyVec<C: Coeff> {
    sig: Signature,
    entries: Vec<NCPoly<C>>,
}

impl<C: Coeff> PolyVec<C> {
    pub fn new(sig: Signature, entries: Vec<NCPoly<C>>) -> AlgebraResult<Self> {
        if entries.len() != sig.n {
            return Err(AlgebraError::ArityMismatch {
                expected: sig.n,
                found: entries.len(),
            });
        }
        for e in &entries {
            sig.ensure_same(&e.signature())?;
        }
        Ok(Self { sig, entries })
    }

    pub fn zero(sig: Signature) -> Self {
        Self {
            sig,
            entries: vec![NCPoly::zero(sig); sig.n],
        }
    }

    /// The tuple of generators `X = (X_1, ..., X_n)`.
    pub fn identity(sig: Signature) -> Self {
        Self {
            sig,
            entries: (0..sig.n)
                .map(|j| NCPoly::from_map(sig, BTreeMap::from([(Word::letter(j), C::one())])))
                .collect(),
        }
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[NCPoly<C>] {
        &self.entries
    }

    pub fn get(&self, j: usize) -> &NCPoly<C> {
        &self.entries[j]
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

    pub fn try_sub(&self, other: &Self) -> AlgebraResult<Self> {
        self.sig.ensure_same(&other.sig)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.try_sub(b))
            .collect::<AlgebraResult<_>>()?;
        Ok(Self { sig: self.sig, entries })
    }

    pub fn scale(&self, factor: &C) -> Self {
        Self {
            sig: self.sig,
            entries: self.entries.iter().map(|e| e.scale(factor)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(NCPoly::is_zero)
    }

    /// `max_j ‖v_j‖_A`.
    pub fn norm_a(&self, a: f64) -> f64 {
        self.entries.iter().map(|e| e.norm_a(a)).fold(0.0, f64::max)
    }

    /// `Σ_j ‖v_j‖_A`.
    pub fn norm_a_sum(&self, a: f64) -> f64 {
        self.entries.iter().map(|e| e.norm_a(a)).sum()
    }

    /// Componentwise composition `v ∘ args`.
    pub fn substitute_tracked(&self, args: &PolyVec<C>, loss: &mut TruncationLoss) -> AlgebraResult<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.substitute_tracked(args, loss))
            .collect::<AlgebraResult<_>>()?;
        Ok(Self {
            sig: args.signature(),
            entries,
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            sig: self.sig,
            entries: self.entries.iter().map(NCPoly::adjoint).collect(),
        }
    }

    pub fn to_float(&self) -> PolyVec<f64> {
        PolyVec {
            sig: self.sig,
            entries: self.entries.iter().map(NCPoly::to_float).collect(),
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

impl<C: Coeff> fmt::Debug for PolyVec<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.entries).finish()
    }
}

impl<C: Coeff> Serialize for PolyVec<C> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(n: usize, dmax: usize) -> Signature {
        Signature::new(n, dmax).unwrap()
    }

    fn poly(s: Signature, terms: &[(&[usize], i64)]) -> ExactPoly {
        NCPoly::from_terms(
            s,
            terms
                .iter()
                .map(|(w, c)| (Word::from_one_based(w, s).unwrap(), Rational::from_int(*c))),
        )
        .unwrap()
    }

    #[test]
    fn addition_prunes_and_merges() {
        let s = sig(2, 4);
        let x1 = poly(s, &[(&[1], 1)]);
        assert!((&x1 + &(-&x1)).is_zero());
        let p = &poly(s, &[(&[1, 2], 1)]) + &poly(s, &[(&[2], 3)]);
        assert_eq!(p.len(), 2);
        assert_eq!(p.coeff(&Word::from_one_based(&[2], s).unwrap()), Rational::from_int(3));
    }

    #[test]
    fn product_expands_and_truncates() {
        let s = sig(2, 4);
        let x = poly(s, &[(&[1], 1), (&[2], 1)]);
        let sq = x.mul(&x).unwrap();
        assert_eq!(sq, poly(s, &[(&[1, 1], 1), (&[1, 2], 1), (&[2, 1], 1), (&[2, 2], 1)]));

        let s2 = sig(2, 2);
        let mut loss = TruncationLoss::new();
        let p = poly(s2, &[(&[1, 2], 1)]).mul_tracked(&poly(s2, &[(&[1], 1)]), &mut loss).unwrap();
        assert!(p.is_zero());
        assert_eq!(loss.at(5.0), 125.0);
    }

    #[test]
    fn norm_definition() {
        let s = sig(2, 4);
        assert_eq!(poly(s, &[(&[1, 2], 1), (&[2], 3)]).norm_a(5.0), 40.0);
        assert_eq!(ExactPoly::one(s).norm_a(7.0), 1.0);
    }

    #[test]
    fn adjoint_reverses() {
        let s = sig(3, 4);
        assert_eq!(poly(s, &[(&[1, 2], 1)]).adjoint(), poly(s, &[(&[2, 1], 1)]));
        assert_eq!(poly(s, &[(&[1, 2, 3], -4)]).adjoint(), poly(s, &[(&[3, 2, 1], -4)]));
        let p = poly(s, &[(&[1, 2], 2), (&[3], 1)]);
        let sym = &p + &p.adjoint();
        assert!(sym.is_self_adjoint());
    }

    #[test]
    fn substitution_expands() {
        let s = sig(2, 4);
        let w = poly(s, &[(&[1, 1], 1)]);
        let eps = Rational::from_ratio(1, 10);
        let x1_shift = poly(s, &[(&[1], 1)]).try_add(&poly(s, &[(&[2], 1)]).scale(&eps)).unwrap();
        let args = PolyVec::new(s, vec![x1_shift, poly(s, &[(&[2], 1)])]).unwrap();
        let got = w.substitute(&args).unwrap();
        let mut want = poly(s, &[(&[1, 1], 1)]);
        want.add_scaled(&poly(s, &[(&[1, 2], 1), (&[2, 1], 1)]), &eps).unwrap();
        want.add_scaled(&poly(s, &[(&[2, 2], 1)]), &(eps.clone() * eps)).unwrap();
        assert_eq!(got, want);
        assert_eq!(w.substitute(&PolyVec::identity(s)).unwrap(), w);
    }

    #[test]
    fn quartic_substitution_first_order_has_four_insertions() {
        // (X1 + e·X2)^4: the e-linear part has one term per insertion slot.
        let s = sig(2, 8);
        let w = poly(s, &[(&[1, 1, 1, 1], 1)]);
        let args = PolyVec::new(s, vec![poly(s, &[(&[1], 1), (&[2], 1)]), poly(s, &[(&[2], 1)])]).unwrap();
        let got = w.substitute(&args).unwrap();
        let linear: Vec<_> = got.iter().filter(|(w, _)| w.letters().iter().filter(|&&l| l == 1).count() == 1).collect();
        assert_eq!(linear.len(), 4);
        assert!(linear.iter().all(|(_, c)| **c == Rational::from_int(1)));
        assert_eq!(got.len(), 16);
    }

    #[test]
    fn substitution_loss_matches_dropped_mass_for_positive_inputs() {
        let big = sig(2, 12);
        let small = sig(2, 5);
        let w_big = poly(big, &[(&[1, 2, 1], 2), (&[2, 2], 1)]);
        let arg_big = |s| poly(s, &[(&[1], 1), (&[1, 2], 1), (&[2, 2, 1], 3)]);
        let args_big = PolyVec::new(big, vec![arg_big(big), poly(big, &[(&[2], 1), (&[1, 1], 2)])]).unwrap();
        let full = w_big.substitute(&args_big).unwrap().to_float();

        let w_small = poly(small, &[(&[1, 2, 1], 2), (&[2, 2], 1)]);
        let args_small = PolyVec::new(small, vec![arg_big(small), poly(small, &[(&[2], 1), (&[1, 1], 2)])]).unwrap();
        let mut loss = TruncationLoss::new();
        let trunc = w_small.substitute_tracked(&args_small, &mut loss).unwrap().to_float();
        for a in [1.5, 4.0, 5.0] {
            let gap = full.norm_a(a) - trunc.norm_a(a);
            assert!((gap - loss.at(a)).abs() <= 1e-9 * full.norm_a(a), "a={a}");
        }
    }

    #[test]
    fn signature_mismatch_is_error() {
        let a = ExactPoly::one(sig(2, 4));
        let b = ExactPoly::one(sig(2, 5));
        assert!(matches!(a.try_add(&b), Err(AlgebraError::SignatureMismatch { .. })));
        assert!(a.mul(&b).is_err());
        assert!(Word::from_one_based(&[3], sig(2, 4)).is_err());
        assert!(Word::from_one_based(&[1; 5], sig(2, 4)).is_err());
    }

    #[test]
    fn serialization_round_trip_exact() {
        let s = sig(2, 6);
        let p = NCPoly::from_terms(
            s,
            [
                (Word::from_one_based(&[1, 2, 1], s).unwrap(), Rational::from_ratio(-3, 7)),
                (Word::empty(), Rational::from_ratio(1, 3)),
            ],
        )
        .unwrap();
        let doc = p.to_doc();
        assert_eq!(doc.terms[1].0, vec![1, 2, 1]);
        assert_eq!(ExactPoly::from_doc(&doc).unwrap(), p);
    }

    #[test]
    fn word_order_is_length_then_lex() {
        let s = sig(2, 4);
        let w = |l: &[usize]| Word::from_one_based(l, s).unwrap();
        assert!(w(&[2]) < w(&[1, 1]));
        assert!(w(&[1, 2]) < w(&[2, 1]));
        assert_eq!(w(&[2, 1, 1]).cyclic_representative(), w(&[1, 1, 2]));
        assert_eq!(format!("{}", w(&[1, 2])), "X1X2");
    }
}
