//! The semicircle trace on words.
//!
//! `τ(w)` counts non-crossing pairings of positions that join equal
//! letters. The first letter is paired with some later equal letter; the
//! inside and the outside of that arc are then independent, which gives the
//! split recursion used here. Values are memoized per word.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use parking_lot::RwLock;

use crate::calculus::{TensorMatrix, TensorPoly};
use crate::ncalg::{NCPoly, Word};
use crate::scalar::Coeff;

/// Longest word evaluated in `u128`. The worst case at length `2k` is the
/// Catalan number `C_k`, and `C_64` still fits.
const U128_LIMIT: usize = 128;

#[derive(Default)]
pub struct TraceCache {
    memo: RwLock<HashMap<Word, u128>>,
    big: RwLock<HashMap<Word, BigUint>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub hits: u64,
    pub misses: u64,
}

impl TraceCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache. Entries never change once written, so sharing is safe.
    pub fn global() -> &'static TraceCache {
        static CACHE: OnceLock<TraceCache> = OnceLock::new();
        CACHE.get_or_init(TraceCache::new)
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            entries: self.memo.read().len() + self.big.read().len(),
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    /// `τ(w)` for words up to length 128.
    pub fn tau(&self, w: &Word) -> u128 {
        assert!(w.len() <= U128_LIMIT, "word too long for u128 trace; use tau_big");
        self.tau_letters(w.letters())
    }

    fn tau_letters(&self, w: &[u8]) -> u128 {
        let k = w.len();
        if k == 0 {
            return 1;
        }
        if k % 2 == 1 {
            return 0;
        }
        if k == 2 {
            return (w[0] == w[1]) as u128;
        }
        let key = Word::from_letters(w);
        if let Some(&v) = self.memo.read().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let mut total = 0u128;
        for j in (1..k).step_by(2) {
            if w[j] == w[0] {
                let inner = self.tau_letters(&w[1..j]);
                if inner != 0 {
                    total += inner * self.tau_letters(&w[j + 1..]);
                }
            }
        }
        // Racing writers store the same value, so a plain insert is fine.
        self.memo.write().insert(key, total);
        total
    }

    /// `τ(w)` with arbitrary precision, for any length.
    pub fn tau_big(&self, w: &Word) -> BigUint {
        if w.len() <= U128_LIMIT {
            return BigUint::from(self.tau(w));
        }
        self.tau_big_letters(w.letters())
    }

    fn tau_big_letters(&self, w: &[u8]) -> BigUint {
        let k = w.len();
        if k <= U128_LIMIT {
            return BigUint::from(self.tau_letters(w));
        }
        if k % 2 == 1 {
            return BigUint::zero();
        }
        let key = Word::from_letters(w);
        if let Some(v) = self.big.read().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v.clone();
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let mut total = BigUint::zero();
        for j in (1..k).step_by(2) {
            if w[j] == w[0] {
                let inner = self.tau_big_letters(&w[1..j]);
                if !inner.is_zero() {
                    total += inner * self.tau_big_letters(&w[j + 1..]);
                }
            }
        }
        self.big.write().insert(key, total.clone());
        total
    }

    /// `τ(w)` as a coefficient of either backend.
    pub fn tau_coeff<C: Coeff>(&self, w: &Word) -> C {
        if w.len() <= U128_LIMIT {
            C::from_count(self.tau(w))
        } else {
            let v = self.tau_big(w);
            match v.to_u128() {
                Some(x) => C::from_count(x),
                None => C::parse_decimal(&v.to_string()).expect("integer literal parses"),
            }
        }
    }

    fn tau_slice<C: Coeff>(&self, w: &[u8]) -> C {
        if w.len() <= U128_LIMIT {
            C::from_count(self.tau_letters(w))
        } else {
            self.tau_coeff(&Word::from_letters(w))
        }
    }

    pub fn tau_poly<C: Coeff>(&self, p: &NCPoly<C>) -> C {
        let mut acc = C::zero();
        for (w, c) in p.iter() {
            if w.len() % 2 == 0 {
                let t: C = self.tau_coeff(w);
                if !t.is_zero() {
                    acc += c.clone() * t;
                }
            }
        }
        acc
    }

    /// `(1⊗τ)(a⊗b) = τ(b)·a`.
    pub fn tau_tensor_left<C: Coeff>(&self, q: &TensorPoly<C>) -> NCPoly<C> {
        let mut out = NCPoly::zero(q.signature());
        for ((a, b), c) in q.iter() {
            if b.len() % 2 == 0 {
                let t: C = self.tau_slice(b.letters());
                if !t.is_zero() {
                    out.push_term(a.clone(), c.clone() * t);
                }
            }
        }
        out
    }

    /// `(τ⊗1)(a⊗b) = τ(a)·b`.
    pub fn tau_tensor_right<C: Coeff>(&self, q: &TensorPoly<C>) -> NCPoly<C> {
        let mut out = NCPoly::zero(q.signature());
        for ((a, b), c) in q.iter() {
            if a.len() % 2 == 0 {
                let t: C = self.tau_slice(a.letters());
                if !t.is_zero() {
                    out.push_term(b.clone(), c.clone() * t);
                }
            }
        }
        out
    }

    /// `(1⊗τ + τ⊗1)(q)`.
    pub fn tau_tensor_sym<C: Coeff>(&self, q: &TensorPoly<C>) -> NCPoly<C> {
        let mut out = self.tau_tensor_left(q);
        out.add_scaled(&self.tau_tensor_right(q), &C::one())
            .expect("both legs share the signature of q");
        out
    }

    /// `(τ⊗τ)(q)`.
    pub fn tau_tau<C: Coeff>(&self, q: &TensorPoly<C>) -> C {
        let mut acc = C::zero();
        for ((a, b), c) in q.iter() {
            if a.len() % 2 == 0 && b.len() % 2 == 0 {
                let ta: C = self.tau_slice(a.letters());
                if ta.is_zero() {
                    continue;
                }
                let tb: C = self.tau_slice(b.letters());
                acc += c.clone() * ta * tb;
            }
        }
        acc
    }

    /// `|τ(w)| ≤ 2^{|w|}`.
    pub fn moment_bound_check(&self, w: &Word) -> bool {
        let t = self.tau_big(w);
        t <= (BigUint::one() << w.len())
    }
}

/// `Tr(M) = Σ_i M_ii`.
pub fn trace_matrix<C: Coeff>(m: &TensorMatrix<C>) -> TensorPoly<C> {
    m.trace()
}

/// Catalan number `C_k`.
pub fn catalan(k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}
