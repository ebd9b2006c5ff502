use nctransport::calculus::{number_op, project0, sigma_inv};
use nctransport::semitrace::catalan;
use nctransport::solver::{q_m, q_series, SolverConfig};
use nctransport::{Coeff, ExactPoly, FloatPoly, NCPoly, Rational, Signature, TraceCache, TruncationLoss, Word};
use proptest::prelude::*;

fn word(max_len: usize, n: u8) -> impl Strategy<Value = Word> {
    prop::collection::vec(0..n, 0..=max_len).prop_map(|l| Word::from_letters(&l))
}

fn terms(max_len: usize, n: u8) -> impl Strategy<Value = Vec<(Word, i64, i64)>> {
    prop::collection::vec((word(max_len, n), -5i64..=5, 1i64..=4), 0..6)
}

fn exact(sig: Signature, t: &[(Word, i64, i64)]) -> ExactPoly {
    NCPoly::from_terms(sig, t.iter().map(|(w, p, q)| (w.clone(), Rational::from_ratio(*p, *q)))).unwrap()
}

fn float(sig: Signature, t: &[(Word, i64, i64)]) -> FloatPoly {
    NCPoly::from_terms(sig, t.iter().map(|(w, p, q)| (w.clone(), *p as f64 / *q as f64))).unwrap()
}

proptest! {
    #[test]
    fn product_is_associative(a in terms(4, 2), b in terms(4, 2), c in terms(4, 2)) {
        let sig = Signature::new(2, 12).unwrap();
        let (p, q, r) = (exact(sig, &a), exact(sig, &b), exact(sig, &c));
        prop_assert_eq!(p.mul(&q).unwrap().mul(&r).unwrap(), p.mul(&q.mul(&r).unwrap()).unwrap());
    }

    #[test]
    fn adjoint_reverses_products(a in terms(4, 3), b in terms(4, 3)) {
        let sig = Signature::new(3, 8).unwrap();
        let (p, q) = (exact(sig, &a), exact(sig, &b));
        prop_assert_eq!(p.mul(&q).unwrap().adjoint(), q.adjoint().mul(&p.adjoint()).unwrap());
        prop_assert_eq!(p.adjoint().adjoint(), p);
    }

    #[test]
    fn norm_is_submultiplicative(a in terms(4, 2), b in terms(4, 2), radius in 0.5f64..6.0) {
        let sig = Signature::new(2, 8).unwrap();
        let (p, q) = (float(sig, &a), float(sig, &b));
        let lhs = p.mul(&q).unwrap().norm_a(radius);
        prop_assert!(lhs <= p.norm_a(radius) * q.norm_a(radius) * (1.0 + 1e-12) + 1e-300);
        let sum = p.try_add(&q).unwrap().norm_a(radius);
        prop_assert!(sum <= (p.norm_a(radius) + q.norm_a(radius)) * (1.0 + 1e-12));
    }

    #[test]
    fn truncated_product_matches_full_product(a in terms(4, 2), b in terms(4, 2), cap in 1usize..7) {
        let big = Signature::new(2, 8).unwrap();
        let small = Signature::new(2, cap).unwrap();
        let full = exact(big, &a).mul(&exact(big, &b)).unwrap();
        let mut lift = TruncationLoss::new();
        let (p, q) = (exact(big, &a).with_dmax(cap, &mut lift), exact(big, &b).with_dmax(cap, &mut lift));
        prop_assert_eq!(p.signature(), small);
        let mut loss = TruncationLoss::new();
        let trunc = p.mul_tracked(&q, &mut loss).unwrap();
        let mut dropped = TruncationLoss::new();
        let expect = full.with_dmax(cap, &mut dropped);
        if lift.is_zero() {
            prop_assert_eq!(&trunc, &expect);
            // the tracked mass bounds what was actually dropped
            prop_assert!(loss.at(3.0) >= dropped.at(3.0) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn trace_is_cyclic_and_reversal_invariant(w in word(10, 3), k in 0usize..10) {
        let cache = TraceCache::global();
        let t = cache.tau(&w);
        prop_assert_eq!(cache.tau(&w.rotated(k)), t);
        prop_assert_eq!(cache.tau(&w.reversed()), t);
        if w.len() % 2 == 1 {
            prop_assert_eq!(t, 0);
        }
        prop_assert!((t as f64) <= 2f64.powi(w.len() as i32));
    }

    #[test]
    fn number_operator_inverts(a in terms(5, 2)) {
        let sig = Signature::new(2, 8).unwrap();
        let p = exact(sig, &a);
        prop_assert_eq!(sigma_inv(&number_op(&p)), project0(&p));
    }
}

#[test]
fn single_letter_powers_are_catalan() {
    let cache = TraceCache::global();
    for k in 0..40 {
        assert_eq!(cache.tau(&Word::from_letters(&vec![1u8; 2 * k])), catalan(k));
    }
}

fn random_g(t: &[(Word, i64, i64)], target: f64, a: f64) -> FloatPoly {
    let sig = Signature::new(2, 8).unwrap();
    let mut g = float(sig, t);
    // drop constant and linear parts, which Q_m does not see
    g = NCPoly::from_terms(sig, g.iter().filter(|(w, _)| w.len() >= 2).map(|(w, c)| (w.clone(), *c))).unwrap();
    let n = g.norm_a(a);
    if n == 0.0 {
        g
    } else {
        g.scale(&(target / n))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn q_m_norm_bound(t in terms(5, 2), frac in 0.01f64..0.95, m in 1usize..5) {
        let a = 5.0;
        let g = random_g(&t, frac * a * a / 2.0, a);
        let (q, _) = q_m(TraceCache::global(), &g, m).unwrap();
        let bound = 2.0 * (2.0 / (a * a)).powi(m as i32) * g.norm_a(a).powi(m as i32);
        prop_assert!(q.norm_a(a) <= bound * (1.0 + 1e-9) + 1e-300, "{} > {}", q.norm_a(a), bound);
    }

    #[test]
    fn q_series_norm_bound(t in terms(5, 2), frac in 0.01f64..0.6) {
        let cfg = SolverConfig::default();
        let g = random_g(&t, frac * cfg.a * cfg.a / 2.0, cfg.a);
        let r = 2.0 * g.norm_a(cfg.a) / (cfg.a * cfg.a);
        let q = q_series(TraceCache::global(), &g, &cfg).unwrap();
        let bound = r * r / (1.0 - r);
        prop_assert!(q.value.norm_a(cfg.a) <= bound * (1.0 + 1e-9) + 1e-300);
    }
}
