use nctransport::rmt::{eval_series_at_matrices, sample_gue, transport_compare, CMatrix, ChainConfig, MatrixTuple};
use nctransport::solver::SolverConfig;
use nctransport::{FloatPoly, NCPoly, PolyVec, Signature, Word};
use num_complex::Complex64;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn ntr(m: &CMatrix) -> f64 {
    m.trace().re / m.nrows() as f64
}

#[test]
fn gue_moments_over_draws() {
    let (mut m2, mut m4, mut mixed) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..200 {
        let t = sample_gue(64, 2, 1000 + s);
        let (a, b) = (&t.mats[0], &t.mats[1]);
        let a2 = a * a;
        m2.push(ntr(&a2));
        m4.push(ntr(&(&a2 * &a2)));
        let ab = a * b;
        mixed.push(ntr(&(&ab * &ab)));
    }
    let (mean, se) = mean_se(&m2);
    assert!((mean - 1.0).abs() < 3.0 * se, "m2 {mean} ± {se}");
    let (mean, se) = mean_se(&m4);
    assert!((mean - (2.0 + 1.0 / 4096.0)).abs() < 3.0 * se, "m4 {mean} ± {se}");
    let (mean, _) = mean_se(&mixed);
    assert!(mean.abs() < 5.0 / 64.0, "mixed {mean}");
}

#[test]
fn quadratic_series_on_diagonal_input_squares_entries() {
    let sig = Signature::new(2, 4).unwrap();
    let sq = |j: u8| NCPoly::from_terms(sig, [(Word::from_letters(&[j, j]), 1.0)]).unwrap();
    let f = PolyVec::new(sig, vec![sq(0), sq(1)]).unwrap();
    let diag = |v: &[f64]| CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|x| Complex64::new(*x, 0.0))));
    let t = MatrixTuple {
        mats: vec![diag(&[1.0, -2.0, 0.5]), diag(&[3.0, 0.0, -1.0])],
    };
    let out = eval_series_at_matrices(&f, &t, 4.5).unwrap();
    for (o, m) in out.mats.iter().zip(&t.mats) {
        for i in 0..3 {
            assert_eq!(o[(i, i)], m[(i, i)] * m[(i, i)]);
        }
    }
}

#[test]
fn constant_shift_moves_the_spectrum() {
    let sig = Signature::new(1, 4).unwrap();
    let p: FloatPoly = NCPoly::from_terms(sig, [(Word::letter(0), 1.0), (Word::empty(), 0.5)]).unwrap();
    let f = PolyVec::new(sig, vec![p]).unwrap();
    let t = sample_gue(10, 1, 3);
    let out = eval_series_at_matrices(&f, &t, 4.5).unwrap();
    assert!((ntr(&out.mats[0]) - ntr(&t.mats[0]) - 0.5).abs() < 1e-14);
}

#[test]
fn zero_potential_pipelines_agree() {
    let w = FloatPoly::zero(Signature::new(2, 8).unwrap());
    let chain = ChainConfig {
        step_size: 0.1,
        steps: 1500,
        burn_in: 300,
        thin: 5,
        seed: 4,
    };
    let r = transport_compare(&w, &SolverConfig::default(), 12, 300, &chain, 4).unwrap();
    assert!(r.transport_certified);
    assert_eq!(r.transport_rejected, 0);
    for s in &r.words {
        assert!(s.z < 3.5, "{:?}: z = {}", s.word, s.z);
    }
}
