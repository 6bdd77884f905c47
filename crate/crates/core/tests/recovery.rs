use spdmd_core::dmd::{optimal_amplitudes, DmdDecomposition, DmdOptions, ModeKind, RankPolicy};
use spdmd_core::snapshot::{Grid, DEFAULT_DY, DEFAULT_DZ, DEFAULT_H};
use spdmd_core::synthetic::{
    generate, match_eigenvalues, oracle_amplitudes, random_fixture, three_pair_fixture, GroundTruth,
};
use spdmd_core::{c64, Mat};

fn tall_grid() -> Grid {
    Grid::new(40, 97, DEFAULT_DY, DEFAULT_DZ, DEFAULT_H).unwrap()
}

fn small_grid() -> Grid {
    Grid::new(12, 15, 0.5, 0.25, 30.0).unwrap()
}

fn fixed(r: usize, kind: ModeKind) -> DmdOptions {
    DmdOptions {
        rank: RankPolicy::Fixed(r),
        mode_kind: kind,
    }
}

fn first_cols(m: &Mat<f64>, n: usize) -> Mat<f64> {
    Mat::from_fn(m.nrows(), n, |i, k| m[(i, k)])
}

fn inner(phi: &Mat<c64>, j: usize, pattern: &[c64]) -> c64 {
    (0..phi.nrows()).map(|i| phi[(i, j)].conj() * pattern[i]).sum()
}

fn three_pairs(kind: ModeKind) -> (GroundTruth, Mat<f64>, DmdDecomposition) {
    let gt = three_pair_fixture(tall_grid(), 0.0, 1).ground_truth().unwrap();
    let snaps = generate(&gt, 32).unwrap();
    let dec = DmdDecomposition::compute(&snaps, fixed(6, kind)).unwrap();
    (gt, snaps.into_data(), dec)
}

#[test]
fn three_pairs_recover_eigenvalues_modes_and_amplitudes() {
    let (gt, _, dec) = three_pairs(ModeKind::Projected);
    assert_eq!(dec.n_snapshots(), 31);
    let pairing = match_eigenvalues(&gt.eigenvalues(), &dec.lambda, 1e-6).unwrap();
    for (m, &k) in gt.modes.iter().zip(&pairing) {
        assert!((dec.lambda[k] - m.lambda).norm() <= 1e-8);
        // modes agree up to a phase, which the amplitude absorbs
        let c = inner(&dec.phi, k, &m.pattern);
        assert!(c.norm() >= 0.999);
        let scaled_err: f64 = (0..dec.phi.nrows())
            .map(|i| (dec.phi[(i, k)] * dec.amplitudes[k] - m.pattern[i] * m.amplitude).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(scaled_err <= 1e-8 * m.amplitude.norm(), "{scaled_err:e}");
        assert!((dec.amplitudes[k].norm() - m.amplitude.norm()).abs() <= 1e-8 * m.amplitude.norm());
    }
}

#[test]
fn exact_and_projected_modes_coincide_on_noiseless_data() {
    let (gt, _, proj) = three_pairs(ModeKind::Projected);
    let (_, _, exact) = three_pairs(ModeKind::Exact);
    let a = match_eigenvalues(&gt.eigenvalues(), &proj.lambda, 1e-6).unwrap();
    let b = match_eigenvalues(&gt.eigenvalues(), &exact.lambda, 1e-6).unwrap();
    for (&j, &k) in a.iter().zip(&b) {
        let c: c64 = (0..proj.phi.nrows()).map(|i| proj.phi[(i, j)].conj() * exact.phi[(i, k)]).sum();
        assert!(c.norm() >= 1.0 - 1e-8);
        assert!((proj.amplitudes[j].norm() - exact.amplitudes[k].norm()).abs() <= 1e-8);
    }
}

#[test]
fn reconstruction_reproduces_training_data() {
    let (_, full, dec) = three_pairs(ModeKind::Projected);
    let n = dec.n_snapshots();
    let ks: Vec<usize> = (0..n).collect();
    let rec = dec.reconstruct(&dec.amplitudes, &ks);
    let y = first_cols(&full, n);
    let err = (&rec - &y).norm_l2();
    assert!(err <= 1e-6 * y.norm_l2(), "{err:e}");
    let col0 = dec.reconstruct(&dec.amplitudes, &[0]);
    for i in 0..y.nrows() {
        assert!((col0[(i, 0)] - y[(i, 0)]).abs() <= 1e-8);
    }
}

#[test]
fn spectrum_and_amplitudes_are_conjugate_closed() {
    let (_, full, dec) = three_pairs(ModeKind::Projected);
    for (j, l) in dec.lambda.iter().enumerate() {
        let k = (0..dec.rank())
            .min_by(|&a, &b| (dec.lambda[a] - l.conj()).norm().total_cmp(&(dec.lambda[b] - l.conj()).norm()))
            .unwrap();
        assert!((dec.lambda[k] - l.conj()).norm() <= 1e-8, "mode {j}");
        assert!((dec.amplitudes[k] - dec.amplitudes[j].conj()).norm() <= 1e-8, "mode {j}");
    }
    // complex superposition before taking the real part
    let mut worst = 0.0_f64;
    for k in 0..dec.n_snapshots() {
        for i in 0..full.nrows() {
            let z: c64 = (0..dec.rank()).map(|j| dec.phi[(i, j)] * dec.amplitudes[j] * dec.lambda[j].powi(k as i32)).sum();
            worst = worst.max(z.im.abs());
        }
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn amplitudes_are_a_local_minimum() {
    let (_, full, dec) = three_pairs(ModeKind::Projected);
    let n = dec.n_snapshots();
    let y = first_cols(&full, n);
    let objective = |b: &[c64]| -> f64 {
        let mut s = 0.0;
        for k in 0..n {
            for i in 0..y.nrows() {
                let z: c64 = (0..b.len()).map(|j| dec.phi[(i, j)] * b[j] * dec.vandermonde[(j, k)]).sum();
                s += (c64::new(y[(i, k)], 0.0) - z).norm_sqr();
            }
        }
        s
    };
    let base = objective(&dec.amplitudes);
    assert!((dec.qp.objective(&dec.amplitudes) - base).abs() <= 1e-9 * (1.0 + full.norm_l2().powi(2)));
    for j in 0..dec.rank() {
        for step in [c64::new(1e-3, 0.0), c64::new(-1e-3, 0.0), c64::new(0.0, 1e-3), c64::new(0.0, -1e-3)] {
            let mut b = dec.amplitudes.clone();
            b[j] += step;
            assert!(objective(&b) >= base, "mode {j} step {step}");
        }
    }
}

// Householder reflection applied to every column.
fn reflect(m: &Mat<f64>, v: &[f64]) -> Mat<f64> {
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut out = m.clone();
    for k in 0..m.ncols() {
        let dot: f64 = (0..m.nrows()).map(|i| v[i] * m[(i, k)]).sum();
        for i in 0..m.nrows() {
            out[(i, k)] -= 2.0 * dot / vv * v[i];
        }
    }
    out
}

#[test]
fn spectrum_is_invariant_under_orthogonal_transform() {
    let grid = small_grid();
    let gt = random_fixture(grid, 3, 0.0, 5).ground_truth().unwrap();
    let full = generate(&gt, 20).unwrap().into_data();
    let mut q_full = full.clone();
    for s in 0..3 {
        let v: Vec<f64> = (0..grid.len()).map(|i| ((i * (s + 3)) as f64 * 0.71).sin() + 0.1).collect();
        q_full = reflect(&q_full, &v);
    }
    let a = DmdDecomposition::from_data(grid, &full, fixed(6, ModeKind::Projected)).unwrap();
    let b = DmdDecomposition::from_data(grid, &q_full, fixed(6, ModeKind::Projected)).unwrap();
    let pairing = match_eigenvalues(&a.lambda, &b.lambda, 1e-8).unwrap();
    for (j, &k) in pairing.iter().enumerate() {
        assert!((a.lambda[j] - b.lambda[k]).norm() <= 1e-8);
    }
}

#[test]
fn closed_form_amplitudes_match_brute_force_oracle() {
    for seed in 0..20u64 {
        let pairs = 1 + (seed % 5) as usize;
        let n = 10 + ((seed * 7) % 31) as usize;
        let spec = random_fixture(small_grid(), pairs, 1e-3, 100 + seed);
        let full = generate(&spec.ground_truth().unwrap(), n + 1).unwrap().into_data();
        let dec = DmdDecomposition::from_data(small_grid(), &full, fixed(2 * pairs, ModeKind::Projected)).unwrap();
        let y = first_cols(&full, n);
        let closed = optimal_amplitudes(&dec.w, &dec.svd.sigma, &dec.svd.v, &dec.vandermonde).unwrap();
        let oracle = oracle_amplitudes(&y, &dec.phi, &dec.vandermonde).unwrap();
        let scale: f64 = oracle.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let diff: f64 = closed.iter().zip(&oracle).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff <= 1e-8 * scale, "seed {seed}: {diff:e} vs {scale:e}");
        assert_eq!(closed, dec.amplitudes);
    }
}

#[test]
fn eigenvalue_moduli_are_robust_to_small_noise() {
    let clean = three_pair_fixture(tall_grid(), 0.0, 0).ground_truth().unwrap();
    let rms = clean.clean_data(32).norm_l2() / ((tall_grid().len() * 32) as f64).sqrt();
    for seed in 0..20 {
        let gt = three_pair_fixture(tall_grid(), 1e-3 * rms, seed).ground_truth().unwrap();
        let snaps = generate(&gt, 32).unwrap();
        let dec = DmdDecomposition::compute(&snaps, fixed(6, ModeKind::Projected)).unwrap();
        let pairing = match_eigenvalues(&gt.eigenvalues(), &dec.lambda, 0.05).unwrap();
        for (m, &k) in gt.modes.iter().zip(&pairing) {
            assert!((dec.lambda[k].norm() - m.lambda.norm()).abs() <= 1e-2, "seed {seed}");
        }
    }
}
