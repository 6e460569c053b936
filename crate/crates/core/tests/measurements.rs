mod common;

use common::*;
use proptest::prelude::*;
use symtomo::linalg::CMatrix;
use symtomo::measurements::*;
use symtomo::spin_rep::*;

fn dense_effect(n: usize, dir: [f64; 3], outcome: usize) -> M {
    let proj = eigenprojectors(dir);
    let dim = 1usize << n;
    let mut e = M::zeros(dim, dim);
    for x in 0..dim {
        if x.count_ones() as usize == outcome {
            let f: Vec<M> = (0..n).map(|q| proj[bit(x, q, n)].clone()).collect();
            e += kron_all(&f);
        }
    }
    e
}

fn effect_blocks(e: &PIEffect, shape: &BlockShape) -> Vec<CMatrix> {
    shape.blocks.iter().enumerate().map(|(i, b)| e.block_matrix(i, b.dim)).collect()
}

#[test]
fn default_settings_six_qubits() {
    let s = default_pi_settings(6).unwrap();
    assert_eq!(s.len(), 28);
    let d = s.directions().unwrap();
    assert!(d[0].angle_to(&Direction::z_axis()) < 1e-12);
    assert!(d[1].angle_to(&Direction::x_axis()) < 1e-12);
    assert!(d[2].angle_to(&Direction::y_axis()) < 1e-12);
    for dir in &d[3..] {
        assert!(dir.vector()[2] >= 0.0);
    }
    for i in 0..d.len() {
        for j in 0..i {
            assert!(d[i].angle_to(&d[j]) > 1e-6);
        }
    }
    let (rank, params) = design_rank(&block_shape(6).unwrap(), &s).unwrap();
    assert_eq!((rank, params), (83, 83));
}

#[test]
fn default_settings_small() {
    let s = default_pi_settings(1).unwrap();
    assert_eq!(s.len(), 3);
    for n in 1..=8 {
        let s = default_pi_settings(n).unwrap();
        assert_eq!(s.len(), setting_count(n).unwrap());
        let (rank, params) = design_rank(&block_shape(n).unwrap(), &s).unwrap();
        assert_eq!(rank, params, "N={n}");
    }
}

#[test]
fn too_few_settings_are_rank_deficient() {
    let s = SettingSet::pi(vec![Direction::z_axis(), Direction::x_axis(), Direction::y_axis()]).unwrap();
    let (rank, params) = design_rank(&block_shape(6).unwrap(), &s).unwrap();
    assert!(rank < params);
}

#[test]
fn design_matrix_rank_by_svd() {
    // independent rank count on the raw design matrix (trace constraint
    // removes one dimension)
    let shape = block_shape(6).unwrap();
    let s = default_pi_settings(6).unwrap();
    let model = PiMeasurementModel::new(&shape, s.directions().unwrap());
    let a = model.design_matrix();
    assert_eq!(a.nrows(), 28 * 7);
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let rank = sv.iter().filter(|&&v| v > 1e-10 * max).count();
    assert_eq!(rank, 84);
}

#[test]
fn duplicate_settings_rejected() {
    assert!(SettingSet::pi(vec![Direction::z_axis(), Direction::z_axis()]).is_err());
    let xz: PauliString = "XZ".parse().unwrap();
    assert!(SettingSet::full(vec![xz.clone(), xz], 2).is_err());
    let short: PauliString = "X".parse().unwrap();
    assert!(SettingSet::full(vec![short], 2).is_err());
    assert!("XQ".parse::<PauliString>().is_err());
}

#[test]
fn direction_inputs() {
    assert!(Direction::from_vector(1.0, 1.0, 0.0).is_err());
    let d = Direction::from_vector(0.0, 1.0, 0.0).unwrap();
    assert!(d.angle_to(&Direction::y_axis()) < 1e-12);
    let parsed: Vec<Direction> =
        serde_json::from_str(r#"[{"theta": 0.0, "phi": 0.0}, {"x": 1.0, "y": 0.0, "z": 0.0}]"#).unwrap();
    assert!(parsed[1].angle_to(&Direction::x_axis()) < 1e-12);
    assert!(Direction::from_angles(4.0, 0.0).is_err());
}

#[test]
fn z_effect_is_weight_projector() {
    let shape = block_shape(6).unwrap();
    let e = pi_effect(&Direction::z_axis(), 6, 3).unwrap();
    let sym = e.block_matrix(0, 7);
    for i in 0..7 {
        for j in 0..7 {
            let want = if i == 3 && j == 3 { 1.0 } else { 0.0 };
            assert!((sym[(i, j)] - c(want, 0.0)).norm() < 1e-12);
        }
    }
    let basis = CoupledBasis::new(6).unwrap();
    let dense = basis.embed_operator(&effect_blocks(&e, &shape)).unwrap();
    assert!(frob(&(dense - dense_effect(6, [0.0, 0.0, 1.0], 3))) < 1e-10);
}

#[test]
fn absent_blocks() {
    let e = pi_effect(&Direction::x_axis(), 6, 0).unwrap();
    assert!(e.factors[0].is_some());
    assert!(e.factors[1..].iter().all(|f| f.is_none()));
    assert!(pi_effect(&Direction::x_axis(), 6, 7).is_err());
}

#[test]
fn effects_match_kronecker_construction() {
    let mut r = rng(21);
    for n in 2..=5 {
        let shape = block_shape(n).unwrap();
        let basis = CoupledBasis::new(n).unwrap();
        for _ in 0..4 {
            let d = random_direction(&mut r);
            for k in 0..=n {
                let e = pi_effect(&d, n, k).unwrap();
                let dense = basis.embed_operator(&effect_blocks(&e, &shape)).unwrap();
                let want = dense_effect(n, d.vector(), k);
                assert!(frob(&(&dense - &want)) < 1e-10);
                let binom: f64 = (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product();
                assert!((dense.trace().re - binom).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn pi_probability_examples() {
    let axes = SettingSet::pi(vec![Direction::z_axis(), Direction::x_axis()]).unwrap();
    let p = pi_probabilities(&dicke_state_pi(6, 3).unwrap(), &axes).unwrap();
    for (k, v) in p[0].iter().enumerate() {
        assert!((v - if k == 3 { 1.0 } else { 0.0 }).abs() < 1e-12);
    }
    assert!((p[1][0] - 20.0 / 64.0).abs() < 1e-12);
    let mixed = pi_probabilities(&PIState::maximally_mixed(6).unwrap(), &axes).unwrap();
    let binom = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
    for row in &mixed {
        for (k, v) in row.iter().enumerate() {
            assert!((v - binom[k] / 64.0).abs() < 1e-12);
        }
    }
    let pauli = default_full_settings(6).unwrap();
    assert!(pi_probabilities(&PIState::maximally_mixed(6).unwrap(), &pauli).is_err());
}

#[test]
fn full_probability_examples() {
    let x: PauliString = "X".parse().unwrap();
    let s = SettingSet::full(vec![x], 1).unwrap();
    let zero = FullState::from_pure(1, &nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
    let p = full_probabilities(&zero, &s).unwrap();
    assert!((p[0][0] - 0.5).abs() < 1e-12 && (p[0][1] - 0.5).abs() < 1e-12);

    let z6: PauliString = "ZZZZZZ".parse().unwrap();
    let s = SettingSet::full(vec![z6], 6).unwrap();
    let d = embed_to_full(&dicke_state_pi(6, 3).unwrap()).unwrap();
    let p = full_probabilities(&d, &s).unwrap();
    for (x, v) in p[0].iter().enumerate() {
        let want = if x.count_ones() == 3 { 0.05 } else { 0.0 };
        assert!((v - want).abs() < 1e-12);
    }
}

#[test]
fn full_probabilities_match_kronecker() {
    let mut r = rng(22);
    for n in 1..=4 {
        let rho = random_density(&mut r, 1 << n);
        let state = FullState::new(n, rho.clone()).unwrap();
        let settings = default_full_settings(n).unwrap();
        let p = full_probabilities(&state, &settings).unwrap();
        for (s, label) in settings.labels().unwrap().iter().enumerate() {
            let want = dense_pauli_probabilities(&rho, &label.to_string());
            for (a, b) in p[s].iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((p[s].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn default_full_settings_order() {
    let s = default_full_settings(2).unwrap();
    let labels: Vec<String> = s.labels().unwrap().iter().map(|l| l.to_string()).collect();
    assert_eq!(labels, ["XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ"]);
    assert_eq!(default_full_settings(6).unwrap().len(), 729);
}

fn exact_counts_for(state: &PIState, scale: f64) -> [Vec<u64>; 3] {
    let axes = SettingSet::pi(vec![Direction::x_axis(), Direction::y_axis(), Direction::z_axis()]).unwrap();
    let p = pi_probabilities(state, &axes).unwrap();
    let c = exact_counts(&p, scale);
    [c[0].clone(), c[1].clone(), c[2].clone()]
}

#[test]
fn symmetric_bound_examples() {
    // 2^6 * 5^k scaling makes every probability of these states an integer count
    let [x, y, z] = exact_counts_for(&dicke_state_pi(6, 3).unwrap(), 64.0 * 1e6);
    assert!((symmetric_overlap_bound(&x, &y, &z).unwrap() - 1.0).abs() < 1e-10);
    let [x, y, z] = exact_counts_for(&PIState::maximally_mixed(6).unwrap(), 64.0 * 1e6);
    assert!((symmetric_overlap_bound(&x, &y, &z).unwrap() + 0.25).abs() < 1e-10);
    assert!(symmetric_overlap_bound(&[0; 7], &y, &z).is_err());
    assert!(symmetric_overlap_bound(&x[..6], &y, &z).is_err());
}

#[test]
fn spin_inequality_eigenvalues() {
    // S² ≤ s₁ P_s + s₂ (1 - P_s) as an operator inequality, checked densely
    for n in 2..=6 {
        let s2 = {
            let sx = collective_spin(n, 'X');
            let sy = collective_spin(n, 'Y');
            let sz = collective_spin(n, 'Z');
            &sx * &sx + &sy * &sy + &sz * &sz
        };
        let half = n as f64 / 2.0;
        let (a, b) = (half * (half + 1.0), (half - 1.0) * half);
        let mut ps = M::zeros(1 << n, 1 << n);
        for k in 0..=n {
            ps += projector(&dicke_dense(n, k));
        }
        let dim = 1usize << n;
        let rhs = &ps * c(a, 0.0) + (M::identity(dim, dim) - &ps) * c(b, 0.0);
        let gap = (rhs - s2).symmetric_eigen().eigenvalues.min();
        assert!(gap > -1e-9, "N={n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn povm_completeness(n in 1usize..=10, theta in 0.0..=std::f64::consts::PI, phi in 0.0..std::f64::consts::TAU) {
        let d = Direction::from_angles(theta, phi).unwrap();
        let shape = block_shape(n).unwrap();
        let mut sums: Vec<CMatrix> = shape.blocks.iter().map(|b| CMatrix::zeros(b.dim, b.dim)).collect();
        for k in 0..=n {
            let e = pi_effect(&d, n, k).unwrap();
            for (i, b) in shape.blocks.iter().enumerate() {
                sums[i] += e.block_matrix(i, b.dim);
            }
        }
        for (s, b) in sums.iter().zip(&shape.blocks) {
            prop_assert!(frob(&(s - CMatrix::identity(b.dim, b.dim))) < 1e-10);
        }
    }

    #[test]
    fn pi_probabilities_match_dense(n in 2usize..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let state = random_pi_state(&mut r, n);
        let dense = embed_to_full(&state).unwrap();
        let dirs: Vec<Direction> = (0..3).map(|_| random_direction(&mut r)).collect();
        let p = pi_probabilities(&state, &SettingSet::pi(dirs.clone()).unwrap()).unwrap();
        for (s, d) in dirs.iter().enumerate() {
            let want = dense_pi_probabilities(dense.matrix(), n, d.vector());
            for (a, b) in p[s].iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            prop_assert!((p[s].iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p[s].iter().all(|&v| v > -1e-12));
        }
    }

    #[test]
    fn bound_is_sound_on_exact_probabilities(n in 2usize..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let state = random_pi_state(&mut r, n);
        let axes = SettingSet::pi(vec![Direction::x_axis(), Direction::y_axis(), Direction::z_axis()]).unwrap();
        let p = pi_probabilities(&state, &axes).unwrap();
        let bound = symmetric_overlap_bound_from_frequencies(&p[0], &p[1], &p[2]).unwrap();
        prop_assert!(bound <= state.symmetric_block().trace().re + 1e-9);
    }

    #[test]
    fn bound_is_tight_on_symmetric_pure_states(n in 2usize..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let v = random_pure(&mut r, n + 1);
        let block = projector(&v);
        let state = PIState::symmetric(n, block).unwrap();
        let axes = SettingSet::pi(vec![Direction::x_axis(), Direction::y_axis(), Direction::z_axis()]).unwrap();
        let p = pi_probabilities(&state, &axes).unwrap();
        let bound = symmetric_overlap_bound_from_frequencies(&p[0], &p[1], &p[2]).unwrap();
        prop_assert!((bound - 1.0).abs() < 1e-9);
    }
}
