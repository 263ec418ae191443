use nalgebra::DMatrix;
use proptest::prelude::*;
use qgsplit::arakawa::{build_template, coefficient_entry, eval_direct, CoefficientTemplate, Scheme, State};
use qgsplit::ordering::{bw_order, commutation_weights, mincom_order, plain_order};
use qgsplit::splitting::{jacobian_determinant_check, shear, step_signed, Order, StepperConfig};
use qgsplit::verify::random_state;
use qgsplit::{build_operators, GridSpec, OperatorSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(n: usize) -> (GridSpec, OperatorSet) {
    let g = GridSpec::new(n).unwrap();
    (g, build_operators(g))
}

fn shifted(grid: &GridSpec, v: &[f64], dx: isize, dy: isize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (idx, &x) in v.iter().enumerate() {
        out[grid.translate(idx, dx, dy)] = x;
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn diagonal_free_up_to_n16() {
    for n in [4, 6, 8, 16] {
        let (g, ops) = setup(n);
        for scheme in Scheme::ALL {
            let mut worst: f64 = 0.0;
            for i in 0..g.len() {
                for k in 0..g.len() {
                    worst = worst
                        .max(coefficient_entry(scheme, &ops, i, i, k).abs())
                        .max(coefficient_entry(scheme, &ops, i, k, i).abs());
                }
            }
            assert!(worst <= 1e-13, "N={n} {scheme}: {worst:e}");
        }
    }
}

#[test]
fn divergence_vanishes() {
    let (g, ops) = setup(8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for scheme in Scheme::ALL {
        let t = build_template(scheme, &ops);
        for _ in 0..3 {
            let s = random_state(&g, &mut rng);
            assert!(t.divergence(&s).abs() <= 1e-10);
        }
    }
}

#[test]
fn volume_preserved_for_all_schemes_and_orderings() {
    for n in [4, 6] {
        let (g, ops) = setup(n);
        let state = random_state(&g, &mut ChaCha8Rng::seed_from_u64(n as u64));
        for scheme in Scheme::ALL {
            let t = build_template(scheme, &ops);
            let orderings = [plain_order(&g), bw_order(&g), mincom_order(&commutation_weights(&t), 0).unwrap()];
            for o in orderings {
                let kind = o.kind();
                let cfg = StepperConfig::new(0.1, o, Order::Two).unwrap();
                let det = jacobian_determinant_check(&t, &cfg, &state, 1e-6);
                assert!((det - 1.0).abs() <= 1e-6, "N={n} {scheme} {kind}: {det}");
            }
        }
    }
}

/// Lie bracket of the single-component fields `f_i e_i` and `f_j e_j`.
fn bracket_norm(t: &CoefficientTemplate, s: &State, i: usize, j: usize) -> f64 {
    let fi = t.component(i, s).unwrap();
    let fj = t.component(j, s).unwrap();
    let gi = t.component_gradient(i, s);
    let gj = t.component_gradient(j, s);
    (gj[i] * fi).hypot(gi[j] * fj)
}

#[test]
fn commutator_bound() {
    let (g, ops) = setup(8);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for scheme in Scheme::ALL {
        let t = build_template(scheme, &ops);
        let w = commutation_weights(&t);
        let a = t.materialize(0).singular_values().max();
        let zero_h = vec![0.0; g.len()];
        for _ in 0..200 {
            let i = rng.random_range(0..g.len());
            let j = rng.random_range(0..g.len());
            let mut s = random_state(&g, &mut rng);
            let norm = s.q.iter().map(|v| v * v).sum::<f64>().sqrt();
            s.q.iter_mut().for_each(|v| *v /= norm);
            s.h.clone_from(&zero_h);
            let b = bracket_norm(&t, &s, i, j);
            assert!(b <= a * w.weight(i, j) + 1e-15, "{scheme} ({i},{j}): {b:e} > {:e}", a * w.weight(i, j));
        }
    }
}

#[test]
fn zero_weight_pairs_commute() {
    let (g, ops) = setup(8);
    let t = build_template(Scheme::JEZ, &ops);
    let w = commutation_weights(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let states: Vec<State> = (0..10).map(|_| random_state(&g, &mut rng)).collect();
    let mut pairs = 0;
    for i in 0..g.len() {
        for j in 0..g.len() {
            if i == j || w.weight(i, j) != 0.0 || w.weight(j, i) != 0.0 {
                continue;
            }
            pairs += 1;
            for s in &states {
                let mut a = s.clone();
                shear(&t, i, 0.1, &mut a);
                shear(&t, j, 0.1, &mut a);
                let mut b = s.clone();
                shear(&t, j, 0.1, &mut b);
                shear(&t, i, 0.1, &mut b);
                assert!(max_abs_diff(&a.q, &b.q) <= 1e-12);
            }
        }
    }
    assert!(pairs >= 64);
}

#[test]
fn weights_nonnegative_with_zero_diagonal() {
    let (g, ops) = setup(8);
    for scheme in Scheme::ALL {
        let w = commutation_weights(&build_template(scheme, &ops));
        assert!(w.base().iter().all(|&c| c >= 0.0));
        for i in 0..g.len() {
            assert_eq!(w.weight(i, i), 0.0);
        }
        // each variable commutes with its partner half a period away diagonally
        for x in 0..4 {
            for y in 0..4 {
                let i = g.index(x, y);
                assert_eq!(w.weight(i, g.index(x + 4, y + 4)), 0.0);
            }
        }
    }
}

#[test]
fn bw_order_counts() {
    let g = GridSpec::new(8).unwrap();
    let o = bw_order(&g);
    let parity: Vec<usize> = o
        .perm()
        .iter()
        .map(|&i| {
            let (x, y) = g.coords(i);
            (x + y) % 2
        })
        .collect();
    assert!(parity[..32].iter().all(|&p| p == 0));
    assert!(parity[32..].iter().all(|&p| p == 1));
}

#[test]
fn dense_template_matrix_has_bounded_columns() {
    let (g, ops) = setup(8);
    for scheme in Scheme::ALL {
        let t = build_template(scheme, &ops);
        let m: DMatrix<f64> = t.materialize(9);
        let cols = (0..g.len()).filter(|&l| m.column(l).amax() > 0.0).count();
        assert!(cols <= scheme.max_columns());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shift_equivariance(seed in any::<u64>(), dx in -5isize..6, dy in -5isize..6, s in 0usize..4) {
        let scheme = Scheme::ALL[s];
        let (g, ops) = setup(6);
        let t = build_template(scheme, &ops);
        let state = random_state(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let moved = State::new(shifted(&g, &state.q, dx, dy), shifted(&g, &state.h, dx, dy)).unwrap();
        let direct = eval_direct(scheme, &moved, &ops).unwrap();
        let expected = shifted(&g, &eval_direct(scheme, &state, &ops).unwrap(), dx, dy);
        prop_assert!(max_abs_diff(&direct, &expected) <= 1e-12);
        prop_assert!(max_abs_diff(&t.eval(&moved).unwrap(), &expected) <= 1e-12);
    }

    #[test]
    fn step_roundtrip(seed in any::<u64>(), tau in -0.3f64..0.3, fourth in any::<bool>()) {
        let (g, ops) = setup(4);
        let t = build_template(Scheme::JEZ, &ops);
        let order = if fourth { Order::Four } else { Order::Two };
        let cfg = StepperConfig::new(0.1, mincom_order(&commutation_weights(&t), 0).unwrap(), order).unwrap();
        let s0 = random_state(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut s = s0.clone();
        step_signed(&t, &cfg, tau, &mut s);
        step_signed(&t, &cfg, -tau, &mut s);
        prop_assert!(max_abs_diff(&s.q, &s0.q) <= 1e-12);
    }

    #[test]
    fn mincom_is_permutation_from_start(start in 0usize..16) {
        let (_, ops) = setup(4);
        let w = commutation_weights(&build_template(Scheme::JEZ, &ops));
        let o = mincom_order(&w, start).unwrap();
        prop_assert_eq!(o.perm()[0], start);
        let mut sorted = o.perm().to_vec();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn own_variable_does_not_enter(seed in any::<u64>(), i in 0usize..36, c in -5.0f64..5.0, s in 0usize..4) {
        let (g, ops) = setup(6);
        let t = build_template(Scheme::ALL[s], &ops);
        let state = random_state(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut p = state.clone();
        p.q[i] += c;
        prop_assert!((t.component(i, &p).unwrap() - t.component(i, &state).unwrap()).abs() <= 1e-13);
    }
}
