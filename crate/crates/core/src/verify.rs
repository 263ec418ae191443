//! Quick invariant suite used by the `verify` subcommand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::arakawa::{build_template, coefficient_entry, eval_direct, Scheme, State};
use crate::error::Result;
use crate::grid::GridSpec;
use crate::operators::{build_operators, OperatorSet};
use crate::ordering::{bw_order, commutation_weights, mincom_order, plain_order};
use crate::prediction::topography;
use crate::splitting::{jacobian_determinant_check, Order, Stepper, StepperConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured.is_finite() && self.measured <= self.tolerance
    }
}

/// Gaussian vorticity over the reference topography.
pub fn random_state(grid: &GridSpec, rng: &mut ChaCha8Rng) -> State {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let q = (0..grid.len()).map(|_| normal.sample(rng)).collect();
    State::new(q, topography(grid)).expect("matching lengths")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Normalized |grad I . J| for each integral the scheme conserves.
pub fn conservation_defects(scheme: Scheme, state: &State, ops: &OperatorSet) -> Result<Vec<(&'static str, f64)>> {
    let j = eval_direct(scheme, state, ops)?;
    let psi = ops.stream_function(&state.q, &state.h)?;
    let mut grads: Vec<(&'static str, Vec<f64>)> = vec![("C", vec![1.0; state.len()])];
    if scheme.conserves_energy() {
        grads.push(("E", psi.iter().map(|p| -p).collect()));
    }
    if scheme.conserves_enstrophy() {
        grads.push(("Z", state.q.clone()));
    }
    Ok(grads
        .into_iter()
        .map(|(name, g)| {
            let scale = norm(&g) * norm(&j);
            let v = if scale > 0.0 { dot(&g, &j).abs() / scale } else { 0.0 };
            (name, v)
        })
        .collect())
}

/// Runs the suite at grid size `n`; the determinant check always uses N = 4.
pub fn run_suite(n: usize, seed: u64) -> Result<Vec<Check>> {
    let grid = GridSpec::new(n)?;
    let ops = build_operators(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<State> = (0..5).map(|_| random_state(&grid, &mut rng)).collect();
    let mut checks = Vec::new();

    for scheme in Scheme::ALL {
        let template = build_template(scheme, &ops);
        let mut consistency: f64 = 0.0;
        let mut divergence: f64 = 0.0;
        let mut conservation: f64 = 0.0;
        for s in &states {
            let a = template.eval(s)?;
            let b = eval_direct(scheme, s, &ops)?;
            consistency = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(consistency, f64::max);
            divergence = divergence.max(template.divergence(s).abs());
            for (_, d) in conservation_defects(scheme, s, &ops)? {
                conservation = conservation.max(d);
            }
        }
        let mut diagonal: f64 = 0.0;
        let mut shift: f64 = 0.0;
        let len = grid.len();
        for i in 0..len {
            for k in 0..len {
                diagonal = diagonal
                    .max(coefficient_entry(scheme, &ops, i, i, k).abs())
                    .max(coefficient_entry(scheme, &ops, i, k, i).abs());
            }
        }
        // shift identity on a stride of target nodes
        for i in (0..len).step_by((len / 16).max(1)) {
            for k in 0..len {
                for l in 0..len {
                    shift = shift.max((template.entry(i, k, l) - coefficient_entry(scheme, &ops, i, k, l)).abs());
                }
            }
        }
        checks.push(Check {
            name: format!("{scheme} template vs direct"),
            measured: consistency,
            tolerance: 1e-12,
        });
        checks.push(Check {
            name: format!("{scheme} diagonal-free"),
            measured: diagonal,
            tolerance: 1e-13,
        });
        checks.push(Check {
            name: format!("{scheme} shift identity"),
            measured: shift,
            tolerance: 1e-12,
        });
        checks.push(Check {
            name: format!("{scheme} divergence"),
            measured: divergence,
            tolerance: 1e-10,
        });
        checks.push(Check {
            name: format!("{scheme} conservation"),
            measured: conservation,
            tolerance: 1e-10,
        });
    }

    let template = build_template(Scheme::JEZ, &ops);
    let ordering = mincom_order(&commutation_weights(&template), 0)?;
    let stepper = Stepper::new(&template, StepperConfig::new(0.1, ordering, Order::Two)?)?;
    let mut s = states[0].clone();
    for _ in 0..100 {
        stepper.step_unchecked(&mut s);
    }
    for _ in 0..100 {
        stepper.step_back(&mut s);
    }
    let diff: Vec<f64> = s.q.iter().zip(&states[0].q).map(|(a, b)| a - b).collect();
    checks.push(Check {
        name: "reversibility 100 steps".into(),
        measured: norm(&diff) / norm(&states[0].q),
        tolerance: 1e-9,
    });

    let small = GridSpec::new(4)?;
    let small_ops = build_operators(small);
    let small_template = build_template(Scheme::JEZ, &small_ops);
    let probe = random_state(&small, &mut rng);
    let orderings = [
        plain_order(&small),
        bw_order(&small),
        mincom_order(&commutation_weights(&small_template), 0)?,
    ];
    for ordering in orderings {
        let name = format!("volume preservation N=4 {}", ordering.kind());
        let cfg = StepperConfig::new(0.1, ordering, Order::Two)?;
        let det = jacobian_determinant_check(&small_template, &cfg, &probe, 1e-6);
        checks.push(Check {
            name,
            measured: (det - 1.0).abs(),
            tolerance: 1e-6,
        });
    }
    Ok(checks)
}
