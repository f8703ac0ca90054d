//! Cross-module regressions: generic random-data runs for the matrix bound,
//! and steady-state rigidity checks reached by long-time integration.

use harnack_core::estimates::{check_liouville, check_matrix_li_yau, CheckOptions, EstimateError};
use harnack_core::pde::{solve_linear, Scheme, SolverConfig};
use harnack_core::potentials::audit_hypotheses;
use harnack_core::{GridSpec, PotentialSpec, ScalarField, Topology, TrigMode};

#[test]
fn generic_torus_matrix_li_yau_holds() {
    let g = GridSpec::cube(2, 2.0, 128, Topology::Periodic).unwrap();
    let u1 = PotentialSpec::Trig {
        dim: 2,
        extents: [2.0, 2.0, 1.0],
        modes: vec![
            TrigMode { amplitude: 0.1, mode: [1, 0, 0], phase: 0.2 },
            TrigMode { amplitude: 0.08, mode: [0, 1, 0], phase: 1.4 },
        ],
    };
    let u2 = PotentialSpec::zero(2);
    let rho0 = ScalarField::from_fn(&g, |p| {
        1.0 + 0.3 * (std::f64::consts::PI * p[0]).sin()
            + 0.25 * (std::f64::consts::PI * p[1] + 0.6).cos()
    });
    let cfg =
        SolverConfig::new(Scheme::Imex, 5e-4, 0.0, 1.0).with_snapshots(&[0.05, 0.2, 1.0]);
    let traj = solve_linear(&rho0, &u1, &u2, &cfg).unwrap();
    let audit = audit_hypotheses(&u1, &u2, &g, 0.0, 2).unwrap();
    let k = audit.min_k_hessian * 1.01;
    for &t in &[0.05, 0.2, 1.0] {
        let r = check_matrix_li_yau(&traj, k, t, &CheckOptions::default()).unwrap();
        assert!(r.min_margin >= -5e-3, "matrix margin {} at t = {t}", r.min_margin);
    }
}

/// Single-mode trig drift whose reaction term is tuned so the derived
/// potential vanishes identically: `U2 = lap(U1)/2 + |grad U1|^2/4`.
fn vanishing_v_pair(extent: f64, amplitude: f64) -> (PotentialSpec, PotentialSpec) {
    let omega = 2.0 * std::f64::consts::PI / extent;
    let u1 = PotentialSpec::Trig {
        dim: 1,
        extents: [extent, 1.0, 1.0],
        modes: vec![TrigMode { amplitude, mode: [1, 0, 0], phase: 0.0 }],
    };
    // lap U1 / 2 = -(A w^2 / 2) cos(wx);
    // |grad U1|^2 / 4 = (A^2 w^2 / 8)(1 - cos(2wx)).
    let u2 = PotentialSpec::Trig {
        dim: 1,
        extents: [extent, 1.0, 1.0],
        modes: vec![
            TrigMode { amplitude: -amplitude * omega * omega / 2.0, mode: [1, 0, 0], phase: 0.0 },
            TrigMode {
                amplitude: amplitude * amplitude * omega * omega / 8.0,
                mode: [0, 0, 0],
                phase: 0.0,
            },
            TrigMode {
                amplitude: -amplitude * amplitude * omega * omega / 8.0,
                mode: [2, 0, 0],
                phase: 0.0,
            },
        ],
    };
    (u1, u2)
}

#[test]
fn liouville_rigidity_from_long_time_solve() {
    // V == 0: the elliptic steady state is rho = C e^{-U1/2}. Reach it by
    // integrating far past the spectral-gap time and check both the margin
    // and the rigidity ratio.
    let extent = 2.0;
    let g = GridSpec::cube(1, extent, 256, Topology::Periodic).unwrap();
    let (u1, u2) = vanishing_v_pair(extent, 0.4);
    let rho0 = ScalarField::from_fn(&g, |p| {
        1.0 + 0.35 * (std::f64::consts::PI * p[0] + 0.3).sin()
    });
    let cfg = SolverConfig::new(Scheme::Imex, 1e-3, 0.0, 6.0);
    let traj = solve_linear(&rho0, &u1, &u2, &cfg).unwrap();
    let steady = &traj.fields()[0];
    let report = check_liouville(steady, &u1, &u2, &CheckOptions::default()).unwrap();
    assert!(
        report.params["w_ratio_minus_one"] <= 1e-4,
        "rho e^(U1/2) ratio deviation {}",
        report.params["w_ratio_minus_one"]
    );
    // margin = V/2 - |...|^2 <= 0 pointwise here since V == 0; it must be
    // numerically negligible.
    assert!(report.min_margin >= -1e-6, "margin {}", report.min_margin);
}

#[test]
fn liouville_rejects_unsteady_states() {
    let g = GridSpec::cube(1, 2.0, 128, Topology::Periodic).unwrap();
    let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.5 * (std::f64::consts::PI * p[0]).sin());
    match check_liouville(&rho, &PotentialSpec::zero(1), &PotentialSpec::zero(1), &CheckOptions::default())
    {
        Err(EstimateError::NotSteady { .. }) => {}
        other => panic!("expected NotSteady, got {other:?}"),
    }
}
