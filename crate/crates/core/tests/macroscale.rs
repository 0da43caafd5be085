use std::f64::consts::PI;
use std::sync::Arc;

use bh_core::macroscale::{
    solve_homogenized_elliptic, solve_homogenized_memory, Data, MacroCoefficients, MacroProblem, Regime,
};
use bh_core::presets::Preset;
use bh_core::tensors::Mat3;

fn diag(d: [f64; 3]) -> Mat3 {
    [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
}

fn coeffs(c0: f64, m: f64, kernel: Vec<Mat3>, kdt: f64) -> MacroCoefficients {
    let phi = vec![[[0.0; 3]; 3]; kernel.len()];
    MacroCoefficients {
        c0: diag([c0; 3]),
        m: diag([m; 3]),
        kernel,
        phi,
        kernel_dt: kdt,
        a_hom: None,
    }
}

fn decaying_kernel(n: usize, kdt: f64) -> Vec<Mat3> {
    (0..=n)
        .map(|i| {
            let e = 0.3 * (-(i as f64) * kdt).exp();
            [[e, 0.05 * e, 0.0], [0.02 * e, 0.8 * e, 0.0], [0.0, 0.0, e]]
        })
        .collect()
}

fn sin_sin(x: &[f64; 3]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn nodal_error(p: &MacroProblem, u: &[f64], exact: impl Fn(&[f64; 3]) -> f64) -> f64 {
    let e: Vec<f64> = p.mesh.vertices.iter().zip(u).map(|(x, v)| v - exact(x)).collect();
    p.mass().form(&e, &e).sqrt()
}

#[test]
fn zero_data_gives_zero_solution() {
    let c = coeffs(0.5, 2.0, decaying_kernel(20, 0.05), 0.05);
    let p = MacroProblem::new(
        2,
        8,
        Regime::K1ConnectedConnected,
        c,
        &Preset::Zero.into(),
        Preset::Zero.into(),
        1.0,
        0.1,
    )
    .unwrap();
    let s = solve_homogenized_memory(&p).unwrap();
    assert!(s.field.values.iter().flatten().all(|&v| v == 0.0));

    let mut c = coeffs(0.0, 1.0, vec![[[0.0; 3]; 3]; 2], 1.0);
    c.a_hom = Some(diag([2.0, 1.5, 1.0]));
    let p = MacroProblem::new(
        2,
        8,
        Regime::Kgt1,
        c,
        &Preset::Zero.into(),
        Preset::Zero.into(),
        1.0,
        0.5,
    )
    .unwrap();
    let s = solve_homogenized_elliptic(&p).unwrap();
    assert!(s.field.values.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn energy_decays_without_memory() {
    let c = coeffs(0.7, 2.0, vec![[[0.0; 3]; 3]; 2], 2.0);
    let p = MacroProblem::new(
        2,
        10,
        Regime::K1ConnectedConnected,
        c,
        &Preset::GaussianBump.into(),
        Preset::Zero.into(),
        2.0,
        0.05,
    )
    .unwrap();
    let s = solve_homogenized_memory(&p).unwrap();
    for w in s.energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
    }
    assert!(s.energy.last().unwrap() < &(0.5 * s.energy[0]));
    for u in &s.field.values {
        for (v, &b) in u.iter().zip(&s.boundary) {
            if b {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

/// u = sin(πx₁)sin(πx₂)e^{−t} with C⁰ = I/2, λ₀I + A⁰ = I, B⁰ = 0 solves
/// −Div(C⁰∇u_t + ∇u) = π² sin sin e^{−t}.
fn manufactured(n: usize, dt: f64) -> f64 {
    let c = coeffs(0.5, 1.0, vec![[[0.0; 3]; 3]; 2], 1.0);
    let f: Data = Data::Custom(Arc::new(|x: &[f64; 3], t: f64| PI * PI * sin_sin(x) * (-t).exp()));
    let p = MacroProblem::new(
        2,
        n,
        Regime::K1ConnectedConnected,
        c,
        &Preset::SinProduct.into(),
        f,
        1.0,
        dt,
    )
    .unwrap();
    let s = solve_homogenized_memory(&p).unwrap();
    nodal_error(&p, s.field.values.last().unwrap(), |x| sin_sin(x) * (-1.0f64).exp())
}

#[test]
fn manufactured_memory_free_limit() {
    // Temporal error dominates at n = 64.
    let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| manufactured(64, dt)).collect();
    assert!(e[0] < 5e-2, "{e:?}");
    for w in e.windows(2) {
        let r = w[0] / w[1];
        assert!((1.6..2.4).contains(&r), "time ratio {r} ({e:?})");
    }
    // Spatial error dominates with a tiny step.
    let e: Vec<f64> = [4, 8, 16].iter().map(|&n| manufactured(n, 1e-3)).collect();
    for w in e.windows(2) {
        let r = w[0] / w[1];
        assert!((3.0..5.0).contains(&r), "space ratio {r} ({e:?})");
    }
}

#[test]
fn kgt1_manufactured_solution() {
    let lam = 1.7;
    let errs: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let mut c = coeffs(0.0, 1.0, vec![[[0.0; 3]; 3]; 2], 1.0);
            c.a_hom = Some(diag([lam; 3]));
            let f = Data::Custom(Arc::new(move |x: &[f64; 3], _| 2.0 * PI * PI * lam * sin_sin(x)));
            let p = MacroProblem::new(2, n, Regime::Kgt1, c, &Preset::Zero.into(), f, 1.0, 0.5).unwrap();
            let s = solve_homogenized_elliptic(&p).unwrap();
            assert_eq!(s.field.n_levels(), 3);
            nodal_error(&p, &s.field.values[2], sin_sin)
        })
        .collect();
    assert!(errs[2] < 5e-3, "{errs:?}");
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((3.0..5.0).contains(&r), "{r} {errs:?}");
    }
}

#[test]
fn klt1_without_tensor_returns_flagged_zero() {
    let c = coeffs(0.0, 1.0, vec![[[0.0; 3]; 3]; 2], 1.0);
    let p = MacroProblem::new(
        3,
        3,
        Regime::Klt1,
        c,
        &Preset::SinProduct.into(),
        Preset::SinProduct.into(),
        1.0,
        0.25,
    )
    .unwrap();
    let s = solve_homogenized_elliptic(&p).unwrap();
    assert!(s.flag.is_some());
    assert!(s.field.values.iter().flatten().all(|&v| v == 0.0));
    assert!(solve_homogenized_memory(&p).is_err());
}

#[test]
fn solution_is_linear_in_data() {
    let mut c = coeffs(0.4, 2.0, decaying_kernel(40, 0.025), 0.025);
    c.phi = decaying_kernel(40, 0.025);
    let run = |u0: Preset, f: Preset| {
        let p = MacroProblem::new(
            2,
            8,
            Regime::K1ConnectedConnected,
            c.clone(),
            &u0.into(),
            f.into(),
            1.0,
            0.05,
        )
        .unwrap();
        solve_homogenized_memory(&p).unwrap().field.values
    };
    let a = run(Preset::SinProduct, Preset::Zero);
    let b = run(Preset::Zero, Preset::GaussianBump);
    let ab = run(Preset::SinProduct, Preset::GaussianBump);
    let scale = ab.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for ((x, y), z) in a.iter().flatten().zip(b.iter().flatten()).zip(ab.iter().flatten()) {
        assert!((x + y - z).abs() <= 1e-10 * scale);
    }
}

#[test]
fn memory_is_causal() {
    let kdt = 0.05;
    let full = decaying_kernel(40, kdt);
    let run = |kernel: Vec<Mat3>| {
        let c = coeffs(0.4, 2.0, kernel, kdt);
        let p = MacroProblem::new(
            2,
            6,
            Regime::K1ConnectedConnected,
            c,
            &Preset::SinProduct.into(),
            Preset::Zero.into(),
            0.5,
            kdt,
        )
        .unwrap();
        solve_homogenized_memory(&p).unwrap().field.values
    };
    assert_eq!(run(full.clone()), run(full[..11].to_vec()));
}

#[test]
fn memory_stepping_is_first_order() {
    let kdt = 0.0125;
    let mut c = coeffs(0.4, 2.0, decaying_kernel(80, kdt), kdt);
    c.phi = decaying_kernel(80, kdt);
    let finals: Vec<Vec<f64>> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| {
            let p = MacroProblem::new(
                2,
                8,
                Regime::K1ConnectedConnected,
                c.clone(),
                &Preset::SinProduct.into(),
                Preset::Zero.into(),
                1.0,
                dt,
            )
            .unwrap();
            solve_homogenized_memory(&p)
                .unwrap()
                .field
                .values
                .last()
                .unwrap()
                .clone()
        })
        .collect();
    let d: Vec<f64> = finals
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    for w in d.windows(2) {
        let r = w[0] / w[1];
        assert!((1.5..2.6).contains(&r), "{r} {d:?}");
    }
}

#[test]
fn disconnected_regime_starts_from_elliptic_state() {
    let kdt = 0.05;
    let mut c = coeffs(0.0, 2.0, decaying_kernel(20, kdt), kdt);
    c.phi = decaying_kernel(20, kdt);
    let p = MacroProblem::new(
        2,
        8,
        Regime::K1ConnectedDisconnected,
        c,
        &Preset::SinProduct.into(),
        Preset::Zero.into(),
        1.0,
        kdt,
    )
    .unwrap();
    let s = solve_homogenized_memory(&p).unwrap();
    // K_M u⁰ = −K_{Φ(0)} ū₀ with Φ(0) positive definite, so u⁰ opposes ū₀.
    let u0 = &s.field.values[0];
    let dotp: f64 = u0.iter().zip(&p.u0_bar).map(|(a, b)| a * b).sum();
    assert!(dotp < 0.0);
    assert!(s.field.values.iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn horizon_beyond_kernel_is_rejected() {
    let c = coeffs(0.4, 2.0, decaying_kernel(10, 0.05), 0.05);
    let r = MacroProblem::new(
        2,
        4,
        Regime::K1ConnectedConnected,
        c,
        &Preset::SinProduct.into(),
        Preset::Zero.into(),
        1.0,
        0.05,
    );
    assert!(r.is_err());
}
