//! Acceptance checks. One line per criterion; nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlbm::afqlbm::Afqlbm;
use qlbm::analysis::{self, lower_shift, probability_bounds};
use qlbm::cli::{self, RunConfig};
use qlbm::lattice::{classical_run, classical_step, Geometry, MacroField, ModelSpec, Scheme};
use qlbm::legacy::{run_legacy_step, LegacySpec};
use qlbm::qsim::{
    shift_unitary_check, Circuit, Control, Gate, GateOp, QState, QubitBlock, QubitLayout,
    ShiftDirection,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.3}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn legacy_golden() -> Check {
    let start = Instant::now();
    let spec = LegacySpec {
        cells: 4,
        w_hat: [0.75, 0.25],
        initial: vec![0.0, 0.0, 1.0, 0.0],
    };
    let step = run_legacy_step(&spec).map_err(|e| e.to_string())?;
    let err = linf(&step.field.phi, &[0.0, 0.25, 0.0, 0.75]);
    ensure(err <= 1e-12, format!("field error {err:e}"))?;
    let residual = Complex64::new(0.0, (7f64.sqrt() + 15f64.sqrt()) / 4.0);
    let expected = [
        (3, Complex64::new(0.75, 0.0)),
        (1, Complex64::new(0.25, 0.0)),
        (4 + 2, residual),
    ];
    for (idx, want) in expected {
        let got = step.rescaled[idx];
        ensure((got - want).norm() <= 1e-12, format!("amplitude {idx}: {got} vs {want}"))?;
    }
    let others = (0..8)
        .filter(|i| ![1, 3, 6].contains(i))
        .map(|i| step.rescaled[i].norm())
        .fold(0.0, f64::max);
    ensure(others <= 1e-12, format!("stray amplitude {others:e}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("field err {err:.1e}, {:.3}s", start.elapsed().as_secs_f64()))
}

fn d1q3_config() -> MacroField {
    MacroField::with_overrides(Geometry::Line(64), 0.1, &[(vec![11], 0.2)]).unwrap()
}

fn d1q3_exactness() -> Check {
    let start = Instant::now();
    let spec = ModelSpec::new(Scheme::D1Q3, 64).with_velocity(0.2, 0.0);
    let field = d1q3_config();
    let model = Afqlbm::new(&spec).map_err(|e| e.to_string())?;
    let ls = model.run_exact(&field, 30, false).map_err(|e| e.to_string())?;
    let q = qlbm::readout::macroscopic_exact(&ls.state, ls.initial_l1, Geometry::Line(64))
        .map_err(|e| e.to_string())?;
    let c = classical_run(&field, &spec, 30).map_err(|e| e.to_string())?;
    let err = linf(&q.phi, &c.phi);
    ensure(err <= 1e-10, format!("Linf {err:e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("Linf {err:.1e}, {:.3}s", start.elapsed().as_secs_f64()))
}

fn d2q5_exactness() -> Check {
    let start = Instant::now();
    let spec = ModelSpec::new(Scheme::D2Q5, 16).with_velocity(0.2, 0.15);
    let geometry = Geometry::Square(16);
    let field = MacroField::with_overrides(geometry, 0.1, &[(vec![4, 4], 0.3)]).unwrap();
    let model = Afqlbm::new(&spec).map_err(|e| e.to_string())?;
    let mut ls = model.encode_initial(&field, false).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in 1..=20 {
        ls = model.run_loop_exact(ls).map_err(|e| e.to_string())?;
        if t % 5 == 0 {
            let q = qlbm::readout::macroscopic_exact(&ls.state, ls.initial_l1, geometry)
                .map_err(|e| e.to_string())?;
            let c = classical_run(&field, &spec, t).map_err(|e| e.to_string())?;
            let err = linf(&q.phi, &c.phi);
            ensure(err <= 1e-10, format!("T={t}: Linf {err:e}"))?;
            worst = worst.max(err);
        }
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!("worst Linf {worst:.1e}, {:.3}s", start.elapsed().as_secs_f64()))
}

fn sampled_config(difference_mode: bool) -> RunConfig {
    let json = format!(
        r#"{{ "scheme": "D1Q3", "cells": 64, "u": 0.2,
             "initial": {{ "background": 0.1, "overrides": [ {{ "cell": [11], "value": 0.2 }} ] }},
             "loops": 30, "mode": "quantum-sampled", "difference_mode": {difference_mode},
             "shots": 640000, "seed": 2024 }}"#
    );
    RunConfig::from_json(&json).unwrap()
}

fn classical_reference() -> MacroField {
    let spec = ModelSpec::new(Scheme::D1Q3, 64).with_velocity(0.2, 0.0);
    classical_run(&d1q3_config(), &spec, 30).unwrap()
}

fn sampled_convergence() -> Check {
    let sweep = cli::seed_sweep(&sampled_config(true), &classical_reference(), 20)
        .map_err(|e| e.to_string())?;
    ensure(sweep.metrics.len() == 20, "expected 20 seeds")?;
    ensure(
        sweep.median_l2 <= 0.02,
        format!("median relative L2 {:.4}", sweep.median_l2),
    )?;
    Ok(format!("median relative L2 {:.2e} over 20 seeds", sweep.median_l2))
}

fn difference_dominance() -> Check {
    let reference = classical_reference();
    let diff = cli::seed_sweep(&sampled_config(true), &reference, 20).map_err(|e| e.to_string())?;
    let direct = cli::seed_sweep(&sampled_config(false), &reference, 20).map_err(|e| e.to_string())?;
    ensure(
        diff.median_l2 < direct.median_l2,
        format!("difference {:.3e} vs direct {:.3e}", diff.median_l2, direct.median_l2),
    )?;
    Ok(format!(
        "difference {:.2e} < direct {:.2e}",
        diff.median_l2, direct.median_l2
    ))
}

fn toffoli_table() -> Check {
    let start = Instant::now();
    let mut rows = Vec::new();
    for m in [2usize, 4, 8, 16, 32, 64] {
        let n = m.trailing_zeros() as u64;
        let emitted = analysis::emitted_streaming_toffoli(Scheme::D2Q5, m);
        let want = 4 * n * n + 8 * n;
        ensure(emitted == want, format!("M={m}: emitted {emitted}, closed form {want}"))?;
        ensure(
            analysis::toffoli_count(Scheme::D2Q5, m) == want,
            format!("M={m}: decomposition disagrees"),
        )?;
        let saving = analysis::prior_toffoli(m) - emitted;
        ensure(saving == 8 * n, format!("M={m}: saving {saving}, want {}", 8 * n))?;
        rows.push(format!("{m}:{emitted}"));
    }
    within(start.elapsed(), 1.0)?;
    Ok(rows.join(" "))
}

fn probability_checks() -> Check {
    let (lo, hi) = probability_bounds(Scheme::D1Q3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for trial in 0..200 {
        let m = 1usize << rng.random_range(1..=6);
        let rest = rng.random_range(0.0..0.95);
        let side = (1.0 - rest) / 2.0;
        let u = rng.random_range(-0.99..0.99);
        let spec = ModelSpec::new(Scheme::D1Q3, m)
            .with_weights(vec![rest, side, side], 1.0)
            .with_velocity(u, 0.0);
        let mut phi: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        phi[rng.random_range(0..m)] += 1e-3;
        let field = MacroField::new(phi, Geometry::Line(m)).unwrap();
        let model = Afqlbm::new(&spec).map_err(|e| format!("trial {trial}: {e}"))?;
        let p = model.run_exact(&field, 1, false).map_err(|e| e.to_string())?.postselect_probs[0];
        ensure(
            p >= lo - 1e-12 && p <= hi + 1e-12,
            format!("trial {trial}: p={p} outside [{lo}, {hi}]"),
        )?;
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }

    let spec = ModelSpec::new(Scheme::D1Q3, 64).with_velocity(0.2, 0.0);
    let model = Afqlbm::new(&spec).map_err(|e| e.to_string())?;
    let ls = model.run_exact(&d1q3_config(), 30, false).map_err(|e| e.to_string())?;
    let trace_min = ls.postselect_probs.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(trace_min >= 0.5, format!("config trace dips to {trace_min}"))?;

    let uniform = MacroField::uniform(Geometry::Line(16), 1.0);
    let model = Afqlbm::new(&ModelSpec::new(Scheme::D1Q3, 16).with_velocity(0.2, 0.0)).map_err(|e| e.to_string())?;
    let pu = model.run_exact(&uniform, 1, false).map_err(|e| e.to_string())?.postselect_probs[0];
    ensure((0.70..=0.75).contains(&pu), format!("uniform default p={pu}"))?;
    Ok(format!(
        "random p in [{pmin:.4}, {pmax:.4}], config trace min {trace_min:.4}, uniform default {pu:.4}"
    ))
}

fn random_unit_state(layout: QubitLayout, rng: &mut ChaCha8Rng) -> QState {
    let amps = (0..layout.dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    QState::from_amplitudes(layout, amps).unwrap()
}

fn inner(a: &QState, b: &QState) -> Complex64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x.conj() * y).sum()
}

fn property_suites() -> Check {
    let tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let layout = QubitLayout::new(2, 3, 1);
    let n = layout.total_qubits();

    // Inner products survive every gate kind, with and without controls.
    for trial in 0..200 {
        let target = rng.random_range(0..n);
        let gate = match trial % 4 {
            0 => Gate::X(target),
            1 => Gate::H(target),
            2 => Gate::Ry(target, rng.random_range(-7.0..7.0)),
            _ => Gate::Shift {
                block: layout.axis_block(0),
                direction: if rng.random() { ShiftDirection::Up } else { ShiftDirection::Down },
            },
        };
        let busy: Vec<usize> = match &gate {
            Gate::Shift { block, .. } => block.qubits().collect(),
            _ => vec![target],
        };
        let mut controls = Vec::new();
        for q in (0..n).filter(|q| !busy.contains(q)) {
            if rng.random_bool(0.3) {
                controls.push(if rng.random() { Control::on(q) } else { Control::off(q) });
            }
        }
        let op = GateOp::controlled(gate, controls);
        let (mut a, mut b) = (random_unit_state(layout, &mut rng), random_unit_state(layout, &mut rng));
        let before = inner(&a, &b);
        a.apply(&op).map_err(|e| e.to_string())?;
        b.apply(&op).map_err(|e| e.to_string())?;
        ensure((inner(&a, &b) - before).norm() <= tol, format!("unitarity trial {trial}"))?;
    }

    for bits in 1..=6 {
        let layout = QubitLayout::new(0, bits, 1);
        let block = layout.axis_block(0);
        let psi = random_unit_state(layout, &mut rng);
        let up = GateOp::new(Gate::Shift { block, direction: ShiftDirection::Up });
        let down = GateOp::new(Gate::Shift { block, direction: ShiftDirection::Down });
        let mut s = psi.clone();
        s.apply(&up).map_err(|e| e.to_string())?;
        s.apply(&down).map_err(|e| e.to_string())?;
        ensure((inner(&psi, &s).norm() - 1.0).abs() <= tol, format!("R L != I at n={bits}"))?;
        let mut s = psi.clone();
        for _ in 0..(1usize << bits) {
            s.apply(&up).map_err(|e| e.to_string())?;
        }
        ensure((inner(&psi, &s) - 1.0).norm() <= tol, format!("R^M != I at n={bits}"))?;
    }

    for bits in 1..=8 {
        for direction in [ShiftDirection::Up, ShiftDirection::Down] {
            ensure(shift_unitary_check(bits, direction), format!("lowered shift n={bits}"))?;
        }
    }
    let layout = QubitLayout::new(1, 4, 1);
    let block = layout.axis_block(0);
    let ctl = vec![Control::off(0)];
    let psi = random_unit_state(layout, &mut rng);
    let mut direct = psi.clone();
    direct
        .apply(&GateOp::controlled(Gate::Shift { block, direction: ShiftDirection::Up }, ctl.clone()))
        .map_err(|e| e.to_string())?;
    let mut lowered = psi;
    let mut circuit = Circuit::new(layout);
    for op in lower_shift(QubitBlock::new(block.start, block.len), ShiftDirection::Up, &ctl) {
        circuit.push(op);
    }
    lowered.run(&circuit).map_err(|e| e.to_string())?;
    ensure((inner(&direct, &lowered) - 1.0).norm() <= tol, "controlled lowered shift")?;

    for (scheme, m) in [(Scheme::D1Q3, 16), (Scheme::D2Q5, 4)] {
        let spec = ModelSpec::new(scheme, m).with_velocity(0.15, if scheme == Scheme::D2Q5 { 0.1 } else { 0.0 });
        let geometry = spec.geometry();
        let len = geometry.len();
        let a: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
        let fa = MacroField::new(a.clone(), geometry).unwrap();
        let fb = MacroField::new(b.clone(), geometry).unwrap();
        let sa = classical_step(&fa, &spec).map_err(|e| e.to_string())?;
        ensure((sa.sum() - fa.sum()).abs() <= tol, format!("{scheme} mass"))?;
        let (alpha, beta) = (0.7, 1.9);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
        let smix = classical_step(&MacroField::new(mix, geometry).unwrap(), &spec).map_err(|e| e.to_string())?;
        let sb = classical_step(&fb, &spec).map_err(|e| e.to_string())?;
        let lin: Vec<f64> = sa.phi.iter().zip(&sb.phi).map(|(x, y)| alpha * x + beta * y).collect();
        ensure(linf(&smix.phi, &lin) <= tol, format!("{scheme} linearity"))?;

        let uniform = MacroField::uniform(geometry, 0.37);
        let model = Afqlbm::new(&spec).map_err(|e| e.to_string())?;
        let ls = model.run_exact(&uniform, 3, false).map_err(|e| e.to_string())?;
        let q = qlbm::readout::macroscopic_exact(&ls.state, ls.initial_l1, geometry).map_err(|e| e.to_string())?;
        ensure(linf(&q.phi, &uniform.phi) <= tol, format!("{scheme} uniform fixed point"))?;
        let qa = model.run_exact(&fa, 1, false).map_err(|e| e.to_string())?;
        let qa = qlbm::readout::macroscopic_exact(&qa.state, qa.initial_l1, geometry).map_err(|e| e.to_string())?;
        ensure((qa.sum() - fa.sum()).abs() <= tol, format!("{scheme} quantum mass"))?;
    }
    Ok("unitarity, shift identities, lowered shifts n<=8, mass, linearity, fixed point".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("legacy worked example", legacy_golden),
        ("D1Q3 exactness vs classical", d1q3_exactness),
        ("D2Q5 exactness vs classical", d2q5_exactness),
        ("sampled convergence", sampled_convergence),
        ("difference-mode dominance", difference_dominance),
        ("Toffoli closed form and saving", toffoli_table),
        ("post-selection probability bounds", probability_checks),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] criterion {}: {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {}: {name} ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
