//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use holotrap::cli::{cmd_design, cmd_evaluate, EvaluateInput, Overrides, RunConfig};
use holotrap::solver::solver_input_field;
use holotrap::{
    add_lens_phase, apply_device, estimate_waist, fresnel_max_distance, fresnel_propagate, lens_for_focal_shift,
    load_sim, max_phase, position_precision, propagate_to_focal, propagate_to_slm, solve, waist_ratio_from_thresholds,
    wrap_phase, BeamProfile, ComplexField, DeviceModel, DriveSettings, InitMode, LoadingModel, OpticalSystem,
    PhaseMask, Plane, SolverConfig, TrapMetrics, TrapReport, TrapSpec, UpdateRule,
};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_config(name: &str, out: &Path) -> RunConfig {
    let overrides = Overrides {
        out: Some(out.to_path_buf()),
        ..Overrides::default()
    };
    RunConfig::load(configs().join(format!("{name}.json")), &overrides).expect("shipped config loads")
}

fn pupil_field(sys: &OpticalSystem<f64>, phase: impl Fn(usize, usize) -> f64) -> ComplexField<f64> {
    let pupil = sys.pupil_mask();
    let n = sys.grid_size;
    let samples = Array2::from_shape_fn((n, n), |(r, c)| {
        if pupil[[r, c]] {
            Complex64::from_polar(1.0, phase(r, c))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    ComplexField::new(samples, sys.slm_pitch, sys.wavelength, Plane::Slm).unwrap()
}

fn spacing_law() -> Outcome {
    let sys = OpticalSystem::<f64>::reference_setup();
    let n = sys.grid_size;
    let h = n / 2;
    let pitch = sys.focal_pitch();
    let mut worst: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    let mut lines = Vec::new();
    for period_um in [575.1, 718.9, 1150.2] {
        let period = period_um * 1e-6;
        let field = pupil_field(&sys, |_, c| wrap_phase(2.0 * PI * (c as f64 - h as f64) * sys.slm_pitch / period));
        let fft = propagate_to_focal(&field, &sys).unwrap();
        // brute-force DFT along the central focal row, columns 0..60 right of the axis
        let mut best = (0.0, 0usize);
        for m in 0..60usize {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((_, c), v) in field.samples().indexed_iter() {
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let arg = -2.0 * PI * (m as f64) * (c as f64 - h as f64) / n as f64;
                acc += v * Complex64::from_polar(1.0, arg);
            }
            let amp = acc.norm() / n as f64;
            mismatch = mismatch.max((amp - fft.samples()[[h, h + m]].norm()).abs());
            if amp > best.0 {
                best = (amp, m);
            }
        }
        let predicted = sys.wavelength * sys.focal_length / period;
        let found = best.1 as f64 * pitch;
        let err = (found - predicted).abs();
        worst = worst.max(err);
        lines.push(format!("p={period_um} um: peak {:.3} um vs {:.3} um", found * 1e6, predicted * 1e6));
    }
    check(
        worst <= 0.5 * pitch && mismatch < 1e-9,
        format!(
            "{}; worst error {:.4} um (limit {:.4}); FFT vs DFT {:.1e}",
            lines.join(", "),
            worst * 1e6,
            0.5 * pitch * 1e6,
            mismatch
        ),
    )
}

fn row_and_cross() -> [(&'static str, TrapSpec<f64>); 2] {
    let load = |name: &str| TrapSpec::load(configs().join(format!("{name}.traps.json"))).unwrap();
    [("row3", load("row3")), ("cross5", load("cross5"))]
}

fn solver_convergence() -> Outcome {
    let sys = OpticalSystem::<f64>::reference_setup();
    let mut worst_final: f64 = 0.0;
    let mut all_improve = true;
    let mut lines = Vec::new();
    for (name, spec) in row_and_cross() {
        let mut name_worst: f64 = 0.0;
        let mut regressed = Vec::new();
        for seed in 1..=10u64 {
            let cfg = SolverConfig {
                iterations: 4,
                init_mode: InitMode::SeededRandom,
                seed: Some(seed),
                update_rule: UpdateRule::ClassicReplace,
            };
            let (_, report) = solve(&spec, &sys, &cfg).unwrap();
            let first = report.iterations[0].uniformity_deviation;
            let fourth = report.iterations[3].uniformity_deviation;
            if fourth > first {
                all_improve = false;
                regressed.push(seed.to_string());
            }
            name_worst = name_worst.max(fourth);
        }
        worst_final = worst_final.max(name_worst);
        lines.push(format!(
            "{name} worst u4 = {name_worst:.3}, u4 > u1 for seeds [{}]",
            regressed.join(",")
        ));
    }
    check(
        worst_final <= 0.10 && all_improve,
        format!(
            "{}; limit 0.10",
            lines.join(", ")
        ),
    )
}

fn phase_only_and_parseval() -> Outcome {
    let sys = OpticalSystem::<f64>::reference_setup();
    let (mask, _) = solve(&row_and_cross()[0].1, &sys, &SolverConfig::default()).unwrap();
    let input = solver_input_field(&mask, &sys).unwrap();
    let pupil = sys.pupil_mask();
    let mut amp_err: f64 = 0.0;
    for (v, &inside) in input.samples().iter().zip(&pupil) {
        let want = if inside { 1.0 } else { 0.0 };
        amp_err = amp_err.max((v.norm() - want).abs());
    }

    let mut parseval: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = sys.grid_size;
    for _ in 0..4 {
        let samples = Array2::from_shape_fn((n, n), |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let x = ComplexField::new(samples, sys.slm_pitch, sys.wavelength, Plane::Slm).unwrap();
        let f = propagate_to_focal(&x, &sys).unwrap();
        let back = propagate_to_slm(&f, &sys).unwrap();
        parseval = parseval.max((f.energy() / x.energy() - 1.0).abs());
        parseval = parseval.max((back.energy() / f.energy() - 1.0).abs());
    }
    let f = propagate_to_focal(&input, &sys).unwrap();
    parseval = parseval.max((f.energy() / input.energy() - 1.0).abs());
    check(
        amp_err <= 1e-15 && parseval <= 1e-10,
        format!("max | |E| - A | on the SLM = {amp_err:.1e}; worst Parseval error {parseval:.1e}"),
    )
}

fn zeroth_order_control() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();

    let pair = load_config("pair", &tmp.path().join("pair"));
    let design = cmd_design(&pair).unwrap();
    let (rep, _) = cmd_evaluate(&pair, &EvaluateInput::Hologram(design.hologram)).unwrap();
    let pair_ok = !rep.zeroth_order_above_threshold && rep.traps.iter().all(|t| t.above_threshold);
    lines.push(format!(
        "pair: traps {} mW, center {:.2} mW",
        powers(&rep.traps),
        rep.zeroth_order_power_w * 1e3
    ));

    let three = load_config("zeroth3", &tmp.path().join("zeroth3"));
    let design = cmd_design(&three).unwrap();
    let (rep, _) = cmd_evaluate(&three, &EvaluateInput::Hologram(design.hologram)).unwrap();
    let lit = rep.traps.iter().filter(|t| t.above_threshold).count();
    let three_ok = rep.traps.len() == 3 && lit == 3;
    lines.push(format!("3-trap with zeroth order: traps {} mW, {lit} above threshold", powers(&rep.traps)));

    check(pair_ok && three_ok, lines.join("; "))
}

fn powers(traps: &[TrapMetrics<f64>]) -> String {
    traps
        .iter()
        .map(|t| format!("{:.2}", t.power_w * 1e3))
        .collect::<Vec<_>>()
        .join("/")
}

fn device_phase_range() -> Outcome {
    let dev = DeviceModel::<f64>::pal_slm();
    let at_633 = max_phase(&dev, 633e-9);
    let at_810 = max_phase(&dev, 810e-9) / PI;

    let sys = OpticalSystem::<f64>::reference_setup();
    let period = 16;
    let blaze = PhaseMask::new(
        Array2::from_shape_fn((sys.grid_size, sys.grid_size), |(_, c)| {
            wrap_phase(2.0 * PI * (c % period) as f64 / period as f64)
        }),
        sys.slm_pitch,
        sys.wavelength,
    )
    .unwrap();
    let beam = BeamProfile {
        waist_at_slm: 1e6,
        power: 1e-3,
        polarization_ok: true,
    };
    let zeroth = |d: &DeviceModel<f64>| {
        let field = apply_device(&blaze, d, &beam, &sys, &DriveSettings::default()).unwrap();
        let f = propagate_to_focal(&field, &sys).unwrap();
        let h = sys.grid_size / 2;
        f.samples()[[h, h]].norm_sqr() / f.energy()
    };
    let ideal = zeroth(&DeviceModel::ideal(sys.wavelength));
    let clipped = zeroth(&dev);
    check(
        at_633 == 2.1 * PI && (1.63..=1.66).contains(&at_810) && clipped > ideal,
        format!(
            "max_phase(633 nm) = {:.6} pi, max_phase(810 nm) = {at_810:.4} pi; zeroth order clipped {clipped:.3e} vs ideal {ideal:.3e}",
            at_633 / PI
        ),
    )
}

fn position_precision_band() -> Outcome {
    let p = position_precision(4e-6, 810e-9, 3.55e-3, 40e-6).unwrap() * 1e6;
    check((0.20..=0.31).contains(&p), format!("{p:.4} um, band [0.20, 0.31] um"))
}

fn synthetic_report(flags: &[bool]) -> TrapReport<f64> {
    TrapReport {
        label: String::new(),
        traps: flags
            .iter()
            .enumerate()
            .map(|(i, &above)| TrapMetrics {
                trap_index: Some(i),
                zeroth_order: false,
                requested_position_m: [0.0; 2],
                position_m: [0.0; 2],
                peak_intensity: 0.0,
                power_fraction: 0.0,
                power_w: if above { 10e-3 } else { 1e-3 },
                waist_m: None,
                depth_relative: 0.0,
                above_threshold: above,
            })
            .collect(),
        zeroth_order_intensity: 0.0,
        zeroth_order_power_w: 0.0,
        zeroth_order_above_threshold: false,
        efficiency: 0.0,
        uniformity_deviation: 0.0,
        total_power_w: 40e-3,
        threshold_power_per_trap_w: 4e-3,
    }
}

fn loading_statistics() -> Outcome {
    let model = LoadingModel {
        p_single: 0.5,
        trials: 100_000,
        seed: 1,
        ..LoadingModel::default()
    };
    let three = load_sim(&synthetic_report(&[true, true, true]), &model).unwrap();
    let joint = three.joint_all_occupied.unwrap();
    let mean = three.mean_atom_number;
    let with_dark = load_sim(&synthetic_report(&[true, false, true, true]), &model).unwrap();
    let dark = with_dark.per_trap_frequency[1];
    check(
        (joint - 0.125).abs() <= 0.005 && (mean - 1.5).abs() <= 0.01 && dark == 0.0,
        format!("joint {joint:.4} (0.125 +/- 0.005), mean {mean:.4} (1.5 +/- 0.01), below-threshold occupancy {dark}"),
    )
}

fn waist_logic() -> Outcome {
    let ratio = waist_ratio_from_thresholds(1.3225f64 * 4e-3, 4e-3);
    let sys = OpticalSystem::<f64>::reference_setup();
    let p = sys.focal_pitch();
    let h = (sys.grid_size / 2) as f64;
    let w0 = 0.9e-6;
    let g = Array2::from_shape_fn((sys.grid_size, sys.grid_size), |(r, c)| {
        let x = (c as f64 - h) * p - 0.04e-6;
        let y = (r as f64 - h) * p + 0.02e-6;
        (-2.0 * (x * x + y * y) / (w0 * w0)).exp()
    });
    let n = sys.grid_size;
    let w = estimate_waist(&g, p, (n / 2, n / 2), 2.0 * sys.airy_zero_radius()).unwrap();
    let rel = (w / w0 - 1.0).abs();
    check(
        (ratio - 1.15).abs() <= 1e-12 && rel <= 0.02,
        format!("ratio {ratio:.15}; estimated waist {:.4} um (error {:.2e})", w * 1e6, rel),
    )
}

fn lens_term() -> Outcome {
    let base = OpticalSystem::<f64>::reference_setup();
    let sys = OpticalSystem {
        grid_size: 1024,
        slm_pitch: 20e-3 / 960.0,
        ..base
    };
    let h = sys.grid_size / 2;
    let mut lines = Vec::new();
    let mut ok = true;
    for shift in [50e-6, -50e-6] {
        let f_lens = lens_for_focal_shift(shift, &sys);
        let mask = add_lens_phase(&PhaseMask::zeros(&sys), Some(f_lens), &sys).unwrap();
        let focal = propagate_to_focal(&pupil_field(&sys, |r, c| mask.phase()[[r, c]]), &sys).unwrap();
        if 1.5 * shift.abs() > fresnel_max_distance(&focal) {
            return Err(format!("scan range exceeds the Fresnel sampling bound {:.1} um", fresnel_max_distance(&focal) * 1e6));
        }
        let on_axis = |z: f64| fresnel_propagate(&focal, z).unwrap().samples()[[h, h]].norm_sqr();
        // coarse scan over [shift/2, 3·shift/2], then finer scans around the best plane
        let (mut lo, mut hi) = if shift > 0.0 { (0.5 * shift, 1.5 * shift) } else { (1.5 * shift, 0.5 * shift) };
        let mut best = 0.0;
        for _ in 0..3 {
            let steps = 16;
            let mut top = (f64::NEG_INFINITY, 0.0);
            for k in 0..=steps {
                let z = lo + (hi - lo) * k as f64 / steps as f64;
                let i = on_axis(z);
                if i > top.0 {
                    top = (i, z);
                }
            }
            best = top.1;
            let step = (hi - lo) / steps as f64;
            lo = best - step;
            hi = best + step;
        }
        let err = (best / shift - 1.0).abs();
        ok &= err <= 0.05;
        lines.push(format!("{:+.0} um -> peak at {:+.2} um ({:.1}%)", shift * 1e6, best * 1e6, err * 100.0));
    }
    check(ok, format!("N=1024: {}", lines.join(", ")))
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let cfg = load_config("row3", &tmp.path().join(run));
        let design = cmd_design(&cfg).unwrap();
        let (_, report) = cmd_evaluate(&cfg, &EvaluateInput::Hologram(design.hologram.clone())).unwrap();
        outputs.push((std::fs::read(&design.hologram).unwrap(), std::fs::read(report).unwrap()));
    }
    check(
        outputs[0] == outputs[1],
        format!(
            "hologram {} bytes identical: {}; report {} bytes identical: {}",
            outputs[0].0.len(),
            outputs[0].0 == outputs[1].0,
            outputs[0].1.len(),
            outputs[0].1 == outputs[1].1
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("spacing law", spacing_law),
        ("solver convergence", solver_convergence),
        ("phase-only and energy invariants", phase_only_and_parseval),
        ("zeroth-order control", zeroth_order_control),
        ("device phase range", device_phase_range),
        ("position precision", position_precision_band),
        ("loading statistics", loading_statistics),
        ("waist bound logic", waist_logic),
        ("lens term", lens_term),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("criterion {:>2} {tag}: {name} [{secs:.1} s] {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
