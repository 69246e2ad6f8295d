//! Property suites with a pass/fail result, run by both the integration
//! tests and the acceptance gate.

use std::fs;

use c2f_core::c2f::{
    complete_coarse, gap, refine, replace_decision, update_epsilon, write_stage_log, C2FPlan,
};
use c2f_core::experiment::{run_experiment, ExperimentSpec, Mode};
use c2f_core::io::{generate_mask, save_image, MaskMode};
use c2f_core::linalg::{soft_threshold, svt};
use c2f_core::patch::{extract, make_grid, merge};
use c2f_core::tensor::{fold, matricize, mode_k_product};
use c2f_core::{DenseTensor, Mat, SolverConfig, SolverKind};
use rand::Rng;

use super::*;

pub type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Unfolding index law and fold round trip on 100 random tensors.
pub fn index_law_round_trip() -> Outcome {
    let mut r = rng(11);
    for case in 0..100 {
        let dims = random_dims(&mut r, 4, 5);
        let t = random_tensor(&mut r, &dims);
        for k in 0..dims.len() {
            let m = matricize(&t, k).map_err(|e| e.to_string())?;
            let cols: usize = dims
                .iter()
                .enumerate()
                .filter(|&(n, _)| n != k)
                .map(|(_, d)| d)
                .product();
            ensure!(
                m.nrows() == dims[k] && m.ncols() == cols,
                "case {case}: unfolding shape"
            );
            for idx in all_indices(&dims) {
                let want = t.data()[offset(&idx, &dims)];
                let got = m[(idx[k], unfolding_column(&idx, &dims, k))];
                ensure!(
                    got.to_bits() == want.to_bits(),
                    "case {case} mode {k} index {idx:?}: {got} != {want}"
                );
            }
            let back = fold(m.as_ref(), k, &dims).map_err(|e| e.to_string())?;
            ensure!(back == t, "case {case} mode {k}: fold does not invert");
        }
    }
    Ok(())
}

/// Mode-k product against explicit summation loops.
pub fn mode_product_oracle() -> Outcome {
    let mut r = rng(12);
    for case in 0..100 {
        let dims = random_dims(&mut r, 4, 5);
        let k = r.gen_range(0..dims.len());
        let t = random_tensor(&mut r, &dims);
        let rows = r.gen_range(1..=6);
        let u = random_matrix(&mut r, rows, dims[k]);
        let got = mode_k_product(&t, u.as_ref(), k).map_err(|e| e.to_string())?;
        let want = mode_product_loops(&t, &u, k);
        ensure!(
            got.dims() == want.dims(),
            "case {case}: dims {:?} vs {:?}",
            got.dims(),
            want.dims()
        );
        for (a, b) in got.data().iter().zip(want.data()) {
            ensure!((a - b).abs() <= 1e-12, "case {case}: {a} vs {b}");
        }
    }
    Ok(())
}

fn prox_objective(x: &Mat<f64>, m: &Mat<f64>, tau: f64) -> f64 {
    let diff: Vec<f64> = (0..x.ncols())
        .flat_map(|j| (0..x.nrows()).map(move |i| (i, j)))
        .map(|(i, j)| x[(i, j)] - m[(i, j)])
        .collect();
    0.5 * kahan_sum(diff.iter().map(|v| v * v))
        + tau * jacobi_singular_values(x).iter().sum::<f64>()
}

/// Singular value and entrywise thresholding minimize their proximal
/// objectives: no random perturbation does better.
pub fn prox_optimality() -> Outcome {
    let mut r = rng(13);
    for case in 0..20 {
        let (rows, cols) = (r.gen_range(2..6), r.gen_range(2..6));
        let m = random_matrix(&mut r, rows, cols);
        let tau = r.gen_range(0.05..1.0);
        let x = svt(m.as_ref(), tau).map_err(|e| e.to_string())?;
        let best = prox_objective(&x, &m, tau);
        for _ in 0..50 {
            let scale = 10f64.powi(-r.gen_range(1..5));
            let p = random_matrix(&mut r, rows, cols);
            let trial = Mat::from_fn(rows, cols, |i, j| x[(i, j)] + scale * p[(i, j)]);
            let value = prox_objective(&trial, &m, tau);
            ensure!(
                value >= best - 1e-12,
                "case {case}: svt beaten by {} ({value} < {best})",
                best - value
            );
        }

        let v: Vec<f64> = (0..8).map(|_| r.gen_range(-2.0..2.0)).collect();
        let s = soft_threshold(&v, tau).map_err(|e| e.to_string())?;
        let obj = |x: &[f64]| {
            x.iter()
                .zip(&v)
                .map(|(a, b)| 0.5 * (a - b) * (a - b) + tau * a.abs())
                .sum::<f64>()
        };
        for _ in 0..50 {
            let trial: Vec<f64> = s.iter().map(|a| a + r.gen_range(-0.1..0.1)).collect();
            ensure!(
                obj(&trial) >= obj(&s) - 1e-14,
                "case {case}: soft threshold beaten"
            );
        }
        let w: Vec<f64> = (0..8).map(|_| r.gen_range(-2.0..2.0)).collect();
        let sw = soft_threshold(&w, tau).map_err(|e| e.to_string())?;
        let d_in = frob(&v.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
        let d_out = frob(&s.iter().zip(&sw).map(|(a, b)| a - b).collect::<Vec<_>>());
        ensure!(
            d_out <= d_in + 1e-15,
            "case {case}: soft threshold expands distance"
        );
    }
    Ok(())
}

/// Every iterate either solver publishes matches the observations bitwise.
pub fn omega_fidelity() -> Outcome {
    let mut r = rng(14);
    let truth = random_tucker(&mut r, &[10, 9, 3], &[2, 2, 2]);
    let omega =
        generate_mask(truth.dims(), 0.6, 5, MaskMode::PerEntry).map_err(|e| e.to_string())?;
    let y = omega.observed_or_zero(&truth).map_err(|e| e.to_string())?;
    for kind in [SolverKind::TraceNorm, SolverKind::Tv2] {
        let cfg = SolverConfig {
            max_iters: 40,
            ..SolverConfig::default()
        };
        let mut seen = 0;
        let mut bad = None;
        let out = kind
            .solver()
            .complete_observed(&y, &omega, &cfg, &mut |it, z| {
                seen += 1;
                let ok = omega
                    .indicator()
                    .iter()
                    .zip(z.data().iter().zip(y.data()))
                    .all(|(&o, (a, b))| !o || a.to_bits() == b.to_bits());
                if !ok && bad.is_none() {
                    bad = Some(it);
                }
            })
            .map_err(|e| e.to_string())?;
        ensure!(
            bad.is_none(),
            "{kind}: iterate {:?} leaves the observations",
            bad
        );
        ensure!(
            seen == out.iterations && seen > 0,
            "{kind}: observed {seen} of {} iterates",
            out.iterations
        );
        ensure!(
            omega.agrees(&out.restored, &y),
            "{kind}: final output leaves the observations"
        );
    }
    Ok(())
}

fn small_run(shortcut: bool) -> Result<(C2FPlan, c2f_core::C2FResult, DenseTensor), String> {
    let truth = synthetic_image(32, 32, 3);
    let omega =
        generate_mask(truth.dims(), 0.6, 9, MaskMode::PerEntry).map_err(|e| e.to_string())?;
    let y = omega.observed_or_zero(&truth).map_err(|e| e.to_string())?;
    let plan = C2FPlan {
        stages: 2,
        epsilon0: 0.05,
        overlap: vec![4],
        solver: SolverKind::TraceNorm,
        config: SolverConfig {
            max_iters: 80,
            ..SolverConfig::default()
        },
        shortcut,
        ..C2FPlan::default()
    };
    let coarse = complete_coarse(&y, &omega, &plan).map_err(|e| e.to_string())?;
    let result = refine(&y, &omega, &plan, &coarse, Some(&truth)).map_err(|e| e.to_string())?;
    Ok((plan, result, truth))
}

/// Replacement flags and thresholds are reproducible from the stage log
/// alone, and the logged rank weights follow the tightening schedule.
pub fn replacement_from_logs() -> Outcome {
    let (plan, result, _) = small_run(false)?;
    let mut bytes = Vec::new();
    write_stage_log(&result, &plan, &mut bytes).map_err(|e| e.to_string())?;
    let lines: Vec<serde_json::Value> = String::from_utf8(bytes)
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    ensure!(lines[0]["schema"] == "c2f-stage-log", "missing log header");

    let mut any_replaced = false;
    let mut prev_eps = plan.epsilon0;
    for stage in 1..=plan.stages {
        let patches: Vec<_> = lines
            .iter()
            .filter(|l| l["type"] == "patch" && l["stage"] == stage)
            .collect();
        ensure!(
            patches.len() == 1 << (2 * stage),
            "stage {stage}: {} patch lines",
            patches.len()
        );
        let mut gaps = Vec::new();
        let mut flags = Vec::new();
        for p in &patches {
            let g = p["gap"].as_f64().unwrap_or(f64::INFINITY);
            let eps = p["epsilon"].as_f64().ok_or("missing epsilon")?;
            ensure!(
                eps.to_bits() == prev_eps.to_bits(),
                "stage {stage}: epsilon {eps} vs expected {prev_eps}"
            );
            let flag = p["replaced"].as_bool().ok_or("missing flag")?;
            ensure!(
                flag == (g < eps),
                "stage {stage}: flag {flag} for gap {g} at epsilon {eps}"
            );
            ensure!(
                flag == replace_decision(g, eps),
                "stage {stage}: decision disagrees"
            );
            any_replaced |= flag;
            gaps.push(g);
            flags.push(flag);
        }
        let summary = lines
            .iter()
            .find(|l| l["type"] == "stage" && l["stage"] == stage)
            .ok_or("missing stage line")?;
        let next = summary["epsilon_next"]
            .as_f64()
            .ok_or("missing epsilon_next")?;
        let want = epsilon_reference(stage, &gaps, &flags, prev_eps);
        ensure!(
            next.to_bits() == want.to_bits(),
            "stage {stage}: next epsilon {next} vs {want}"
        );
        let scale = summary["trace_scale"]
            .as_f64()
            .ok_or("missing trace_scale")?;
        let want_scale = plan.config.trace_scale * plan.mu.powi(stage as i32);
        ensure!(
            (scale - want_scale).abs() <= 1e-12 * want_scale,
            "stage {stage}: scale {scale} vs {want_scale}"
        );
        let l2 = summary["lambda2"].as_f64().ok_or("missing lambda2")?;
        let want_l2 = plan.config.lambda2 * plan.mu.powi(stage as i32);
        ensure!(
            (l2 - want_l2).abs() <= 1e-12 * want_l2,
            "stage {stage}: lambda2 {l2} vs {want_l2}"
        );
        prev_eps = next;
    }
    ensure!(any_replaced, "no patch was replaced, the check is vacuous");
    Ok(())
}

/// `gap(c a, c b) = gap(a, b)` and agreement with a compensated formula.
pub fn gap_scale_invariance() -> Outcome {
    let mut r = rng(15);
    for case in 0..100 {
        let dims = random_dims(&mut r, 3, 6);
        let a = random_tensor(&mut r, &dims);
        let b = random_tensor(&mut r, &dims);
        let c = r.gen_range(0.1..10.0) * if r.gen_bool(0.5) { -1.0 } else { 1.0 };
        let g = gap(&a, &b).map_err(|e| e.to_string())?;
        let gc = gap(&a.scaled(c), &b.scaled(c)).map_err(|e| e.to_string())?;
        ensure!(
            (g - gc).abs() <= 1e-12 * g.max(1e-300),
            "case {case}: {g} vs {gc} at c={c}"
        );
        let diff: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
        let want = frob(&diff) / frob(b.data());
        ensure!(
            (g - want).abs() <= 1e-12 * want,
            "case {case}: {g} vs oracle {want}"
        );
    }
    Ok(())
}

/// Merging patches that agree with the base returns the base exactly,
/// merging is repeatable, and overlap averages match a per-pixel
/// accumulate-and-divide reference.
pub fn merge_properties() -> Outcome {
    let mut r = rng(16);
    for case in 0..30 {
        let (h, w) = (r.gen_range(16..48), r.gen_range(16..48));
        let base = random_tensor(&mut r, &[h, w, 3]);
        let f = r.gen_range(1..=2);
        let o = r.gen_range(0..6);
        let grid = make_grid(base.dims(), f, o).map_err(|e| e.to_string())?;
        let set = extract(&base, &grid).map_err(|e| e.to_string())?;
        let chosen: Vec<usize> = (0..grid.len()).filter(|_| r.gen_bool(0.6)).collect();

        let same: Vec<_> = chosen
            .iter()
            .map(|&k| (k, set.patches[k].clone()))
            .collect();
        let merged = merge(&base, &same, &grid).map_err(|e| e.to_string())?;
        ensure!(merged == base, "case {case}: conservation fails");

        let fresh: Vec<_> = chosen
            .iter()
            .map(|&k| (k, random_tensor(&mut r, &grid.patch_dims(k))))
            .collect();
        let m1 = merge(&base, &fresh, &grid).map_err(|e| e.to_string())?;
        let m2 = merge(&base, &fresh, &grid).map_err(|e| e.to_string())?;
        ensure!(m1 == m2, "case {case}: merge is not repeatable");

        let regions = grid.patch_regions();
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut vals = Vec::new();
                    for (k, p) in &fresh {
                        let reg = &regions[*k];
                        if reg.contains(y, x) {
                            let local = [y - reg.rows.start, x - reg.cols.start, c];
                            vals.push(p.data()[offset(&local, p.dims())]);
                        }
                    }
                    let got = m1.data()[offset(&[y, x, c], &[h, w, 3])];
                    let want = if vals.is_empty() {
                        base.data()[offset(&[y, x, c], &[h, w, 3])]
                    } else {
                        kahan_sum(vals.iter().copied()) / vals.len() as f64
                    };
                    ensure!(
                        (got - want).abs() <= 1e-12,
                        "case {case} ({y},{x},{c}): {got} vs {want}"
                    );
                }
            }
        }
    }
    Ok(())
}

/// Two runs of the same experiment give identical CSV rows apart from
/// timing, and identical restored images.
pub fn csv_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut images = Vec::new();
    for (i, name) in ["first", "second"].iter().enumerate() {
        let path = dir.path().join(format!("{name}.png"));
        save_image(&synthetic_image(24, 20, i as u64), &path).map_err(|e| e.to_string())?;
        images.push(path);
    }
    let small = SolverConfig {
        max_iters: 30,
        ..SolverConfig::default()
    };
    let mut spec = ExperimentSpec {
        images,
        missing_ratios: vec![0.5],
        solvers: vec![SolverKind::TraceNorm, SolverKind::Tv2],
        modes: vec![Mode::Pure, Mode::C2f, Mode::Shortcut],
        mask_seed: 4,
        ..ExperimentSpec::default()
    };
    spec.plan.stages = 2;
    spec.plan.overlap = vec![2];
    spec.solver_config.insert("tracenorm".into(), small.clone());
    spec.solver_config.insert("tv2".into(), small);

    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        spec.output_dir = dir.path().join(run);
        let report = run_experiment(&spec).map_err(|e| e.to_string())?;
        ensure!(
            report.rows.len() == 12,
            "expected 12 rows, got {}",
            report.rows.len()
        );
        ensure!(
            report.rows.iter().all(|r| r.status == "ok"),
            "a cell failed"
        );
        let csv =
            fs::read_to_string(spec.output_dir.join("results.csv")).map_err(|e| e.to_string())?;
        let stripped: Vec<String> = csv
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                if f.len() > 6 {
                    f.remove(6);
                }
                f.join(",")
            })
            .collect();
        let image = fs::read(
            spec.output_dir
                .join("images")
                .join("first_r0.5_tv2_c2f.png"),
        )
        .map_err(|e| e.to_string())?;
        outputs.push((stripped, image));
    }
    ensure!(outputs[0].0 == outputs[1].0, "CSV rows differ between runs");
    ensure!(
        outputs[0].1 == outputs[1].1,
        "restored images differ between runs"
    );
    Ok(())
}

/// Threshold schedule against direct evaluation on 50 random vectors, every
/// fifth with no replacements, plus the worked examples.
pub fn epsilon_schedule() -> Outcome {
    let mut r = rng(17);
    let mut fallbacks = 0;
    for case in 0..50 {
        let n = r.gen_range(1..40);
        let gaps: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..0.8)).collect();
        let flags: Vec<bool> = if case % 5 == 0 {
            vec![false; n]
        } else {
            (0..n).map(|_| r.gen_bool(0.4)).collect()
        };
        let stage = 1 + case % 3;
        let prev = r.gen_range(0.05..0.5);
        let got = update_epsilon(stage, &gaps, &flags, prev).map_err(|e| e.to_string())?;
        let want = epsilon_reference(stage, &gaps, &flags, prev);
        ensure!(
            got.to_bits() == want.to_bits(),
            "case {case} stage {stage}: {got} vs {want}"
        );
        if stage >= 2 && !flags.contains(&true) {
            ensure!(got == prev, "case {case}: fallback not taken");
            fallbacks += 1;
        }
    }
    ensure!(fallbacks > 0, "fallback path never exercised");
    let e =
        update_epsilon(1, &[0.1, 0.2, 0.05, 0.12], &[false; 4], 0.15).map_err(|e| e.to_string())?;
    ensure!((e - 0.3).abs() < 1e-15, "first example gives {e}");
    let e = update_epsilon(2, &[0.4, 0.1], &[false, true], 0.3).map_err(|e| e.to_string())?;
    ensure!((e - 0.15).abs() < 1e-15, "second example gives {e}");
    ensure!(
        update_epsilon(2, &[0.4], &[false, true], 0.3).is_err(),
        "length mismatch accepted"
    );
    Ok(())
}

/// Trace-norm completion of a 20x20x20 rank-(2,2,2) tensor from half its
/// entries. Returns the RSE reached, the iteration count and the estimate.
pub fn synthetic_recovery() -> Result<(f64, usize, DenseTensor), String> {
    let mut r = rng(18);
    let truth = random_tucker(&mut r, &[20, 20, 20], &[2, 2, 2]);
    let omega =
        generate_mask(truth.dims(), 0.5, 19, MaskMode::PerEntry).map_err(|e| e.to_string())?;
    let y = omega.observed_or_zero(&truth).map_err(|e| e.to_string())?;
    let out = SolverKind::TraceNorm
        .solver()
        .complete(&y, &omega, &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    let diff: Vec<f64> = out
        .restored
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| a - b)
        .collect();
    Ok((
        frob(&diff) / frob(truth.data()),
        out.iterations,
        out.restored,
    ))
}
