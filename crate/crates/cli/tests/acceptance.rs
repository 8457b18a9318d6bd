//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the report is always printed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hflc_core::anfis::{
    evaluate_sse, fit_consequents, premise_gradient, TrainingConfig, TrainingSet, RIDGE,
};
use hflc_core::biped::{
    forward_kinematics, generate_reference_gait, BipedParams, GaitConfig, GaitCycle, JointState,
    Point,
};
use hflc_core::controller::{
    curve_from_csv, left_leg_specs, sse_curve, train_assembly, AssemblyOptions, ControllerId,
    CurveRow, HflcAssembly, RightLegData, Surface,
};
use hflc_core::fuzzy::{FuzzyLogicUnit, Interval, LinguisticVariable, MembershipFunction, MfKind};
use hflc_core::hierarchy::{build_jellali, train_hierarchy, IntermediateTemplate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

// ---------------------------------------------------------------------------
// Oracles, written independently of the library's inference code.
// ---------------------------------------------------------------------------

fn oracle_degree(kind: MfKind, p: &[f64], x: f64) -> f64 {
    match kind {
        MfKind::Gaussian => (-(x - p[0]).powi(2) / (2.0 * p[1] * p[1])).exp(),
        MfKind::GeneralizedBell => 1.0 / (1.0 + ((x - p[2]) / p[0]).abs().powf(2.0 * p[1])),
        MfKind::Triangular => unreachable!("only smooth terms are used here"),
    }
}

/// Normalised firing strengths times `[x, 1]` for every rule.
fn oracle_row(flu: &FuzzyLogicUnit, premises: &[f64], x: &[f64]) -> Vec<f64> {
    // premise vector is laid out variable by variable, term by term
    let mut offsets = Vec::new();
    let mut o = 0;
    for v in flu.inputs() {
        let mut per_term = Vec::new();
        for t in v.terms() {
            per_term.push((t.kind(), o));
            o += t.kind().param_count();
        }
        offsets.push(per_term);
    }
    let w: Vec<f64> = flu
        .rules()
        .iter()
        .map(|r| {
            r.antecedent
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let (kind, o) = offsets[i][t];
                    oracle_degree(kind, &premises[o..o + kind.param_count()], x[i])
                })
                .product()
        })
        .collect();
    let s: f64 = w.iter().sum();
    let mut row = Vec::new();
    for wk in &w {
        row.extend(x.iter().map(|xi| wk / s * xi));
        row.push(wk / s);
    }
    row
}

fn oracle_sse(flu: &FuzzyLogicUnit, premises: &[f64], theta: &[f64], data: &TrainingSet) -> f64 {
    data.rows()
        .map(|(x, t)| {
            let row = oracle_row(flu, premises, x);
            let y: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
            (y - t).powi(2)
        })
        .sum()
}

/// Damped normal equations by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn oracle_lse(rows: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
    let n = rows[0].len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (row, &t) in rows.iter().zip(y) {
        for i in 0..n {
            for j in 0..n {
                m[i][j] += row[i] * row[j];
            }
            m[i][n] += row[i] * t;
        }
    }
    for (i, r) in m.iter_mut().enumerate() {
        r[i] += ridge;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Knee and ankle positions from explicit trigonometry.
fn oracle_fk(p: &BipedParams, q: &JointState) -> [(f64, f64); 4] {
    let (hx, hy) = (q.hip.x, q.hip.y);
    let kl = (
        hx + p.thigh * q.beta_left.sin(),
        hy - p.thigh * q.beta_left.cos(),
    );
    let kr = (
        hx + p.thigh * q.beta_right.sin(),
        hy - p.thigh * q.beta_right.cos(),
    );
    [
        kl,
        (
            kl.0 + p.shank * q.gamma_left.sin(),
            kl.1 - p.shank * q.gamma_left.cos(),
        ),
        kr,
        (
            kr.0 + p.shank * q.gamma_right.sin(),
            kr.1 - p.shank * q.gamma_right.cos(),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn hflc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hflc"))
        .args(args)
        .output()
        .expect("spawn hflc")
}

fn printed_count(stdout: &str, key: &str) -> Option<u64> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .and_then(|v| v.trim().parse().ok())
}

fn rule_economy() -> Outcome {
    let t = Instant::now();
    let out = hflc(&["count-rules", "-n", "7", "-m", "3"]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    ensure(out.status.success(), || format!("exit {:?}", out.status))?;
    ensure(printed_count(&text, "flat") == Some(2187), || {
        format!("flat: {text}")
    })?;
    ensure(printed_count(&text, "jellali") == Some(54), || {
        format!("jellali: {text}")
    })?;
    for n in 2..=12u64 {
        let n_s = n.to_string();
        let out = hflc(&[
            "count-rules",
            "-n",
            &n_s,
            "-m",
            "3",
            "--topology",
            "jellali",
        ]);
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        ensure(printed_count(&text, "jellali") == Some((n - 1) * 9), || {
            format!("n={n}: {text}")
        })?;
    }
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "flat 2187, jellali 54; (n-1)*9 for n=2..12 in {:?}",
        t.elapsed()
    ))
}

fn random_smooth_unit(rng: &mut ChaCha8Rng) -> (FuzzyLogicUnit, TrainingSet) {
    let n = rng.gen_range(1..=3);
    let kind = if rng.gen_bool(0.5) {
        MfKind::Gaussian
    } else {
        MfKind::GeneralizedBell
    };
    let vars = (0..n)
        .map(|i| {
            let terms = (0..rng.gen_range(2..=3))
                .map(|j| {
                    let c = rng.gen_range(-1.0..1.0);
                    match kind {
                        MfKind::Gaussian => MembershipFunction::gaussian(
                            format!("t{j}"),
                            c,
                            rng.gen_range(0.3..1.0),
                        ),
                        _ => MembershipFunction::bell(
                            format!("t{j}"),
                            rng.gen_range(0.3..1.0),
                            rng.gen_range(1.0..3.0),
                            c,
                        ),
                    }
                    .unwrap()
                })
                .collect();
            LinguisticVariable::new(format!("x{i}"), Interval::new(-1.0, 1.0).unwrap(), terms)
                .unwrap()
        })
        .collect();
    let mut flu = FuzzyLogicUnit::grid(vars).unwrap();
    let c: Vec<f64> = (0..flu.rule_count() * (n + 1))
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    flu.set_consequent_params(&c).unwrap();
    let rows = (0..rng.gen_range(5..15))
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = x.iter().map(|v| (2.0 * v).cos()).sum::<f64>();
            (x, t)
        })
        .collect();
    (flu, TrainingSet::new(rows).unwrap())
}

fn gradient_correctness() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let (flu, data) = random_smooth_unit(&mut rng);
        let g = premise_gradient(&flu, &data).map_err(|e| e.to_string())?;
        let p = flu.premise_params();
        let theta = flu.consequent_params();
        for i in 0..p.len() {
            let (mut up, mut dn) = (p.clone(), p.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (oracle_sse(&flu, &up, &theta, &data) - oracle_sse(&flu, &dn, &theta, &data))
                / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            ensure(rel <= 1e-4, || {
                format!("instance {inst} coord {i}: analytic {} vs fd {fd}", g[i])
            })?;
        }
    }
    within(t.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "worst relative error {worst:.2e} over 20 instances in {:?}",
        t.elapsed()
    ))
}

fn lse_exactness() -> Outcome {
    let t = Instant::now();
    let u = Interval::new(0.0, 1.0).unwrap();
    let vars = (0..2)
        .map(|i| LinguisticVariable::grid(format!("x{i}"), u, 3, MfKind::GeneralizedBell).unwrap())
        .collect();
    let mut flu = FuzzyLogicUnit::grid(vars).unwrap();
    let pts: Vec<Vec<f64>> = (0..7)
        .flat_map(|i| (0..7).map(move |j| vec![i as f64 / 6.0, j as f64 / 6.0]))
        .collect();
    let data = TrainingSet::from_fn(pts, |x| 1.5 * x[0] - 0.75 * x[1] + 0.25).unwrap();
    fit_consequents(&mut flu, &data).map_err(|e| e.to_string())?;
    let sse = evaluate_sse(&flu, &data).map_err(|e| e.to_string())?;
    let premises = flu.premise_params();
    let rows: Vec<Vec<f64>> = data
        .rows()
        .map(|(x, _)| oracle_row(&flu, &premises, x))
        .collect();
    let theta = oracle_lse(&rows, data.targets(), RIDGE);
    let oracle = oracle_sse(&flu, &premises, &theta, &data);
    ensure(sse <= 1e-8, || format!("library SSE {sse:e}"))?;
    ensure(oracle <= 1e-8, || format!("oracle SSE {oracle:e}"))?;
    let max_gap = data
        .rows()
        .map(|(x, _)| {
            let row = oracle_row(&flu, &premises, x);
            let y: f64 = row.iter().zip(&theta).map(|(a, b)| a * b).sum();
            (flu.infer(x).unwrap() - y).abs()
        })
        .fold(0.0, f64::max);
    ensure(max_gap <= 1e-6, || {
        format!("predictions differ from oracle by {max_gap:e}")
    })?;
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "SSE {sse:.2e} (oracle {oracle:.2e}), prediction gap {max_gap:.1e}"
    ))
}

fn fk_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let p = BipedParams::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut a = || rng.gen_range(-PI..PI);
        let q = JointState {
            hip: Point::new(a(), a()),
            torso: a(),
            beta_left: a(),
            gamma_left: a(),
            beta_right: a(),
            gamma_right: a(),
        };
        let f = forward_kinematics(&p, &q);
        let got = [f.knee_left, f.ankle_left, f.knee_right, f.ankle_right];
        for (g, o) in got.iter().zip(oracle_fk(&p, &q)) {
            worst = worst.max((g.x - o.0).abs()).max((g.y - o.1).abs());
        }
    }
    ensure(worst <= 1e-9, || {
        format!("FK differs from oracle by {worst:e}")
    })?;
    let g = default_gait();
    for fr in &g.frames {
        let k = &fr.kin;
        for (a, b, len) in [
            (k.hip, k.knee_left, p.thigh),
            (k.knee_left, k.ankle_left, p.shank),
            (k.hip, k.knee_right, p.thigh),
            (k.knee_right, k.ankle_right, p.shank),
        ] {
            ensure((a.dist(b) - len).abs() <= 1e-9 * len, || {
                format!("link length broken at phase {}", fr.phase)
            })?;
        }
    }
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "max deviation {worst:.1e}; links exact on {} frames",
        g.len()
    ))
}

fn default_gait() -> GaitCycle {
    generate_reference_gait(&BipedParams::default(), &GaitConfig::default()).unwrap()
}

const SIZES: [usize; 5] = [10, 30, 40, 60, 120];

fn hfl3_near_zero(curve: &[CurveRow]) -> Outcome {
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    for r in curve.iter().filter(|r| r.controller == ControllerId::Hfl3) {
        cells.push(format!("{}@{}={:.1e}", r.output, r.size, r.sse));
        if r.sse.is_nan() || r.sse > 1e-3 {
            failures.push(format!("{}@{} = {:.3e}", r.output, r.size, r.sse));
        }
    }
    if failures.is_empty() {
        Ok(cells.join(" "))
    } else {
        Err(format!(
            "above 1e-3: {}; all: {}",
            failures.join(", "),
            cells.join(" ")
        ))
    }
}

fn size_sanity(curve: &[CurveRow]) -> Outcome {
    let at = |c, o, n| {
        curve
            .iter()
            .find(|r| r.controller == c && r.output == o && r.size == n)
            .map(|r| r.sse)
    };
    let mut checked = 0;
    for r in curve.iter().filter(|r| r.size == 120) {
        let small = at(r.controller, r.output, 10).ok_or("missing size-10 row")?;
        ensure(r.sse <= small, || {
            format!(
                "{}/{}: {:.3e} at 120 > {small:.3e} at 10",
                r.controller, r.output, r.sse
            )
        })?;
        checked += 1;
    }
    ensure(checked == 12, || {
        format!("expected 12 units, saw {checked}")
    })?;
    Ok(format!("size-120 <= size-10 for all {checked} units"))
}

fn symmetry() -> Outcome {
    let g = default_gait();
    let opts = AssemblyOptions {
        right_leg: RightLegData::Mirrored { axis: 0.0 },
        ..Default::default()
    };
    let (a, _) = train_assembly(&g, 120, &opts).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = g.frame_at_phase(rng.gen_range(0.0..1.0));
        let fm = f.mirror_about(0.0);
        for spec in left_leg_specs() {
            for &o in &spec.outputs {
                let l = a.predict(spec.id, o, &f).map_err(|e| e.to_string())?;
                let r = a
                    .predict(spec.id.mirror(), o.swap_side(), &fm)
                    .map_err(|e| e.to_string())?;
                worst = worst.max((o.reflect_value(l, 0.0) - r).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("mirror mismatch {worst:e}"))?;
    Ok(format!(
        "max mirror mismatch {worst:.1e} over 100 frames x 6 outputs"
    ))
}

fn smooth_target(x: &[f64]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).cos() / 2.0 + 0.5
}

fn approximation() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pts: Vec<Vec<f64>> = (0..400)
        .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let data = TrainingSet::from_fn(pts, smooth_target).unwrap();
    let u = Interval::new(0.0, 1.0).unwrap();
    let vars: Vec<_> = (0..2)
        .map(|i| LinguisticVariable::grid(format!("x{i}"), u, 7, MfKind::GeneralizedBell).unwrap())
        .collect();
    let template = IntermediateTemplate {
        terms: 7,
        kind: MfKind::GeneralizedBell,
        universe: u,
    };
    let spec = build_jellali(&vars, &template).map_err(|e| e.to_string())?;
    let cfg = TrainingConfig {
        epochs: 50,
        terms: 7,
        ..Default::default()
    };
    let (trained, _) = train_hierarchy(&spec, &data, &cfg).map_err(|e| e.to_string())?;
    let grid: Vec<Vec<f64>> = (0..20)
        .flat_map(|i| (0..20).map(move |j| vec![i as f64 / 19.0, j as f64 / 19.0]))
        .collect();
    let test = TrainingSet::from_fn(grid, smooth_target).unwrap();
    let rmse = (evaluate_sse(&trained, &test).map_err(|e| e.to_string())? / 400.0).sqrt();
    ensure(rmse <= 0.05, || format!("RMSE {rmse:.4}"))?;
    within(t.elapsed(), Duration::from_secs(60))?;
    Ok(format!("RMSE {rmse:.4} on 20x20 grid in {:?}", t.elapsed()))
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let out = dir.to_str().unwrap();
    let steps: [&[&str]; 4] = [
        &["gait", "--out", out],
        &["train", "--out", out, "--seed", "0"],
        &["curve", "--out", out, "--seed", "0"],
        &[
            "surface",
            "--out",
            out,
            "--controller",
            "HFL1",
            "--output",
            "gamma_L",
            "--free",
            "x0,beta_L",
        ],
    ];
    for args in steps {
        let o = hflc(args);
        ensure(o.status.success(), || {
            format!(
                "`hflc {}` failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&o.stderr)
            )
        })?;
    }
    Ok(())
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    files
}

fn end_to_end() -> Outcome {
    let t = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(a.path())?;
    let first = t.elapsed();
    run_pipeline(b.path())?;
    let (fa, fb) = (read_tree(a.path()), read_tree(b.path()));
    ensure(fa == fb, || {
        let diff: Vec<_> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
        format!("reruns differ in {diff:?}")
    })?;
    let text = |name: &str| String::from_utf8(fa[name].clone()).map_err(|e| e.to_string());
    GaitCycle::frames_from_csv(&text("gait.csv")?, &BipedParams::default())
        .map_err(|e| e.to_string())?;
    let assembly = HflcAssembly::from_json(&text("assembly.json")?).map_err(|e| e.to_string())?;
    ensure(assembly.unit_count() == 12, || {
        format!("{} units in bundle", assembly.unit_count())
    })?;
    let curve = curve_from_csv(&text("curve.csv")?).map_err(|e| e.to_string())?;
    ensure(curve.len() == 12 * SIZES.len(), || {
        format!("{} curve rows", curve.len())
    })?;
    let surface =
        Surface::rows_from_csv(&text("surface_HFL1_gamma_L.csv")?).map_err(|e| e.to_string())?;
    ensure(surface.len() == 31 * 31, || {
        format!("{} surface rows", surface.len())
    })?;
    within(first, Duration::from_secs(300))?;
    Ok(format!(
        "{} files byte-identical across reruns; first run {first:?}",
        fa.len()
    ))
}

fn main() {
    let mut curve: Option<Vec<CurveRow>> = None;
    let mut curve_for = |f: fn(&[CurveRow]) -> Outcome| -> Outcome {
        if curve.is_none() {
            let opts = AssemblyOptions {
                parallel: true,
                ..Default::default()
            };
            curve = Some(sse_curve(&default_gait(), &SIZES, &opts).map_err(|e| e.to_string())?);
        }
        f(curve.as_deref().unwrap())
    };

    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let (tag, detail) = match &r {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} criterion {n} ({name}): {detail}");
        results.push((n, name, r));
    };

    run(1, "rule economy", &mut rule_economy);
    run(2, "gradient correctness", &mut gradient_correctness);
    run(3, "LSE exactness", &mut lse_exactness);
    run(4, "FK oracle equivalence", &mut fk_oracle);
    run(5, "HFL3 held-out SSE <= 1e-3", &mut || {
        curve_for(hfl3_near_zero)
    });
    run(6, "SSE size sanity", &mut || curve_for(size_sanity));
    run(7, "mirror symmetry", &mut symmetry);
    run(8, "approximation smoke", &mut approximation);
    run(9, "end-to-end pipeline", &mut end_to_end);

    let failed: Vec<usize> = results
        .iter()
        .filter(|r| r.2.is_err())
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (criteria {failed:?})")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
