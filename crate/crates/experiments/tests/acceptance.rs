//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.
//!
//! `cargo test -p mtem-cli --test acceptance`

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mtem_experiments::ExperimentConfig;
use mtem_core::analysis::{
    check_diffusion_growth, check_khasminskii, check_monotonicity_condition, empirical_moment_sup,
    strong_error_at_t, strong_error_sup, ErrorKind, ErrorStudy, MomentStudy, Reference,
};
use mtem_core::builtins::{
    derive_example1, derive_example2, example1, example2, linear, wide_policy, Builtin,
    RadiusConstruction, GRID_POINTS,
};
use mtem_core::integrators::run_with_increments;
use mtem_core::truncation::{check_step_admissible, check_truncated_khasminskii, check_truncated_lipschitz};
use mtem_core::{DyadicPathLadder, Scheme};
use rand::{rngs::StdRng, Rng, SeedableRng};

const SAMPLES: usize = 100_000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn example1_builtin() -> Builtin {
    example1(1.0, 0.5, 2.0, &derive_example1(1.0, GRID_POINTS)).unwrap()
}

fn example2_builtin(radius: RadiusConstruction, epsilon: f64) -> Builtin {
    example2(epsilon, 1.0, radius, &derive_example2(6.0, 1e3, GRID_POINTS)).unwrap()
}

/// Largest dyadic steps `2^-j` meeting `|f(0)| <= h(Δ)` and `L_{h(Δ)} >= 1`:
/// the first such level and the one eight levels finer.
fn admissible_steps(b: &Builtin) -> Vec<f64> {
    let first = (1..=40)
        .map(|j| 2f64.powi(-j))
        .find(|&delta| {
            let a = check_step_admissible(&b.problem, &b.policy, &b.conditions, delta).unwrap();
            a.f0_within_radius.pass && a.lipschitz_at_least_one.pass
        })
        .expect("some admissible step");
    vec![first, first / 256.0]
}

fn builtins_for_conditions() -> [(&'static str, Builtin); 2] {
    [
        ("example1", example1_builtin()),
        ("example2", example2_builtin(RadiusConstruction::ProfileInverse, 0.5)),
    ]
}

fn truncation_lipschitz() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, b) in builtins_for_conditions() {
        for (i, delta) in admissible_steps(&b).into_iter().enumerate() {
            let r = check_truncated_lipschitz(&b.problem, &b.policy, delta, SAMPLES, 100 + i as u64).unwrap();
            worst = worst.max(r.drift_ratio).max(r.diffusion_ratio);
            parts.push(format!("{name} D=2^{} ratio {:.6}", delta.log2(), r.drift_ratio.max(r.diffusion_ratio)));
        }
    }
    verdict(worst <= 1.0 + 1e-9, parts.join("; "))
}

fn truncated_khasminskii() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, b) in builtins_for_conditions() {
        for (i, delta) in admissible_steps(&b).into_iter().enumerate() {
            let r = check_truncated_khasminskii(&b.problem, &b.policy, &b.conditions, delta, SAMPLES, 200 + i as u64)
                .unwrap();
            worst = worst.max(r.worst);
            parts.push(format!("{name} D=2^{} margin {:.6}", delta.log2(), r.worst));
        }
    }
    verdict(worst <= 1.0, parts.join("; "))
}

fn condition_margins() -> Verdict {
    let ex1 = example1_builtin();
    let ex2 = example2_builtin(RadiusConstruction::ProfileInverse, 0.5);
    let radius = 50.0;
    let margins = [
        ("ex1 monotonicity", check_monotonicity_condition(&ex1.problem, &ex1.conditions, SAMPLES, radius, 1).unwrap()),
        ("ex1 Khasminskii", check_khasminskii(&ex1.problem, &ex1.conditions, SAMPLES, radius, 2).unwrap()),
        ("ex2 monotonicity", check_monotonicity_condition(&ex2.problem, &ex2.conditions, SAMPLES, radius, 3).unwrap()),
        ("ex2 Khasminskii", check_khasminskii(&ex2.problem, &ex2.conditions, SAMPLES, radius, 4).unwrap()),
        ("ex2 diffusion growth", check_diffusion_growth(&ex2.problem, &ex2.conditions, SAMPLES, radius, 5).unwrap()),
    ];
    let pass = margins.iter().all(|(_, m)| m.holds());
    let detail = margins
        .iter()
        .map(|(n, m)| format!("{n} {:.6}", m.worst))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(
        pass,
        format!("H1 = {:.6}, K1 = {:.6}, K2 = {:.6}; {detail}", ex1.conditions.h, ex1.conditions.k, ex2.conditions.k),
    )
}

fn ladder_exactness() -> Verdict {
    let mut rng = StdRng::seed_from_u64(4);
    let mut failures = 0;
    let mut deepest = 0;
    for _ in 0..100 {
        let finest = rng.random_range(1..=20u32);
        let m = rng.random_range(1..=2usize);
        deepest = deepest.max(finest);
        let ladder = DyadicPathLadder::generate(rng.random_range(0.25..4.0), finest, m, rng.random(), rng.random_range(0..1u64 << 48)).unwrap();
        let mut fine = ladder.increments().to_vec();
        for level in (0..finest).rev() {
            let coarse = ladder.coarsen(level).unwrap();
            let paired: Vec<f64> = fine
                .chunks_exact(2 * m)
                .flat_map(|pair| (0..m).map(move |c| pair[c] + pair[m + c]))
                .collect();
            if paired.iter().zip(&coarse).any(|(a, b)| a.to_bits() != b.to_bits()) {
                failures += 1;
            }
            fine = coarse;
        }
        let total = ladder.bridge_value(ladder.t_end()).unwrap();
        if total.iter().zip(&fine).any(|(a, b)| a.to_bits() != b.to_bits()) {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("100 ladders up to level {deepest}, {failures} mismatches"))
}

fn linear_oracle() -> Verdict {
    let (problem, exact) = linear(0.5, 0.3, 1.0).unwrap();
    let policy = wide_policy();
    let level = 10;
    let delta = 2f64.powi(-(level as i32));
    let h = policy.h(delta).unwrap();
    let mut mismatched = 0;
    for r in 0..100 {
        let ladder = DyadicPathLadder::generate(1.0, level, 1, 31, r).unwrap();
        let mtem = run_with_increments(&problem, Scheme::Mtem, Some(h), delta, level, ladder.increments()).unwrap();
        let em = run_with_increments(&problem, Scheme::Em, None, delta, level, ladder.increments()).unwrap();
        let same = mtem.states().len() == em.states().len()
            && mtem.states().iter().zip(em.states()).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            mismatched += 1;
        }
    }
    let study = ErrorStudy {
        scheme: Scheme::Mtem,
        t_end: 1.0,
        levels: (4..=10).collect(),
        reference: Reference::ClosedForm(exact),
        finest_level: None,
        q: 2.0,
        replicates: 10_000,
        seed: 11,
    };
    let fit = strong_error_at_t(&problem, Some(&policy), &study).unwrap().fit(ErrorKind::Terminal).unwrap();
    verdict(
        mismatched == 0 && (fit.slope - 0.5).abs() <= 0.1,
        format!("h(2^-10) = {h:.3e}, {mismatched}/100 paths differ from EM; L2 slope {:.4}", fit.slope),
    )
}

fn example2_rate() -> Verdict {
    let mut config = ExperimentConfig::from_file(&workspace_root().join("configs/example2-rate.cfg")).unwrap();
    let out = tempfile::tempdir().unwrap();
    config.output.dir = out.path().to_path_buf();
    let outcome = mtem_experiments::run_experiment(&config).unwrap();
    let slope = |kind| outcome.fit(Scheme::Mtem, kind).and_then(|f| f.slope).unwrap_or(f64::NAN);
    let (t, sup, sup_step) = (slope(ErrorKind::Terminal), slope(ErrorKind::Sup), slope(ErrorKind::SupStep));
    let diverged: usize = outcome.ladders.iter().map(|l| l.total_diverged()).sum();
    let window = 0.35..=0.65;
    let rows = &outcome.ladders[0].rows;
    verdict(
        window.contains(&t) && window.contains(&sup) && sup_step < sup && diverged == 0,
        format!(
            "radius {}, {} replicates, levels {}..{}: slope T {t:.4}, sup {sup:.4}, sup step {sup_step:.4}, {diverged} diverged",
            config.radius.name(),
            config.replicates,
            rows[0].level,
            rows[rows.len() - 1].level
        ),
    )
}

/// The same ladder with the default radius construction; informational.
fn example2_rate_default_radius() -> String {
    let b = example2_builtin(RadiusConstruction::ProfileInverse, 0.5);
    let study = ErrorStudy {
        scheme: Scheme::Mtem,
        t_end: 1.0,
        levels: (6..=12).collect(),
        reference: Reference::FineGrid { level: 15 },
        finest_level: None,
        q: 4.0,
        replicates: 1000,
        seed: 20240611,
    };
    let ladder = strong_error_sup(&b.problem, Some(&b.policy), &study).unwrap();
    let s = |k| ladder.fit(k).map(|f| f.slope).unwrap_or(f64::NAN);
    format!(
        "remark21-inverse radius, 1000 replicates: slope T {:.4}, sup {:.4}, sup step {:.4}",
        s(ErrorKind::Terminal),
        s(ErrorKind::Sup),
        s(ErrorKind::SupStep)
    )
}

fn stability_contrast() -> Verdict {
    let b = example1_builtin();
    let study = MomentStudy {
        scheme: Scheme::Em,
        t_end: 1.0,
        levels: vec![6],
        finest_level: 10,
        p: 4.0,
        p_bar: b.conditions.sup_moment_exponent(),
        replicates: 1000,
        seed: 7,
    };
    let em = empirical_moment_sup(&b.problem, None, &study).unwrap();
    let mtem = empirical_moment_sup(
        &b.problem,
        Some(&b.policy),
        &MomentStudy {
            scheme: Scheme::Mtem,
            levels: (4..=10).collect(),
            ..study
        },
    )
    .unwrap();
    let em_diverged = em.total_diverged();
    let finite = mtem.rows.iter().all(|r| r.max_mean_moment.is_finite());
    let spread = mtem.pointwise_spread();
    let moments: Vec<String> = mtem.rows.iter().map(|r| format!("{:.2e}", r.max_mean_moment)).collect();
    verdict(
        em_diverged > 0 && mtem.total_diverged() == 0 && finite && spread < 2.0,
        format!(
            "EM diverged {em_diverged}/1000 at D=2^-6; MTEM diverged {}, max_k E|X_k|^4 over levels 4..10 [{}], ratio {spread:.3e}",
            mtem.total_diverged(),
            moments.join(", ")
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.cfg");
    std::fs::write(
        &config,
        "[problem]\nname = example2\nepsilon = 0.9\nh = sqrt-closed-form\n\
         [conditions]\nsamples = 5000\n\
         [run]\nschemes = mtem, em, tem\nlevels = 3..6\nreference = fine:9\nreplicates = 300\nseed = 77\n",
    )
    .unwrap();
    let run = |jobs: &str, out: &str| {
        let out = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_mtem"))
            .args(["--jobs", jobs, "run"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let outputs = [run("1", "a"), run("1", "b"), run("8", "c"), run("8", "d")];
    let files = ["error_ladder.csv", "rate_fit.json", "conditions.json", "divergence.csv"];
    let mut differing = Vec::new();
    for file in files {
        let first = std::fs::read(outputs[0].join(file)).unwrap();
        for o in &outputs[1..] {
            if std::fs::read(o.join(file)).unwrap() != first {
                differing.push(format!("{file} ({})", o.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            "4 runs (--jobs 1 twice, --jobs 8 twice), 4 files each, byte-identical".to_string()
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 8] = [
        ("truncation Lipschitz", Duration::from_secs(10), truncation_lipschitz),
        ("truncated Khasminskii", Duration::MAX, truncated_khasminskii),
        ("condition margins", Duration::from_secs(30), condition_margins),
        ("ladder exactness", Duration::from_secs(5), ladder_exactness),
        ("linear oracle", Duration::from_secs(120), linear_oracle),
        ("example2 MTEM rate", Duration::from_secs(600), example2_rate),
        ("EM vs MTEM stability", Duration::from_secs(120), stability_contrast),
        ("determinism", Duration::MAX, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if *limit == Duration::MAX {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs())
        };
        println!(
            "criterion {} {}: {name} [{timing}] {}{}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            if in_time { "" } else { " (over time limit)" }
        );
        if i == 5 {
            println!("  info: {}", example2_rate_default_radius());
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
