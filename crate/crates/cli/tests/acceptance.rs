//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mimlearn::hermite::{center_and_normalize, gradient_outer_product, multi_indices, poly_eval, HermiteCoefficients};
use mimlearn::learner::GeneratorSource;
use mimlearn::models::{gaussian_point, random_intersection, random_mlc, random_orthonormal_rows};
use mimlearn::oracle::best_piecewise_error_exhaustive;
use mimlearn::partition::grid_radius;
use mimlearn::sq::{self, circulant_eigenvalues};
use mimlearn::subspace::dot;
use mimlearn::*;

const BIN: &str = env!("CARGO_BIN_EXE_mimlearn");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    o.detail = format!("{} [{:.2}s]", o.detail, elapsed.as_secs_f64());
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail = format!("{} exceeds {:.0}s limit", o.detail, limit.as_secs_f64());
        }
    }
    o
}

fn bin(args: &[&str]) -> (bool, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (out.status.success(), String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn moment_matching() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("H.json");
    let h = h.to_str().unwrap();
    let (ok, _) = bin(&["sq-build", "--kind", "rcn", "--k", "8", "--out", h]);
    let (ok2, d2) = bin(&["sq-verify", "--h", h, "--degree", "2", "--method", "quad"]);
    let (ok3, d3) = bin(&["sq-verify", "--h", h, "--degree", "3", "--method", "quad"]);
    let d2: f64 = d2.parse().unwrap_or(f64::NAN);
    let d3: f64 = d3.parse().unwrap_or(f64::NAN);
    outcome(ok && ok2 && ok3 && d2 <= 1e-9 && d3 > 1e-2, format!("degree 2 deviation {d2:.2e}, degree 3 deviation {d3:.2e}"))
}

fn circulant_kernel() -> Outcome {
    let mut worst_zero: f64 = 0.0;
    let mut smallest_live = f64::INFINITY;
    let mut pattern_ok = true;
    for k in [8usize, 12, 16] {
        let eig = circulant_eigenvalues(&sq::rcn_generator(k).unwrap());
        for (j, l) in eig.iter().enumerate() {
            let live = j == 0 || j == k / 2 - 1 || j == k / 2 + 1;
            if live {
                smallest_live = smallest_live.min(l.norm());
                pattern_ok &= l.norm() > 1e-10;
            } else {
                worst_zero = worst_zero.max(l.norm());
                pattern_ok &= l.norm() <= 1e-10;
            }
        }
    }
    outcome(pattern_ok, format!("max |λ| on kernel rates {worst_zero:.1e}, min |λ| elsewhere {smallest_live:.3}"))
}

fn contrastive() -> Outcome {
    let h = sq::build_contrastive_confusion_matrix(8).unwrap();
    let zero_diag = (0..8).all(|i| h.get(i, i) == 0.0);
    let min_off = h.min_off_diagonal();
    let row_err = h.entries().iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        zero_diag && min_off > 0.0 && row_err <= 1e-12,
        format!("zero diagonal {zero_diag}, min off-diagonal {min_off:.4}, row-sum error {row_err:.1e}"),
    )
}

fn gradient_identity() -> Outcome {
    let k = 3;
    let idx = multi_indices(k, 3);
    let n = 100_000u64;
    let h = 1e-4;
    let mut worst_mc: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    for trial in 0..20u64 {
        let coeffs = gaussian_point(4000 + trial, 0, idx.len());
        let raw = HermiteCoefficients::from_terms(k, 3, idx.iter().cloned().zip(coeffs)).unwrap();
        let p = center_and_normalize(&raw).unwrap();
        let m = gradient_outer_product(&p);
        for i in 0..k {
            let weighted: f64 = p.terms().map(|(a, c)| a.0[i] as f64 * c * c).sum();
            worst_diag = worst_diag.max((m[(i, i)] - weighted).abs());
        }
        let mut acc = vec![0.0; k * k];
        for s in 0..n {
            let x = gaussian_point(5000 + trial, s, k);
            let mut g = [0.0; 3];
            for (i, gi) in g.iter_mut().enumerate() {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[i] += h;
                dn[i] -= h;
                *gi = (poly_eval(&p, &up).unwrap() - poly_eval(&p, &dn).unwrap()) / (2.0 * h);
            }
            for i in 0..k {
                for j in 0..k {
                    acc[i * k + j] += g[i] * g[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                worst_mc = worst_mc.max((acc[i * k + j] / n as f64 - m[(i, j)]).abs());
            }
        }
    }
    outcome(
        worst_mc <= 5e-2 && worst_diag <= 1e-12,
        format!("max Monte-Carlo entry gap {worst_mc:.4}, max diagonal identity gap {worst_diag:.1e}"),
    )
}

fn first_moment_recovery() -> Outcome {
    let d = 5;
    let cfg = DirectionFinderConfig { sigma: 0.05, k_hint: 1, ..Default::default() };
    let mut aligned = 0;
    let mut empty = 0;
    let mut worst: f64 = 1.0;
    for seed in 0..10u64 {
        let w = random_orthonormal_rows(d, 1, seed, 0).remove(0);
        let c = Concept::Intersection(IntersectionOfHalfspaces::new(vec![w.clone()], vec![0.0]).unwrap());
        let ds = sample_dataset(&c, &NoiseSpec::None, 50_000, seed).unwrap();
        let set = mlc_direction_candidates(&ds, &SubspaceBasis::zero(d), &cfg).unwrap();
        if let Some(v) = set.vectors.first() {
            let cos = dot(v, &w).abs();
            worst = worst.min(cos);
            aligned += (cos >= 0.95) as usize;
        } else {
            worst = 0.0;
        }
        // Labels from a fresh coin per point: replace them with an independent concept on other data.
        let coins = sample_dataset(&c, &NoiseSpec::None, 50_000, seed + 1000).unwrap();
        let xs = sample_dataset(&c, &NoiseSpec::None, 50_000, seed + 2000).unwrap();
        let indep = LabeledDataset::new(d, 2, xs.features().to_vec(), coins.labels().to_vec()).unwrap();
        let set = mlc_direction_candidates(&indep, &SubspaceBasis::zero(d), &cfg).unwrap();
        empty += set.is_empty() as usize;
    }
    outcome(
        aligned == 10 && empty == 10,
        format!("aligned {aligned}/10 (worst |v·w| {worst:.4}), empty on independent labels {empty}/10"),
    )
}

fn second_moment_recovery() -> Outcome {
    let d = 5;
    let base = DirectionFinderConfig { sigma: 0.05, t_eig: Some(0.05), k_hint: 1, ..Default::default() };
    let mut aligned = 0;
    let mut empty = 0;
    let mut worst: f64 = 1.0;
    for seed in 0..10u64 {
        let w = random_orthonormal_rows(d, 1, seed, 0).remove(0);
        let c = Concept::Intersection(IntersectionOfHalfspaces::slab(&w, 1.0).unwrap());
        let ds = sample_dataset(&c, &NoiseSpec::None, 100_000, seed).unwrap();
        let v0 = SubspaceBasis::zero(d);
        let two = mim_direction_candidates(&ds, &v0, &DirectionFinderConfig { m: 2, ..base.clone() }).unwrap();
        match two.vectors.first() {
            Some(v) => {
                let cos = dot(v, &w).abs();
                worst = worst.min(cos);
                aligned += (cos >= 0.9) as usize;
            }
            None => worst = 0.0,
        }
        let one = mim_direction_candidates(&ds, &v0, &DirectionFinderConfig { m: 1, ..base.clone() }).unwrap();
        empty += one.is_empty() as usize;
    }
    outcome(
        aligned == 10 && empty == 10,
        format!("m=2 aligned {aligned}/10 (worst |v·w| {worst:.4}), m=1 empty {empty}/10"),
    )
}

fn potential_decrease() -> Outcome {
    let mut worst_slack = f64::INFINITY;
    let mut checked = 0;
    for config in 0..100u64 {
        let d = 6 + (config % 7) as usize;
        let k = 1 + (config % 3) as usize;
        let j = (config / 3 % k as u64) as usize;
        let rows = random_orthonormal_rows(d, k + j, 9000 + config, 0);
        let truth = SubspaceBasis::new(d, random_orthonormal_rows(d, k, 7000 + config, 1)).unwrap();
        let v = SubspaceBasis::new(d, rows[k..].to_vec()).unwrap();
        // Truth directions orthogonal to V: the null space of the k×j cross matrix in truth coordinates.
        let cross: Vec<Vec<f64>> = v.rows().iter().map(|r| truth.coords(r)).collect();
        let null = SubspaceBasis::from_span(k, &cross, 1e-9).unwrap().complement();
        let mut t = vec![0.0; d];
        for (c, row) in null.row(0).iter().zip(truth.rows()) {
            mimlearn::subspace::axpy(*c, row, &mut t);
        }
        let both = v.extended(truth.rows(), 1e-9).unwrap();
        let n = both.complement().row(0).to_vec();
        for b in 1..=9 {
            let beta = b as f64 / 10.0;
            let cand: Vec<f64> = t.iter().zip(&n).map(|(a, c)| beta * a + (1.0 - beta * beta).sqrt() * c).collect();
            let set = CandidateSet { vectors: vec![cand], eigenvalues: vec![1.0], ..Default::default() };
            let next = orthonormal_extend(&v, &set, 1e-9).unwrap();
            let drop = potential(&truth, &v) - potential(&truth, &next);
            worst_slack = worst_slack.min(drop - beta * beta);
            checked += 1;
        }
    }
    outcome(worst_slack >= -1e-10, format!("{checked} injections, min (ΔΦ − β²) = {worst_slack:.2e}"))
}

fn error_monotonicity() -> Outcome {
    let mut ok = 0;
    let mut aligned = 0;
    for inst in 0..50u64 {
        let d = 4 + (inst % 4) as usize;
        let kc = 1 + (inst % 2) as usize;
        let kf = kc + 1 + (inst % 2) as usize;
        let rows = random_orthonormal_rows(d, kf, 100 + inst, 0);
        let coarse_basis = SubspaceBasis::new(d, rows[..kc].to_vec()).unwrap();
        let fine_basis = SubspaceBasis::new(d, rows).unwrap();
        let eps = [0.3, 0.5, 0.7][(inst % 3) as usize];
        let radius = grid_radius(kf, eps);
        let coarse = ApproximatingPartition::with_grid(coarse_basis, eps, 0.25 * eps, radius, Boundary::Clamp).unwrap();
        let fine = ApproximatingPartition::with_grid(fine_basis, eps, 0.25 * eps, radius, Boundary::Clamp).unwrap();
        aligned += refine_alignment_check(&coarse, &fine) as usize;
        let concept = Concept::Mlc(random_mlc(3, d, 300 + inst).unwrap());
        let noise = NoiseSpec::Rcn { matrix: ConfusionMatrix::symmetric(3, 0.5).unwrap() };
        let ds = sample_dataset(&concept, &noise, 2_000, 500 + inst).unwrap();
        let e_coarse = zero_one_error(&fit_piecewise_constant(&coarse, &ds).unwrap(), &ds);
        let e_fine = zero_one_error(&fit_piecewise_constant(&fine, &ds).unwrap(), &ds);
        ok += (e_fine <= e_coarse) as usize;
    }
    outcome(ok == 50 && aligned == 50, format!("fine ≤ coarse on {ok}/50, aligned {aligned}/50"))
}

fn learner_cfg(mode: LearnerMode, finder: DirectionFinderConfig) -> LearnerConfig {
    LearnerConfig {
        mode,
        n_per_iter: 100_000,
        max_iters: Some(10),
        final_eps: Some(0.1),
        finder,
        ..Default::default()
    }
}

fn end_to_end(
    concepts: impl Fn(u64) -> Concept,
    noise: impl Fn(&Concept) -> NoiseSpec,
    cfg: &LearnerConfig,
    seeds: u64,
) -> Vec<(f64, usize, f64)> {
    (0..seeds)
        .map(|seed| {
            let concept = concepts(seed);
            let noise = noise(&concept);
            let mut src = GeneratorSource::new(concept.clone(), noise.clone(), seed).unwrap();
            let (clf, trace) = learn(&mut src, cfg).unwrap();
            let test = sample_dataset(&concept, &noise, 100_000, 10_000 + seed).unwrap();
            let last_potential = trace.records.last().and_then(|r| r.potential).unwrap_or(f64::NAN);
            (zero_one_error(&clf, &test), trace.final_dim(), last_potential)
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mlc_agnostic() -> Outcome {
    let cfg = learner_cfg(
        LearnerMode::MlcAgnostic,
        DirectionFinderConfig { cube_eps: 0.5, sigma: 0.05, k_hint: 2, ..Default::default() },
    );
    let runs = end_to_end(
        |s| Concept::Mlc(random_mlc(3, 10, s).unwrap()),
        |_| NoiseSpec::Adversarial { rate: 0.02, strategy: FlipStrategy::UniformFlip },
        &cfg,
        5,
    );
    let err = mean(runs.iter().map(|r| r.0));
    outcome(err <= 0.02 + 0.08, format!("mean test error {err:.4} vs OPT 0.02 + 0.08"))
}

fn rcn_end_to_end() -> Outcome {
    let cfg = LearnerConfig {
        max_iters: Some(4),
        ..learner_cfg(
            LearnerMode::MimRcn,
            DirectionFinderConfig { cube_eps: 0.5, sigma: 0.15, t_eig: Some(0.25), k_hint: 2, m: 1, ..Default::default() },
        )
    };
    let matrix = ConfusionMatrix::symmetric(3, 0.3).unwrap();
    let runs = end_to_end(
        |s| Concept::Mlc(random_mlc(3, 10, s).unwrap()),
        |_| NoiseSpec::Rcn { matrix: matrix.clone() },
        &cfg,
        5,
    );
    let err = mean(runs.iter().map(|r| r.0));
    let opt = mean((0..5u64).map(|s| {
        let c = Concept::Mlc(random_mlc(3, 10, s).unwrap());
        opt_of_rcn(&c, &matrix, 100_000, 20_000 + s).unwrap().0
    }));
    let max_dim = runs.iter().map(|r| r.1).max().unwrap();
    outcome(
        err <= opt + 0.08 && max_dim <= 3,
        format!("mean test error {err:.4} vs OPT {opt:.4} + 0.08, max final dimension {max_dim}"),
    )
}

fn intersections() -> Outcome {
    let cfg = learner_cfg(
        LearnerMode::MimAgnostic,
        DirectionFinderConfig { cube_eps: 0.5, sigma: 0.1, t_eig: Some(0.25), k_hint: 2, m: 2, ..Default::default() },
    );
    let runs = end_to_end(
        |s| Concept::Intersection(random_intersection(2, 8, s).unwrap()),
        |_| NoiseSpec::Adversarial { rate: 0.02, strategy: FlipStrategy::UniformFlip },
        &cfg,
        5,
    );
    let err = mean(runs.iter().map(|r| r.0));
    outcome(err <= 0.1, format!("mean test error {err:.4} vs 0.1"))
}

fn iterative_beats_one_shot() -> Outcome {
    let finder = DirectionFinderConfig {
        cube_eps: 0.5,
        sigma: 0.2,
        t_eig: Some(0.25),
        k_hint: 2,
        m: 2,
        min_cube_factor: 10.0,
        ..Default::default()
    };
    let iterative = learner_cfg(LearnerMode::MimAgnostic, finder.clone());
    let one_shot = LearnerConfig { max_iters: Some(1), ..learner_cfg(LearnerMode::MimAgnostic, DirectionFinderConfig { m: 1, ..finder }) };
    let concept = |s| sq::build_appendix_f_instance(4, 10, s).unwrap();
    let it = end_to_end(concept, |_| NoiseSpec::None, &iterative, 5);
    let os = end_to_end(concept, |_| NoiseSpec::None, &one_shot, 5);
    let good_it = it.iter().filter(|r| r.2 < 0.1).count();
    let good_os = os.iter().filter(|r| r.2 >= 0.9).count();
    let fmt = |v: &[(f64, usize, f64)]| v.iter().map(|r| format!("{:.3}", r.2)).collect::<Vec<_>>().join(" ");
    outcome(
        good_it == 5 && good_os == 5,
        format!("iterative potentials [{}], one-shot potentials [{}]", fmt(&it), fmt(&os)),
    )
}

fn majority_optimality() -> Outcome {
    let mut matched = 0;
    let mut max_cubes = 0;
    for inst in 0..100u64 {
        let d = 3;
        let k = 1 + (inst % 2) as usize;
        let eps = if k == 1 { 0.5 } else { 0.9 };
        let basis = SubspaceBasis::new(d, random_orthonormal_rows(d, k, 800 + inst, 0)).unwrap();
        let partition = build_partition(basis, eps, 0.2 * eps).unwrap();
        let labels = 2 + (inst % 2) as usize;
        let concept = Concept::Mlc(random_mlc(labels, d, 900 + inst).unwrap());
        let noise = NoiseSpec::Rcn { matrix: ConfusionMatrix::symmetric(labels, 0.4).unwrap() };
        let n = 5 + (inst as usize * 7) % 200;
        let ds = sample_dataset(&concept, &noise, n, 1000 + inst).unwrap();
        let fit = zero_one_error(&fit_piecewise_constant(&partition, &ds).unwrap(), &ds);
        let best = best_piecewise_error_exhaustive(&partition, &ds).unwrap();
        max_cubes = max_cubes.max(partition.cube_count() as usize);
        matched += ((fit - best).abs() < 1e-15) as usize;
    }
    outcome(matched == 100, format!("matched {matched}/100 (at most {max_cubes} cubes)"))
}

fn partition_mass() -> Outcome {
    let n = 1_000_000u64;
    let mut all = true;
    let mut parts = Vec::new();
    for k in [1usize, 2, 4] {
        for eps in [0.25, 0.5] {
            let rows = (0..k).map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect()).collect();
            let p = build_partition(SubspaceBasis::new(k, rows).unwrap(), eps, 0.25 * eps).unwrap();
            let outside = (0..n).filter(|&i| p.locate(&gaussian_point(77 + k as u64, i, k)).is_none()).count();
            let mass = outside as f64 / n as f64;
            let bound = eps + 3.0 * (eps / n as f64).sqrt();
            all &= mass <= bound;
            parts.push(format!("k={k} ε={eps}: {mass:.4}"));
        }
    }
    outcome(all, parts.join(", "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"concept": {"kind": "random-mlc", "label_count": 3, "dim": 6},
            "noise": {"kind": "adversarial", "rate": 0.05},
            "learner": {"mode": "mim-agnostic", "n_per_iter": 20000, "max_iters": 4, "final_eps": 0.2,
                        "finder": {"cube_eps": 0.5, "sigma": 0.1, "t_eig": 0.25, "k_hint": 2}}}"#,
    )
    .unwrap();
    let run = |threads: &str, tag: &str| -> Option<Vec<u8>> {
        let out = dir.path().join(tag);
        let (ok, _) = bin(&[
            "--seed",
            "42",
            "--threads",
            threads,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "train",
        ]);
        ok.then(|| std::fs::read(Path::new(&out).join("trace.csv")).unwrap())
    };
    let traces: Vec<Option<Vec<u8>>> = vec![run("1", "a"), run("1", "b"), run("8", "c"), run("8", "d")];
    let same = traces.iter().all(|t| t.is_some() && t == &traces[0]);
    outcome(same, format!("4 runs (threads 1,1,8,8), identical traces {same}"))
}

fn main() {
    let criteria: Vec<(u32, &str, Option<u64>, fn() -> Outcome)> = vec![
        (1, "moment matching", Some(1), moment_matching),
        (2, "circulant kernel", Some(1), circulant_kernel),
        (3, "contrastive construction", None, contrastive),
        (4, "gradient identity", None, gradient_identity),
        (5, "first-moment direction recovery", Some(30), first_moment_recovery),
        (6, "second-moment direction recovery", Some(120), second_moment_recovery),
        (7, "potential decrease", None, potential_decrease),
        (8, "error monotonicity under refinement", None, error_monotonicity),
        (9, "end-to-end agnostic MLC", Some(300), mlc_agnostic),
        (10, "end-to-end RCN", Some(300), rcn_end_to_end),
        (11, "intersections", None, intersections),
        (12, "iterative beats one-shot", None, iterative_beats_one_shot),
        (13, "majority optimality", None, majority_optimality),
        (14, "partition mass", None, partition_mass),
        (15, "determinism", None, determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        if filter.as_ref().is_some_and(|s| !name.contains(s.as_str()) && *s != id.to_string()) {
            continue;
        }
        let o = timed(limit.map(Duration::from_secs), f);
        println!("acceptance {id:>2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
