use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdknlab::cdcheck::{
    estimate_omega_table, hierarchy_check, omega_to_big_omega, richardson, run_suite, sample_pairs, verify_cd,
    CdOptions, OmegaConfig, SamplerConfig, SuiteConfig,
};
use cdknlab::distortion::{sigma_kappa, sigma_kn, tau_kn};
use cdknlab::extended::{Finite, PositiveInfinity};
use cdknlab::geodesics::displacement_interpolate;
use cdknlab::ikrw::{convergence_experiment, SequenceSpec};
use cdknlab::measure::{
    legendre_entropy, optimal_test_function, renyi_entropy, renyi_from_masses, DiscreteMeasure,
};
use cdknlab::mmspace::{build_model_space, Grid1D, ModelSpec, PointedSpace1D};
use cdknlab::transport::{
    optimal_coupling_grid, optimal_coupling_lp, w2_quantile_1d, w2_spread, weighted_marginalization, Coupling,
    CostSpec, DistanceMatrix, LpOptions,
};
use cdknlab::Result;

const MODELS: [&str; 8] = [
    "cosh_n.json",
    "sinh_n.json",
    "power_n.json",
    "cos_n.json",
    "cauchy.json",
    "glued_cos_n.json",
    "glued_power_n.json",
    "glued_sinh_n.json",
];

const SEED: u64 = 20240917;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn model(name: &str) -> Result<ModelSpec> {
    ModelSpec::from_json(&std::fs::read_to_string(data(name))?)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn lebesgue(a: f64, b: f64, n: usize) -> Result<PointedSpace1D> {
    let g = Arc::new(Grid1D::uniform(a, b, n)?);
    PointedSpace1D::new(g, vec![Finite(1.0); n], vec![], 0.5 * (a + b), 0)
}

fn c1() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let t = i as f64 / 9.0;
        for j in 0..10 {
            let theta = 0.5 * j as f64;
            for l in 0..10 {
                let n = -0.25 - 0.75 * l as f64;
                for v in [sigma_kn(0.0, n, t, theta)?, tau_kn(0.0, n, t, theta)?] {
                    match v {
                        Finite(x) => worst = worst.max((x - t).abs()),
                        PositiveInfinity => worst = f64::INFINITY,
                    }
                }
            }
        }
    }
    let mut threshold_errors = 0;
    let mut monotone_errors = 0;
    let kappas: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
    for i in 0..10 {
        let t = i as f64 / 9.0;
        for j in 0..25 {
            let theta = 0.13 * j as f64;
            let mut prev = f64::NEG_INFINITY;
            for &kappa in &kappas {
                let s = sigma_kappa(kappa, t, theta)?;
                if s.is_infinite() != (kappa * theta * theta >= PI * PI) {
                    threshold_errors += 1;
                }
                let v = s.to_f64();
                if v < prev - 1e-15 * v.abs().max(1.0) {
                    monotone_errors += 1;
                }
                prev = v;
            }
        }
        for kappa in [0.5, 1.0, 2.0, 4.0] {
            if !sigma_kappa(kappa, t, PI / kappa.sqrt())?.is_infinite() {
                threshold_errors += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12 && threshold_errors == 0 && monotone_errors == 0,
        format!("max |σ−t|,|τ−t| = {worst:.1e}, threshold errors {threshold_errors}, monotonicity errors {monotone_errors}"),
    )
}

fn random_grid_measure(rng: &mut ChaCha8Rng, grid: &Arc<Grid1D>, max_atoms: usize) -> Result<DiscreteMeasure> {
    let mut m = vec![0.0; grid.len()];
    for _ in 0..rng.gen_range(1..=max_atoms) {
        m[rng.gen_range(0..grid.len())] += rng.gen_range(0.01..1.0);
    }
    let total: f64 = m.iter().sum();
    DiscreteMeasure::new(grid.clone(), m.into_iter().map(|x| x / total).collect())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn c2() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let opts = LpOptions::default();
    let mut worst_quantile = 0.0f64;
    for _ in 0..200 {
        let cells = rng.gen_range(2..=64);
        let grid = Arc::new(Grid1D::uniform(rng.gen_range(-3.0..0.0), rng.gen_range(0.5..3.0), cells)?);
        let mu = random_grid_measure(&mut rng, &grid, cells)?;
        let nu = random_grid_measure(&mut rng, &grid, cells)?;
        let (q, _) = w2_quantile_1d(&mu, &nu)?;
        let (_, lp) = optimal_coupling_grid(&mu, &nu, CostSpec::SquaredDistance, &opts)?;
        worst_quantile = worst_quantile.max(if q.max(lp) < 1e-300 { 0.0 } else { rel(q, lp) });
    }
    let mut worst_brute = 0.0f64;
    for inst in 0..50 {
        let n = rng.gen_range(1..=8);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cost = if inst % 2 == 0 { CostSpec::SquaredDistance } else { CostSpec::TANH };
        let d = DistanceMatrix::from_points(&xs, &ys);
        let w = vec![1.0 / n as f64; n];
        let (_, lp) = optimal_coupling_lp(&w, &w, cost, &d, &opts)?;
        let brute = permutations(n)
            .iter()
            .map(|p| (0..n).map(|i| cost.eval(d.get(i, p[i]))).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        worst_brute = worst_brute.max(if brute < 1e-300 { lp.abs() } else { rel(lp, brute) });
    }
    outcome(
        worst_quantile <= 1e-9 && worst_brute <= 1e-9,
        format!("quantile vs LP rel {worst_quantile:.1e} (200), LP vs permutations rel {worst_brute:.1e} (50)"),
    )
}

fn c3() -> Result<Outcome> {
    let s = lebesgue(0.0, 1.0, 256)?;
    let mu = DiscreteMeasure::new(s.grid().clone(), vec![1.0 / 256.0; 256])?;
    let r = verify_cd(&s, &mu, &mu, 0.0, -1.0, &CdOptions::standard(-1.0)?)?;
    let worst = r.rows.iter().map(|row| row.margin.abs()).fold(0.0, f64::max);
    outcome(r.rows.len() == 21 * 9 && worst <= 1e-10, format!("{} rows, max |margin| {worst:.1e}", r.rows.len()))
}

fn c4() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in MODELS {
        let spec = model(name)?;
        let (k, n) = spec.claimed_cd().expect("model with a claim");
        let coarse = build_model_space(&spec.with_grid_n(512))?;
        let fine = build_model_space(&spec.with_grid_n(1024))?;
        let r = richardson(&coarse, &fine, &SuiteConfig::new(k, n, 50, SEED))?;
        pass &= r.passes && r.min_margin_coarse >= -5e-2;
        parts.push(format!(
            "{} {:.1e}->{:.1e}{}",
            name.trim_end_matches(".json"),
            r.defect_coarse,
            r.defect_fine,
            if r.passes { "" } else { " !" }
        ));
    }
    outcome(pass, format!("defects 512->1024: {}", parts.join(", ")))
}

fn c5() -> Result<Outcome> {
    let spec = model("cos_n.json")?;
    let (k, n) = spec.claimed_cd().expect("cos_n claim");
    let space = build_model_space(&spec)?;
    let cfg = SuiteConfig { stop_on_violation: true, ..SuiteConfig::new(k + 2.0, n, 200, SEED) };
    let r = run_suite(&space, &cfg)?;
    outcome(
        r.summary.n_violated > 0,
        format!(
            "K = {} N = {}: {} violated rows within {} pairs, min margin {:.3}",
            k + 2.0,
            n,
            r.summary.n_violated,
            r.reports.len(),
            r.summary.min_margin
        ),
    )
}

fn c6() -> Result<Outcome> {
    let mut comparisons = 0;
    let mut failures = Vec::new();
    for name in MODELS {
        let spec = model(name)?;
        let (k, n) = spec.claimed_cd().expect("model with a claim");
        let space = build_model_space(&spec)?;
        let strong_opts = CdOptions::standard(n)?;
        let grid = strong_opts.nprime_grid.clone();
        let pairs = sample_pairs(&space, &SamplerConfig::default(), 20, SEED)?;
        for (a, b) in &pairs {
            let (mu0, mu1) = (a.discretize(&space)?, b.discretize(&space)?);
            let strong = verify_cd(&space, &mu0, &mu1, k, n, &strong_opts)?;
            let mut weak = vec![verify_cd(&space, &mu0, &mu1, k - 1.0, n, &strong_opts)?];
            for &np in &[grid[2], grid[4], grid[6]] {
                let opts = CdOptions { nprime_grid: grid.iter().copied().filter(|&g| g >= np).collect(), ..strong_opts.clone() };
                weak.push(verify_cd(&space, &mu0, &mu1, k, np, &opts)?);
            }
            for w in &weak {
                comparisons += 1;
                if !hierarchy_check(&strong, w)? {
                    failures.push(format!("{name} K={} N={}", w.k, w.n));
                }
            }
        }
    }
    outcome(failures.is_empty(), format!("{comparisons} comparisons, new violations: {failures:?}"))
}

fn c7() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let space = build_model_space(&model("cosh_n.json")?.with_grid_n(128))?;
    let (mut dual, mut above, mut scaling) = (0.0f64, 0usize, 0.0f64);
    for _ in 0..100 {
        let n = -rng.gen_range(0.2..6.0);
        let mu = random_grid_measure(&mut rng, space.grid(), 128)?;
        let s = renyi_entropy(&mu, &space, n)?.to_f64();
        let f_opt = optimal_test_function(&mu, &space, n)?;
        dual = dual.max(rel(legendre_entropy(&mu, &space, n, &[f_opt])?, s));
        for _ in 0..10 {
            let scale = rng.gen_range(0.1..10.0);
            let f: Vec<f64> = (0..space.len()).map(|_| rng.gen_range(-scale..scale)).collect();
            if legendre_entropy(&mu, &space, n, &[f])? > s + 1e-12 {
                above += 1;
            }
        }
        let c = rng.gen_range(0.1..10.0);
        let sc = renyi_entropy(&mu, &space.scaled(c)?, n)?.to_f64();
        scaling = scaling.max(rel(sc, c.powf(1.0 / n) * s));
    }
    outcome(
        dual <= 1e-9 && above == 0 && scaling <= 1e-12,
        format!("F* vs S rel {dual:.1e}, random F above S: {above}/1000, scaling rel {scaling:.1e}"),
    )
}

fn c8() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut strict = 0;
    for _ in 0..100 {
        let (na, nb) = (rng.gen_range(2..=40), rng.gen_range(2..=40));
        let mut entries = Vec::new();
        for i in 0..na {
            for j in 0..nb {
                if rng.gen_bool(0.3) {
                    entries.push((i, j, rng.gen_range(0.0..1.0)));
                }
            }
            entries.push((i, rng.gen_range(0..nb), rng.gen_range(0.01..1.0)));
        }
        let total: f64 = entries.iter().map(|e| e.2).sum();
        let entries: Vec<_> = entries.into_iter().map(|(i, j, m)| (i, j, m / total)).collect();
        let p = Coupling::new(na, nb, entries)?;
        let (ga, gb) = (Arc::new(Grid1D::uniform(0.0, 1.0, na)?), Arc::new(Grid1D::uniform(0.0, 1.0, nb)?));
        let ref_a = DiscreteMeasure::new(ga.clone(), p.source_marginal().to_vec())?;
        let mu = random_grid_measure(&mut rng, &ga, na)?;
        let pushed = weighted_marginalization(&p, &mu, &ref_a, gb)?;
        let n = -rng.gen_range(0.2..6.0);
        let sa = renyi_from_masses(mu.masses(), p.source_marginal(), n).to_f64();
        let sb = renyi_from_masses(pushed.masses(), p.target_marginal(), n).to_f64();
        worst = worst.max((sb - sa) / sa);
        if sb < sa * (1.0 - 1e-9) {
            strict += 1;
        }
        if sb > sa * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("violations {violations}/100, strict decrease {strict}/100, max (S_B − S_A)/S_A = {worst:.2e}"))
}

fn c9() -> Result<Outcome> {
    let space = build_model_space(&model("cosh_n.json")?.with_grid_n(1024))?;
    let out = space.refined(4);
    let pairs = sample_pairs(&space, &SamplerConfig::default(), 20, SEED)?;
    let mut worst = 0.0f64;
    for (a, b) in &pairs {
        let (mu0, mu1) = (a.discretize(&space)?, b.discretize(&space)?);
        let w = w2_spread(&mu0, &mu1)?;
        for t in [0.25, 0.5, 0.75] {
            let slice = displacement_interpolate(&mu0, &mu1, t, &out)?;
            let wt = w2_spread(&mu0, &slice.measure)?;
            worst = worst.max((wt - t * w).abs() / w);
        }
    }
    outcome(worst <= 1e-3, format!("max |W₂(μ₀,μ_t) − tW₂(μ₀,μ₁)|/W₂(μ₀,μ₁) = {worst:.1e} over 20 pairs"))
}

fn c10() -> Result<Outcome> {
    let mut spec = SequenceSpec::from_json(&std::fs::read_to_string(data("xN_trunc.json"))?)?;
    spec.samples = 0;
    let table = convergence_experiment(&spec)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, ok) in &table.extrinsic_monotone {
        let col: Vec<f64> = table.column(*k).iter().map(|r| r.extrinsic).collect();
        let last = *col.last().expect("nonempty column");
        pass &= *ok && last < 1e-2;
        parts.push(format!("k={k}: {:.2}->{:.2}{}", col[0], last, if *ok { "" } else { " (not decreasing)" }));
    }
    let all_inf = table.rows.iter().all(|r| r.hausdorff_gap.is_infinite());
    pass &= all_inf;
    let (_, limit) = spec.members()?;
    let (k, n) = spec.limit_claim(&limit);
    let coarse = build_model_space(&limit.with_grid_n(512))?;
    let fine = build_model_space(&limit.with_grid_n(1024))?;
    let r = richardson(&coarse, &fine, &SuiteConfig::new(k, n, 50, SEED))?;
    pass &= r.passes;
    outcome(
        pass,
        format!(
            "extrinsic gap {}; d_H = ∞ for every n: {all_inf}; limit CD({k},{n}) defects {:.1e}->{:.1e} pass {}",
            parts.join(", "),
            r.defect_coarse,
            r.defect_fine,
            r.passes
        ),
    )
}

fn c11() -> Result<Outcome> {
    let (k, h_max, m, n) = (1, 7, 10.0, -2.0);
    let hs: Vec<i32> = (k..=h_max).collect();
    let mm = 2f64.powf(1.0 - 1.0 / n) * m;
    let cfg = OmegaConfig::new(n, 50, SEED);
    let single = estimate_omega_table(&build_model_space(&model("cos_n.json")?)?, &[k], &hs, &[m], &cfg)?;
    let single_max = single.entries.iter().map(|e| e.value).fold(0.0, f64::max);
    let glued = estimate_omega_table(&build_model_space(&model("glued_cos_n.json")?)?, &[k], &hs, &[m, mm], &cfg)?;
    let column: Vec<f64> = hs.iter().map(|&h| glued.get(k, h, m).expect("entry").value).collect();
    let nonincreasing = column.windows(2).all(|w| w[1] <= w[0]);
    let last = *column.last().expect("nonempty");
    let delta = 0.01;
    let big = omega_to_big_omega(&glued, k, h_max, m, delta)? - 2.0 * delta;
    let one = omega_to_big_omega(&glued, k, h_max, m, 0.3)?;
    outcome(
        single_max <= 1e-3 && nonincreasing && last <= 0.05 && big <= 1e-2 && one == 1.0,
        format!(
            "cos_n max ω {single_max:.1e}; glued ω(h={k}..{h_max}) = {column:.3?}; Ω−2δ {big:.1e}; Ω(δ=0.3) = {one}"
        ),
    )
}

fn c12() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let space = data("glued_cos_n.json");
    let run = |tag: &str, args: &[&str]| -> Result<(i32, Vec<u8>, Vec<u8>)> {
        let out = dir.path().join(format!("{tag}.csv"));
        let mut argv: Vec<String> = vec!["cdknlab".into()];
        argv.extend(args.iter().map(|s| s.to_string()));
        argv.extend(["--space".into(), space.display().to_string(), "--out".into(), out.display().to_string()]);
        let code = cdknlab::cli::main_with_args(argv);
        let side = dir.path().join(format!("{tag}.summary.json"));
        Ok((code, std::fs::read(&out)?, std::fs::read(&side)?))
    };
    let cd = ["cdcheck", "--K", "-2", "--N", "-1", "--samples", "8", "--seed", "11"];
    let om = ["omega", "--N", "-2", "--k", "1", "--h-max", "4", "--M", "10", "--samples", "10", "--seed", "11"];
    let (a, b) = (run("cd_a", &cd)?, run("cd_b", &cd)?);
    let (c, d) = (run("om_a", &om)?, run("om_b", &om)?);
    let identical = a == b && c == d;
    outcome(
        identical && a.1.len() > 100,
        format!("cdcheck exit {} ({} bytes), omega exit {} ({} bytes), byte-identical {identical}", a.0, a.1.len(), c.0, c.1.len()),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "coefficient identities", Duration::from_secs(1), c1),
        (2, "transport oracle equivalence", Duration::from_secs(30), c2),
        (3, "trivial equality", Duration::from_secs(30), c3),
        (4, "model-space certification", Duration::from_secs(300), c4),
        (5, "negative control", Duration::from_secs(300), c5),
        (6, "hierarchy monotonicity", Duration::from_secs(300), c6),
        (7, "entropy duality", Duration::from_secs(30), c7),
        (8, "contraction", Duration::from_secs(30), c8),
        (9, "geodesic constant speed", Duration::from_secs(60), c9),
        (10, "stability evidence", Duration::from_secs(120), c10),
        (11, "omega behavior", Duration::from_secs(300), c11),
        (12, "determinism", Duration::from_secs(120), c12),
    ];
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.2}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
