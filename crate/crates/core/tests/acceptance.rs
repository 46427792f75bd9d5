//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use ons_unlearn::geometry::{eig_sym, project_ball_metric, SymMatrix};
use ons_unlearn::harness::{run_pair, run_sweep, ExperimentConfig, RunResult, SweepPlan};
use ons_unlearn::optim::{ModelKind, OnsParams, OnsState};
use ons_unlearn::stream::{gen_stream, loss_grad, loss_value, Environment, Observation, StreamConfig};
use ons_unlearn::unlearn::{delete_ons_standard, intervene, DeletionEvent, Intervention, INTERVENTION_FLOOR};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn gaussian(r: &mut Xoshiro256PlusPlus, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| r.sample(StandardNormal))
}

fn random_spd(r: &mut Xoshiro256PlusPlus, d: usize, eigen: &[f64]) -> SymMatrix {
    let q = DMatrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal)).qr().q();
    SymMatrix::from_upper(&q * DMatrix::from_diagonal(&DVector::from_column_slice(eigen)) * q.transpose()).unwrap()
}

fn brute_preconditioner(d: usize, lambda: f64, grads: impl Iterator<Item = DVector<f64>>) -> SymMatrix {
    let mut a = DMatrix::identity(d, d) * lambda;
    for g in grads {
        a += &g * g.transpose();
    }
    SymMatrix::from_upper(a).unwrap()
}

struct Sweep {
    runs: Vec<RunResult>,
    elapsed: Duration,
}

fn standard_sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let units = run_sweep(&SweepPlan::standard(), None).expect("default plan is valid");
        let runs = units.into_iter().map(|u| u.result.expect("default sweep runs cleanly")).collect();
        Sweep { runs, elapsed: start.elapsed() }
    })
}

fn select(model: ModelKind, env: Environment, label: Option<&str>) -> Vec<&'static RunResult> {
    standard_sweep()
        .runs
        .iter()
        .filter(|r| r.model() == model && r.environment() == env && label.is_none_or(|l| r.intervention_label() == l))
        .collect()
}

fn ons_labels() -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in select(ModelKind::Ons, Environment::Drifting, None) {
        if !labels.contains(&r.intervention_label()) {
            labels.push(r.intervention_label());
        }
    }
    labels
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn preconditioner_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let d = 2 + case % 2;
        let env = if case % 3 == 0 { Environment::Stationary } else { Environment::Drifting };
        let cfg = StreamConfig { dimension: d, horizon: 100, environment: env, seed: 1000 + case as u64, ..Default::default() };
        let params = OnsParams { eta: r.random_range(0.2..2.0), lambda: r.random_range(0.1..2.0), radius: 5.0 };
        let mut checkpoints: Vec<usize> = (0..10).map(|_| r.random_range(1..=100)).collect();
        checkpoints.sort_unstable();
        let mut ons = OnsState::new(d, params);
        for obs in gen_stream(&cfg).unwrap() {
            ons.step(&obs).unwrap();
            if checkpoints.contains(&obs.t) {
                let brute = brute_preconditioner(d, params.lambda, ons.grad_log.iter().map(|g| g.grad.clone()));
                worst = worst.max(ons.a.frobenius_distance(&brute));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("max |A_t - brute|_F = {worst:.2e}, {secs:.2} s");
    if worst <= 1e-8 && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn deletion_exactness() -> Verdict {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let d = 2 + case % 3;
        let horizon = r.random_range(30..120);
        let cfg = StreamConfig {
            dimension: d,
            horizon,
            environment: Environment::Drifting,
            noise_std: r.random_range(0.0..0.5),
            seed: 2000 + case as u64,
            ..Default::default()
        };
        let params = OnsParams { lambda: r.random_range(0.1..2.0), ..Default::default() };
        let mut ons = OnsState::new(d, params);
        for obs in gen_stream(&cfg).unwrap() {
            ons.step(&obs).unwrap();
        }
        let count = r.random_range(1..=horizon / 2);
        let mut deleted = std::collections::BTreeSet::new();
        while deleted.len() < count {
            deleted.insert(r.random_range(1..=horizon));
        }
        let event = DeletionEvent {
            tau: horizon,
            deleted_rounds: deleted,
            intervention: Intervention::None,
            correct_parameters: true,
        };
        let after = delete_ons_standard(&ons, &event).unwrap();
        let brute = brute_preconditioner(
            d,
            params.lambda,
            ons.grad_log.iter().filter(|g| !event.contains(g.round)).map(|g| g.grad.clone()),
        );
        // survivors keep every eigenvalue >= lambda, so the removal floor never binds
        assert!(eig_sym(&brute).unwrap().min() >= params.lambda * (1.0 - 1e-9));
        worst = worst.max(after.a.frobenius_distance(&brute));
    }
    let detail = format!("max |A_removed - brute|_F = {worst:.2e} over 50 cases");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spectral_contract() -> Verdict {
    let mut r = rng(303);
    let (mut worst_eig, mut worst_kappa) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let d = 2 + case % 4;
        let mut eigen: Vec<f64> = (0..d).map(|_| 10f64.powf(r.random_range(-2.5..1.5))).collect();
        eigen.sort_by(|a, b| b.total_cmp(a));
        let a = random_spd(&mut r, d, &eigen);
        let pre = eig_sym(&a).unwrap().eigenvalues;
        let alpha = r.random_range(0.05..1.0);
        let beta = r.random_range(0.05..0.95);

        let reset = eig_sym(&intervene(&a, &Intervention::PartialReset { alpha }).unwrap()).unwrap().eigenvalues;
        let decay_m = intervene(&a, &Intervention::Decay { beta }).unwrap();
        let decay = eig_sym(&decay_m).unwrap().eigenvalues;
        for k in 0..d {
            worst_eig = worst_eig.max((reset[k] - (pre[k] - alpha).max(INTERVENTION_FLOOR)).abs());
            worst_eig = worst_eig.max((decay[k] - ((1.0 - beta) * pre[k]).max(INTERVENTION_FLOOR)).abs());
        }
        if (1.0 - beta) * pre[d - 1] > INTERVENTION_FLOOR {
            let kappa_pre = pre[0] / pre[d - 1];
            let kappa_post = decay[0] / decay[d - 1];
            worst_kappa = worst_kappa.max((kappa_post - kappa_pre).abs() / kappa_pre);
        }
    }
    let detail = format!("max eigenvalue error {worst_eig:.2e}, max relative kappa drift {worst_kappa:.2e}");
    if worst_eig <= 1e-8 && worst_kappa <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn shock_invariance() -> Verdict {
    let sweep = standard_sweep();
    let labels = ons_labels();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let shocks: Vec<f64> = select(ModelKind::Ons, Environment::Drifting, None)
            .into_iter()
            .filter(|r| r.seed == seed)
            .map(|r| r.outcome.unwrap().param_shock)
            .collect();
        if shocks.len() != 7 {
            return Err(format!("seed {seed} has {} ONS treatments, expected 7", shocks.len()));
        }
        let (lo, hi) = shocks.iter().fold((f64::MAX, f64::MIN), |(a, b), &s| (a.min(s), b.max(s)));
        worst = worst.max(hi - lo);
    }
    let secs = sweep.elapsed.as_secs_f64();
    let detail = format!("{} treatments, max per-seed spread {worst:.2e}, sweep {secs:.1} s", labels.len());
    if worst <= 1e-12 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ogd_ordering() -> Verdict {
    let rec = |env| mean(select(ModelKind::Ogd, env, None).iter().map(|r| r.outcome.unwrap().recovery.rounds as f64));
    let (stat, drift) = (rec(Environment::Stationary), rec(Environment::Drifting));
    let secs = standard_sweep().elapsed.as_secs_f64();
    let detail = format!("mean recovery stationary {stat:.2} vs drifting {drift:.2} (band [30, 160]), sweep {secs:.1} s");
    if stat < drift && (30.0..=160.0).contains(&drift) && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ons_recovery() -> Verdict {
    let means: Vec<(String, f64)> = ons_labels()
        .into_iter()
        .map(|l| {
            let m = mean(
                select(ModelKind::Ons, Environment::Drifting, Some(&l))
                    .iter()
                    .map(|r| r.outcome.unwrap().recovery.rounds as f64),
            );
            (l, m)
        })
        .collect();
    let worst = means.iter().map(|(_, m)| *m).fold(f64::MIN, f64::max);
    let listing: Vec<String> = means.iter().map(|(l, m)| format!("{l} {m:.2}")).collect();
    let detail = format!("mean recovery per treatment: {}", listing.join(", "));
    if worst <= 2.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn stationary_conditioning() -> Verdict {
    let cfg = ExperimentConfig {
        stream: StreamConfig { environment: Environment::Stationary, ..Default::default() },
        model: ModelKind::Ons,
        event: None,
        ..Default::default()
    };
    let kappas: Vec<f64> = (0..20u64)
        .map(|seed| run_pair(&cfg, seed).unwrap().records.last().unwrap().cond_a.unwrap())
        .collect();
    let worst = kappas.iter().cloned().fold(f64::MIN, f64::max);
    let detail = format!("max kappa(A_T) over 20 seeds {worst:.3}, mean {:.3} (bound 1.2)", mean(kappas.iter().cloned()));
    if kappas.iter().all(|k| (1.0..=1.2).contains(k)) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn twin_purity() -> Verdict {
    let (mut track, mut cos) = (0.0f64, 0.0f64);
    for model in [ModelKind::Ogd, ModelKind::Ons] {
        for env in [Environment::Stationary, Environment::Drifting] {
            let cfg = ExperimentConfig {
                stream: StreamConfig { environment: env, ..Default::default() },
                model,
                event: None,
                ..Default::default()
            };
            for seed in 0..20u64 {
                for rec in run_pair(&cfg, seed).unwrap().records {
                    track = track.max(rec.tracking_error);
                    if let Some(c) = rec.cos_state {
                        cos = cos.max((c - 1.0).abs());
                    } else if model == ModelKind::Ons {
                        return Err(format!("missing cos_state at t = {}", rec.t));
                    }
                }
            }
        }
    }
    let detail = format!("max tracking error {track:.2e}, max |cos_state - 1| {cos:.2e}");
    if track <= 1e-12 && cos <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_check() -> Verdict {
    let mut r = rng(909);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..=5);
        let obs = Observation {
            t: 1,
            x: gaussian(&mut r, d),
            y: r.sample(StandardNormal),
            w_star: DVector::zeros(d),
        };
        let w = gaussian(&mut r, d) * 2.0;
        let g = loss_grad(&w, &obs).unwrap();
        let h = 1e-5;
        for i in 0..d {
            let mut up = w.clone();
            let mut down = w.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (loss_value(&up, &obs).unwrap() - loss_value(&down, &obs).unwrap()) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
    }
    let detail = format!("max relative error {worst:.2e} on 100 points");
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn projection_optimality() -> Verdict {
    let mut r = rng(1010);
    let mut worst = f64::MIN;
    for case in 0..50 {
        let d = 2 + case % 3;
        let eigen: Vec<f64> = (0..d).map(|_| 10f64.powf(r.random_range(-1.0..1.5))).collect();
        let a = random_spd(&mut r, d, &eigen);
        let radius = r.random_range(0.5..5.0);
        let u = gaussian(&mut r, d) * (radius * r.random_range(0.5..4.0));
        let p = project_ball_metric(&u, &a, radius).unwrap();
        let dist = |w: &DVector<f64>| {
            let e = w - &u;
            e.dot(&a.mul_vec(&e))
        };
        let dp = dist(&p);
        if p.norm() > radius * (1.0 + 1e-12) {
            return Err(format!("case {case}: projection outside the ball"));
        }
        for k in 0..10_000 {
            let dir = gaussian(&mut r, d).normalize();
            // every other candidate on the boundary, where the optimum sits when u is outside
            let scale = if k % 2 == 0 { radius } else { radius * r.random::<f64>().powf(1.0 / d as f64) };
            worst = worst.max(dp - dist(&(dir * scale)));
        }
    }
    let detail = format!("max (d_A(proj) - d_A(candidate)) = {worst:.2e} over 50 x 10^4");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn residual_volatility() -> Verdict {
    let (horizon, tau) = (400usize, 200usize);
    let mut lines = Vec::new();
    let mut ok = true;
    for label in ons_labels().into_iter().filter(|l| l != "baseline") {
        let runs = select(ModelKind::Ons, Environment::Drifting, Some(&label));
        let pre = mean(runs.iter().map(|r| mean(r.records[horizon / 4..tau].iter().map(|x| x.tracking_error))));
        let post = mean(runs.iter().map(|r| mean(r.records[tau..].iter().map(|x| x.tracking_error))));
        ok &= post > pre;
        lines.push(format!("{label} {pre:.4}->{post:.4}"));
    }
    let detail = format!("pre -> post mean tracking: {}", lines.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_ons-unlearn");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outs = [dir.path().join("a"), dir.path().join("b")];
    for out in &outs {
        let status = Command::new(exe)
            .args(["run", "--out"])
            .arg(out)
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run exited with {status}"));
        }
    }
    let read = |p: &Path| std::fs::read(p).expect("output exists");
    let mut sizes = Vec::new();
    for file in ["rounds.csv", "summary.csv"] {
        let (a, b) = (read(&outs[0].join(file)), read(&outs[1].join(file)));
        if a != b {
            return Err(format!("{file} differs between runs"));
        }
        sizes.push(format!("{file} {} bytes", a.len()));
    }
    Ok(format!("identical {}", sizes.join(", ")))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("preconditioner oracle", preconditioner_oracle),
        ("standard-deletion exactness", deletion_exactness),
        ("spectral-treatment contract", spectral_contract),
        ("shock invariance", shock_invariance),
        ("OGD environment ordering", ogd_ordering),
        ("ONS immediate recovery", ons_recovery),
        ("stationary conditioning", stationary_conditioning),
        ("twin purity", twin_purity),
        ("gradient check", gradient_check),
        ("projection optimality", projection_optimality),
        ("residual volatility", residual_volatility),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("PASS  {name:<28} {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<28} {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
