//! Acceptance suite. Every criterion runs at its stated tolerance and time
//! budget and prints one PASS/FAIL line; the process exits nonzero if any
//! criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use nergrvt_core::hazard::{aggregate_tree, scenario_hazard, Branch, HazardCurve, LogicTree, ScenarioRate};
use nergrvt_core::nonergodic::{
    aleatory_sigma, fnerg_realizations, magnitude_ramp, realization_summary, AleatoryCoefficients, AleatoryRow,
};
use nergrvt_core::peak_factor::V75;
use nergrvt_core::residuals::{decompose, ResidualRow, ResidualTable};
use nergrvt_core::rvt_engine::DgmSource;
use nergrvt_core::spectra::{bandwidth_delta, corner_frequency, kappa_from_vs30, omega_square, spectral_moments};
use nergrvt_core::{
    fnerg_factor, psa_single, CorrelationModel, EasSpectrum, FrequencyGrid, NonErgodicField, Oscillator, RvtConfig,
    Scenario,
};
use nergrvt_oracle as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 9] = [
    Criterion {
        id: 1,
        name: "analytic moments of the unit rectangle",
        budget: Duration::from_secs(1),
        run: analytic_moments,
    },
    Criterion {
        id: 2,
        name: "peak-factor limits",
        budget: Duration::from_secs(5),
        run: peak_factor_limits,
    },
    Criterion {
        id: 3,
        name: "Monte Carlo time-domain oracle",
        budget: Duration::from_secs(300),
        run: monte_carlo_oracle,
    },
    Criterion {
        id: 4,
        name: "F_nerg scale invariance",
        budget: Duration::from_secs(10),
        run: scale_invariance,
    },
    Criterion {
        id: 5,
        name: "correlation effect on F_nerg spread",
        budget: Duration::from_secs(120),
        run: correlation_effect,
    },
    Criterion {
        id: 6,
        name: "residual decomposition",
        budget: Duration::from_secs(30),
        run: residual_decomposition,
    },
    Criterion {
        id: 7,
        name: "hazard curves and logic-tree aggregation",
        budget: Duration::from_secs(60),
        run: hazard,
    },
    Criterion {
        id: 8,
        name: "aleatory sigma composition and plateaus",
        budget: Duration::from_secs(1),
        run: aleatory_model,
    },
    Criterion {
        id: 9,
        name: "CLI determinism",
        budget: Duration::from_secs(120),
        run: cli_determinism,
    },
];

fn main() {
    let mut failed = Vec::new();
    for c in &CRITERIA {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > c.budget => Err(format!("{d}; over budget {:?}", c.budget)),
            o => o,
        };
        match &outcome {
            Ok(d) => println!("PASS [{}] {} ({:.2?}): {d}", c.id, c.name, elapsed),
            Err(d) => {
                println!("FAIL [{}] {} ({:.2?}): {d}", c.id, c.name, elapsed);
                failed.push(c.id);
            }
        }
    }
    if !failed.is_empty() {
        println!(
            "acceptance: {} of {} criteria failed: {failed:?}",
            failed.len(),
            CRITERIA.len()
        );
        std::process::exit(1);
    }
    println!("acceptance: all {} criteria passed", CRITERIA.len());
}

fn rect(ppd: f64) -> EasSpectrum {
    let g = FrequencyGrid::with_density(1e-6, 1.0, ppd).unwrap();
    EasSpectrum::from_fn(g, |_| 1.0).unwrap()
}

fn analytic_moments() -> Outcome {
    let want = [2.0, 2.0 * PI, 8.0 * PI * PI / 3.0];
    let m = spectral_moments(&rect(200.0)).map_err(|e| e.to_string())?;
    let got = [m.m0, m.m1, m.m2];
    let rel = got
        .iter()
        .zip(&want)
        .map(|(g, w)| (g / w - 1.0).abs())
        .fold(0.0, f64::max);
    let delta = bandwidth_delta(&m, 0.0).unwrap().delta;

    // Same integrals by composite Simpson as an independent route.
    let brute: Vec<f64> = (0..3)
        .map(|k| oracle::brute_force_moment(&[1e-6, 1.0], &[1.0, 1.0], k, 20_000))
        .collect();
    let brute_rel = brute
        .iter()
        .zip(&want)
        .map(|(g, w)| (g / w - 1.0).abs())
        .fold(0.0, f64::max);

    let errs: Vec<f64> = [50.0, 100.0, 200.0, 400.0, 800.0]
        .iter()
        .map(|&ppd| {
            let m = spectral_moments(&rect(ppd)).unwrap();
            (bandwidth_delta(&m, 0.0).unwrap().delta - 0.5).abs()
        })
        .collect();
    let converging = errs.windows(2).all(|w| w[1] < w[0]);
    check(
        rel < 1e-4 && (delta - 0.5).abs() < 1e-4 && brute_rel < 1e-4 && converging,
        format!(
            "max rel moment err {rel:.2e}, |delta-0.5| {:.2e}, oracle rel err {brute_rel:.2e}, refinement errs [{}]",
            (delta - 0.5).abs(),
            errs.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn davenport(n_z: f64) -> f64 {
    let s = (2.0 * n_z.ln()).sqrt();
    s + 0.5772 / s
}

fn peak_factor_limits() -> Outcome {
    let rayleigh = FRAC_PI_2.sqrt();
    let mut small = 0.0f64;
    for n_z in [0.0, 1e-9, 1e-7] {
        for de in [0.2, 0.6, 1.0] {
            let v = V75::new(n_z, de).unwrap().expected(1e-12).unwrap().value;
            small = small.max((v - rayleigh).abs());
        }
    }
    let mut worst = 0.0f64;
    let mut oracle_gap = 0.0f64;
    for n_z in [1e2, 1e3, 1e4, 1e5] {
        let pf = V75::new(n_z, 0.6).unwrap().expected(1e-10).unwrap();
        worst = worst.max((pf.value / davenport(n_z) - 1.0).abs());
        let brute = oracle::brute_force_peak_factor(n_z, 0.6, pf.r_max, 20_000);
        oracle_gap = oracle_gap.max((brute - pf.value).abs());
    }
    check(
        small < 1e-6 && worst < 0.05 && oracle_gap < 1e-6,
        format!(
            "|E[PF]-sqrt(pi/2)| {small:.2e}, max Davenport rel gap {worst:.3}, Simpson oracle gap {oracle_gap:.1e}"
        ),
    )
}

fn monte_carlo_oracle() -> Outcome {
    // (band lo, band hi, f0, D_gm); every case has D_gm·f0 >= 80 cycles.
    let cases = [
        (0.5, 20.0, 1.0, 100.0),
        (0.5, 20.0, 5.0, 30.0),
        (0.2, 10.0, 2.0, 40.0),
        (1.0, 25.0, 10.0, 10.0),
        (0.3, 5.0, 0.8, 120.0),
        (0.5, 20.0, 15.0, 8.0),
    ];
    let seeds = 500u64;
    let zeta = 0.05;
    let scn = Scenario::new(6.5, 20.0, 760.0);
    let mut lines = Vec::new();
    let mut ok = true;
    for &(lo, hi, f0, d) in &cases {
        let grid = FrequencyGrid::with_density(lo, hi, 200.0).unwrap();
        let spec = EasSpectrum::from_fn(grid, |_| 0.01).unwrap();
        let cfg = RvtConfig::default()
            .without_extrapolation()
            .with_dgm(DgmSource::User(d))
            .with_periods(vec![1.0 / f0]);
        let osc = Oscillator::new(f0, zeta).unwrap();
        let (psa, _) = psa_single(&spec, &osc, &scn, &cfg).map_err(|e| e.to_string())?;

        let fs = (25.0 * f0).max(4.0 * hi);
        let (freqs, amps) = (spec.freqs().to_vec(), spec.amps().to_vec());
        let threads = std::thread::available_parallelism().map_or(4, |n| n.get()) as u64;
        let peaks: Vec<f64> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let (freqs, amps) = (&freqs, &amps);
                    s.spawn(move || {
                        (t..seeds)
                            .step_by(threads as usize)
                            .map(|seed| {
                                let rec = oracle::synthesize(freqs, amps, d, fs, seed).unwrap();
                                oracle::time_domain_peak(&rec, f0, zeta).unwrap()
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        let med = oracle::median(&peaks);
        let ratio = med / psa;
        ok &= (ratio - 1.0).abs() < 0.10;
        lines.push(format!("[{lo}-{hi} Hz, f0 {f0}, D {d}] {ratio:.3}"));
    }
    check(ok, format!("median time-domain / RVT: {}", lines.join(", ")))
}

fn omega_square_eas(scn: &Scenario, per_decade: f64) -> EasSpectrum {
    let cfg = RvtConfig::default();
    let fc = corner_frequency(scn, cfg.stress_drop.as_ref()).unwrap();
    let kappa = kappa_from_vs30(scn.vs30_ms).unwrap();
    let g = FrequencyGrid::with_density(0.1, 25.0, per_decade).unwrap();
    EasSpectrum::from_fn(g, |f| 0.03 * omega_square(f, fc) * (-PI * kappa * f).exp()).unwrap()
}

fn scale_invariance() -> Outcome {
    let scn = Scenario::new(6.5, 20.0, 500.0);
    let e = omega_square_eas(&scn, 100.0);
    let cfg = RvtConfig::default();
    let mut worst = 0.0f64;
    for a in [-0.5f64, 0.1, 1.0] {
        let f = fnerg_factor(&e, &e.scaled(a.exp()).unwrap(), &scn, &cfg).map_err(|e| e.to_string())?;
        if f.values.len() != cfg.periods.len() {
            return Err("missing periods".into());
        }
        worst = f.values.iter().fold(worst, |w, v| w.max((v - a).abs()));
    }
    check(
        worst < 1e-12,
        format!("max |F_nerg - a| {worst:.1e} over {} periods", cfg.periods.len()),
    )
}

fn correlation_effect() -> Outcome {
    let scn = Scenario::new(6.5, 20.0, 500.0);
    let e = omega_square_eas(&scn, 50.0);
    let cfg = RvtConfig::default();
    let g = FrequencyGrid::with_density(0.1, 25.0, 20.0).unwrap();
    let n = g.len();
    let sd: Vec<f64> = g
        .as_slice()
        .iter()
        .map(|f| 0.3 + 0.15 * (-(f / 3.0).ln().powi(2)).exp())
        .collect();
    let imax = (0..n).max_by(|&a, &b| sd[a].total_cmp(&sd[b])).unwrap();
    let t_peak = 1.0 / g.as_slice()[imax];
    let k_peak = (0..cfg.periods.len())
        .min_by(|&a, &b| {
            (cfg.periods[a] / t_peak)
                .ln()
                .abs()
                .total_cmp(&(cfg.periods[b] / t_peak).ln().abs())
        })
        .unwrap();
    let base = NonErgodicField::new(g, vec![0.0; n], sd, CorrelationModel::Identity).unwrap();
    let samples = 1000;
    let seed = 2024;
    let spread = |c: CorrelationModel| {
        let field = base.with_correlation(c).unwrap();
        realization_summary(&fnerg_realizations(&e, &field, samples, seed, &scn, &cfg).unwrap())
            .unwrap()
            .1
    };
    let ind = spread(CorrelationModel::Identity);
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, c) in [
        ("perfect", CorrelationModel::Perfect),
        ("exp_ln_f(0.7)", CorrelationModel::ExpLnF { length: 0.7 }),
    ] {
        let full = spread(c);
        let min_ratio = full.iter().zip(&ind).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
        let all_ge = full.iter().zip(&ind).all(|(a, b)| a >= b);
        let strict = full[k_peak] > ind[k_peak];
        ok &= all_ge && strict;
        parts.push(format!(
            "{label}: min sd ratio {min_ratio:.2}, at T={:.3}s {:.3} vs {:.3}",
            cfg.periods[k_peak], full[k_peak], ind[k_peak]
        ));
    }
    check(ok, parts.join("; "))
}

fn synthetic_residuals(seed: u64) -> ResidualTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(4000);
    for e in 0..200 {
        let m = rng.random_range(4.0..7.5);
        let db = 0.3 * z.sample(&mut rng);
        for s in 0..20 {
            rows.push(ResidualRow {
                event_id: format!("e{e:03}"),
                station_id: format!("s{s:02}"),
                magnitude: m,
                r_rup_km: rng.random_range(1.0..200.0),
                vs30_ms: rng.random_range(200.0..1200.0),
                period_s: 1.0,
                residual_ln: -0.1 + db + 0.5 * z.sample(&mut rng),
            });
        }
    }
    ResidualTable::new(rows).unwrap()
}

fn residual_decomposition() -> Outcome {
    let fits: Vec<_> = [101, 202, 303]
        .iter()
        .map(|&s| decompose(&synthetic_residuals(s), 1.0).unwrap())
        .collect();
    let med = |f: &dyn Fn(usize) -> f64| {
        let mut v = [f(0), f(1), f(2)];
        v.sort_by(f64::total_cmp);
        v[1]
    };
    let tau = med(&|i| fits[i].tau0);
    let phi = med(&|i| fits[i].phi0);
    let partition = fits
        .iter()
        .flat_map(|d| {
            d.records
                .iter()
                .map(move |r| (d.dc0 + r.delta_b + r.delta_ws - r.residual_ln).abs())
        })
        .fold(0.0, f64::max);
    check(
        (tau / 0.3 - 1.0).abs() < 0.05 && (phi / 0.5 - 1.0).abs() < 0.05 && partition < 1e-10,
        format!("median tau {tau:.4}, phi {phi:.4}, max partition err {partition:.1e}"),
    )
}

fn slope_at_rate(curve: &HazardCurve, rate: f64) -> f64 {
    let x = curve.level_at_return_period(1.0 / rate).unwrap();
    let (a, b) = (x / 1.05, x * 1.05);
    (curve.rate_at(b).unwrap() / curve.rate_at(a).unwrap()).ln() / (b / a).ln()
}

fn hazard() -> Outcome {
    // Analytic single scenario.
    let levels: Vec<f64> = log_grid(1e-3, 3.0, 4001);
    let scn = ScenarioRate::new(0.01, (0.1f64).ln(), 0.6).unwrap();
    let curve = scenario_hazard(std::slice::from_ref(&scn), &levels, None).unwrap();
    let analytic = levels
        .iter()
        .zip(&curve.rates)
        .map(|(x, r)| {
            let z = (x.ln() - scn.median_ln) / scn.sigma;
            let want = 0.01 * 0.5 * reference_erfc(z / SQRT_2);
            (r / want - 1.0).abs()
        })
        .fold(0.0, f64::max);

    // Three branches with rates (1, 4, 9)e-4 at one level.
    let tree = LogicTree::new(
        [0.5, 0.3, 0.2]
            .iter()
            .enumerate()
            .map(|(i, &w)| Branch {
                weight: w,
                backbone: "b".into(),
                realization: i,
            })
            .collect(),
    )
    .unwrap();
    let curves: Vec<HazardCurve> = [1e-4, 4e-4, 9e-4]
        .iter()
        .map(|&r| HazardCurve {
            levels: vec![0.5],
            rates: vec![r],
        })
        .collect();
    let agg = aggregate_tree(&tree, &curves).unwrap();
    let hand = [
        (agg.mean[0], 0.5 * 1e-4 + 0.3 * 4e-4 + 0.2 * 9e-4),
        (agg.median[0], 2.5e-4),
        (agg.p16[0], 1e-4),
        (agg.p84[0], 9e-4),
        (agg.p02[0], 1e-4),
        (agg.p98[0], 9e-4),
    ];
    let hand_ok = hand.iter().all(|(g, w)| g == w);

    // 200 non-ergodic branches with a reduced aleatory sigma against one
    // ergodic branch with the full sigma.
    let t0 = 0.2;
    let eq = Scenario::new(6.5, 20.0, 500.0);
    let e = omega_square_eas(&eq, 50.0);
    let cfg = RvtConfig::default().with_periods(vec![t0]);
    let g = FrequencyGrid::with_density(0.1, 25.0, 20.0).unwrap();
    let n = g.len();
    let field = NonErgodicField::new(
        g.clone(),
        g.as_slice().iter().map(|f| 0.1 * (f / 5.0).ln()).collect(),
        vec![0.4; n],
        CorrelationModel::default(),
    )
    .unwrap();
    let factors = fnerg_realizations(&e, &field, 200, 77, &eq, &cfg).unwrap();
    let sigma_erg = 0.65;
    let sigma0 = 0.45;
    let sources = [(0.02, (0.08f64).ln()), (0.004, (0.2f64).ln())];
    let hazard_levels = log_grid(1e-3, 5.0, 400);
    let erg_curve = scenario_hazard(
        &sources
            .iter()
            .map(|&(r, m)| ScenarioRate::new(r, m, sigma_erg).unwrap())
            .collect::<Vec<_>>(),
        &hazard_levels,
        None,
    )
    .unwrap();
    let nerg_curves: Vec<HazardCurve> = factors
        .iter()
        .map(|f| {
            let s: Vec<ScenarioRate> = sources
                .iter()
                .map(|&(r, m)| ScenarioRate::new(r, m + f.values[0], sigma0).unwrap())
                .collect();
            scenario_hazard(&s, &hazard_levels, None).unwrap()
        })
        .collect();
    let tree = LogicTree::uniform("b", 200).unwrap();
    let agg = aggregate_tree(&tree, &nerg_curves).unwrap();
    let mean_curve = HazardCurve {
        levels: agg.levels.clone(),
        rates: agg.mean.clone(),
    };
    let s_nerg = slope_at_rate(&mean_curve, 1e-4);
    let s_erg = slope_at_rate(&erg_curve, 1e-4);
    let fnerg_sd = realization_summary(&factors).unwrap().1[0];

    check(
        analytic < 1e-10 && hand_ok && s_nerg < s_erg,
        format!(
            "analytic rel err {analytic:.1e}; hand case exact: {hand_ok}; slope at 1e-4: non-ergodic {s_nerg:.2} vs ergodic {s_erg:.2} (F_nerg sd {fnerg_sd:.2})"
        ),
    )
}

fn aleatory_model() -> Outcome {
    let row = |t: f64, p1: f64, p2: f64, t1: f64, t2: f64| AleatoryRow {
        period_s: t,
        phi0_m1: p1,
        phi0_m2: p2,
        tau0_m1: t1,
        tau0_m2: t2,
        dc0: 0.0,
    };
    let coeffs = AleatoryCoefficients::new(vec![
        row(0.1, 0.75, 0.375, 1.0, 0.5),
        row(1.0, 0.625, 0.375, 0.5, 0.25),
        row(10.0, 0.5, 0.25, 0.75, 0.5),
    ])
    .unwrap();
    let mut fails = Vec::new();
    let mut expect = |label: &str, got: f64, want: f64| {
        if got != want {
            fails.push(format!("{label}: {got} != {want}"));
        }
    };
    // Plateaus and exact ramp midpoints at table periods.
    for m in [3.0, 4.5, 5.0] {
        let s = aleatory_sigma(m, 0.1, &coeffs).unwrap();
        expect("phi small-M plateau", s.phi0, 0.75);
        expect("tau small-M plateau", s.tau0, 1.0);
        expect("sigma 3-4-5", s.sigma0, 1.25);
    }
    for m in [6.5, 7.2, 8.0] {
        let s = aleatory_sigma(m, 0.1, &coeffs).unwrap();
        expect("phi large-M plateau", s.phi0, 0.375);
        expect("tau large-M plateau", s.tau0, 0.5);
        expect("sigma large-M plateau", s.sigma0, 0.625);
    }
    let s = aleatory_sigma(5.75, 1.0, &coeffs).unwrap();
    expect("phi ramp midpoint", s.phi0, 0.5);
    expect("tau ramp midpoint", s.tau0, 0.375);
    expect("sigma ramp midpoint", s.sigma0, 0.625);

    // Composition and ln T interpolation everywhere else, to rounding.
    let mut worst_comp = 0.0f64;
    let mut worst_interp = 0.0f64;
    for i in 0..=40 {
        let t = 0.1 * 100f64.powf(i as f64 / 40.0);
        let r = coeffs.at(t).unwrap();
        let k = if t <= 1.0 { 0 } else { 1 };
        let (a, b) = (&coeffs.rows()[k], &coeffs.rows()[k + 1]);
        let w = (t / a.period_s).ln() / (b.period_s / a.period_s).ln();
        worst_interp = worst_interp.max((r.phi0_m1 - (a.phi0_m1 + w * (b.phi0_m1 - a.phi0_m1))).abs());
        for j in 0..=30 {
            let m = 4.0 + 4.0 * j as f64 / 30.0;
            let s = aleatory_sigma(m, t, &coeffs).unwrap();
            worst_comp = worst_comp.max((s.sigma0 / (s.phi0 * s.phi0 + s.tau0 * s.tau0).sqrt() - 1.0).abs());
            let ramp = magnitude_ramp(m, r.phi0_m1, r.phi0_m2);
            if s.phi0 != ramp {
                fails.push(format!("phi at M={m}, T={t}"));
            }
        }
    }
    if worst_comp > 4.0 * f64::EPSILON || worst_interp > 1e-15 {
        fails.push(format!(
            "composition {worst_comp:.1e}, interpolation {worst_interp:.1e}"
        ));
    }
    let outside = aleatory_sigma(6.0, 20.0, &coeffs).is_err();
    if !outside {
        fails.push("period outside the table accepted".into());
    }
    check(
        fails.is_empty(),
        if fails.is_empty() {
            format!("plateaus and midpoints exact; composition within {worst_comp:.1e}, interpolation within {worst_interp:.1e}")
        } else {
            fails.join("; ")
        },
    )
}

/// All files of `dir` as (name, bytes), sorted by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn cli_determinism() -> Outcome {
    let fx = Fixture::new();
    let scn = write(
        fx.path(),
        "haz.json",
        r#"{"period_s": 0.2, "backbones": {"b": [
            {"annual_rate": 0.02, "median_ln": -2.5, "sigma": 0.6, "scenario": {"magnitude": 5.5, "r_rup_km": 15, "vs30_ms": 760}},
            {"annual_rate": 0.004, "median_ln": -1.6, "sigma": 0.6, "scenario": {"magnitude": 6.5, "r_rup_km": 20, "vs30_ms": 760}}
        ]}}"#,
    );
    let branches: Vec<String> = (0..20)
        .map(|i| format!(r#"{{"weight": 0.05, "backbone": "b", "realization": {i}}}"#))
        .collect();
    let br = write(fx.path(), "br.json", &format!("[{}]", branches.join(",")));
    let bins = write(
        fx.path(),
        "bins.json",
        r#"{"bins": {"axis": "r_rup", "edges": [10, 30, 60]}}"#,
    );
    let fn_dir = fx.out("fnerg_field");

    let (eas, nerg, sc, field, res, ale) = (
        s(&fx.eas).to_string(),
        s(&fx.eas_shifted).to_string(),
        s(&fx.scenario).to_string(),
        s(&fx.field).to_string(),
        s(&fx.residuals).to_string(),
        s(&fx.aleatory).to_string(),
    );
    let fnerg_csv = fn_dir.join("fnerg.csv").to_str().unwrap().to_string();
    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "psa",
            vec![
                "psa".into(),
                "--eas".into(),
                eas.clone(),
                "--scenario".into(),
                sc.clone(),
            ],
        ),
        (
            "extrapolate",
            vec![
                "extrapolate".into(),
                "--eas".into(),
                eas.clone(),
                "--scenario".into(),
                sc.clone(),
            ],
        ),
        (
            "fnerg_pair",
            vec![
                "fnerg".into(),
                "--erg".into(),
                eas.clone(),
                "--nerg".into(),
                nerg,
                "--scenario".into(),
                sc.clone(),
            ],
        ),
        (
            "fnerg_field",
            vec![
                "fnerg".into(),
                "--erg".into(),
                eas,
                "--field".into(),
                field.clone(),
                "--scenario".into(),
                sc,
                "--samples".into(),
                "20".into(),
                "--seed".into(),
                "42".into(),
            ],
        ),
        (
            "sample",
            vec![
                "sample".into(),
                "--field".into(),
                field,
                "--samples".into(),
                "50".into(),
                "--seed".into(),
                "7".into(),
            ],
        ),
        (
            "decompose",
            vec![
                "decompose".into(),
                "--residuals".into(),
                res,
                "--config".into(),
                s(&bins).into(),
            ],
        ),
        (
            "hazard",
            vec![
                "hazard".into(),
                "--scenarios".into(),
                s(&scn).into(),
                "--branches".into(),
                br.to_str().unwrap().into(),
                "--fnerg".into(),
                fnerg_csv,
                "--aleatory".into(),
                ale,
            ],
        ),
    ];
    let mut checked = Vec::new();
    for (label, args) in &commands {
        let dir = fx.out(label);
        let mut snaps = Vec::new();
        for threads in ["1", "4"] {
            let out = std::process::Command::new(BIN)
                .args(args)
                .arg("--out")
                .arg(&dir)
                .env("SOURCE_DATE_EPOCH", "1700000000")
                .env("RAYON_NUM_THREADS", threads)
                .output()
                .unwrap();
            if !out.status.success() {
                return Err(format!("{label} failed: {}", stderr(&out)));
            }
            snaps.push(snapshot(&dir));
        }
        if snaps[0] != snaps[1] {
            return Err(format!("{label}: outputs differ between reruns"));
        }
        checked.push(format!("{label} ({} files)", snaps[0].len()));
    }
    Ok(format!("byte-identical reruns: {}", checked.join(", ")))
}
