#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_nergrvt");

/// Omega-square source with a kappa roll-off, in g·s.
pub fn source_eas(f: f64) -> f64 {
    let fc = 0.8;
    0.02 * f * f / (f * f + fc * fc) * (-std::f64::consts::PI * 0.035 * f).exp()
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

pub fn eas_csv(freqs: &[f64], amp: impl Fn(f64) -> f64) -> String {
    let mut s = String::from("frequency_hz,eas\n");
    for &f in freqs {
        writeln!(s, "{f:.12e},{:.12e}", amp(f)).unwrap();
    }
    s
}

pub fn field_csv(freqs: &[f64], mean: impl Fn(f64) -> f64, sd: impl Fn(f64) -> f64) -> String {
    let mut s = String::from("frequency_hz,mean_ln,sd_ln\n");
    for &f in freqs {
        writeln!(s, "{f:.12e},{:.12e},{:.12e}", mean(f), sd(f)).unwrap();
    }
    s
}

pub const SCENARIO: &str = r#"{"magnitude": 6.5, "r_rup_km": 20.0, "vs30_ms": 760.0}"#;

/// Inputs shared by the command-level tests.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub eas: PathBuf,
    pub eas_shifted: PathBuf,
    pub scenario: PathBuf,
    pub field: PathBuf,
    pub residuals: PathBuf,
    pub aleatory: PathBuf,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let freqs = log_grid(0.1, 30.0, 200);
        let eas = write(d, "erg.csv", &eas_csv(&freqs, source_eas));
        let eas_shifted = write(
            d,
            "nerg.csv",
            &eas_csv(&freqs, |f| source_eas(f) * (0.3 * (f / 2.0).ln().cos()).exp()),
        );
        let scenario = write(d, "scenario.json", SCENARIO);
        let field = write(
            d,
            "field.csv",
            &field_csv(&log_grid(0.1, 30.0, 60), |f| 0.1 * (f / 3.0).ln(), |_| 0.4),
        );
        let mut res = String::from("event_id,station_id,magnitude,r_rup_km,vs30_ms,period_s,residual_ln\n");
        for e in 0..6 {
            for s in 0..4 {
                let r = 0.05 * ((e * 7 + s * 3) % 11) as f64 - 0.25 + 0.1 * e as f64;
                writeln!(
                    res,
                    "e{e},s{s},{},{},{},1,{r}",
                    4.5 + 0.4 * e as f64,
                    10.0 + 15.0 * s as f64,
                    300 + 100 * s
                )
                .unwrap();
                writeln!(
                    res,
                    "e{e},s{s},{},{},{},0.2,{}",
                    4.5 + 0.4 * e as f64,
                    10.0 + 15.0 * s as f64,
                    300 + 100 * s,
                    -r
                )
                .unwrap();
            }
        }
        let residuals = write(d, "residuals.csv", &res);
        let aleatory = write(
            d,
            "aleatory.csv",
            "period_s,phi0_m1,phi0_m2,tau0_m1,tau0_m2,dc0\n0.01,0.55,0.45,0.40,0.30,0.0\n1,0.60,0.50,0.42,0.32,-0.1\n10,0.62,0.52,0.45,0.35,0.05\n",
        );
        Self {
            dir,
            eas,
            eas_shifted,
            scenario,
            field,
            residuals,
            aleatory,
        }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV, header dropped.
pub fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Complementary error function by Maclaurin series and Lentz continued
/// fraction, independent of the engine's implementation.
pub fn reference_erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - reference_erfc(-x);
    }
    if x < 2.0 {
        // Maclaurin series of erf.
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term.abs() > 1e-18 * sum.abs() {
            n += 1.0;
            term *= -x * x / n;
            sum += term / (2.0 * n + 1.0);
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Lentz continued fraction.
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..200 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = x + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
    }
}
