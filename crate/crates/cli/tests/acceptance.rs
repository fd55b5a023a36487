//! Acceptance criteria, one PASS/FAIL line each. Runs the full regression
//! suite once with its pinned tolerances and groups the checks by criterion.

use std::time::Instant;

use regkit_cli::suite::{self, CheckResult, SuiteConfig};

const AC1_SECONDS: f64 = 5.0;
const AC2_SECONDS: f64 = 10.0;
const SUITE_SECONDS: f64 = 60.0;

const TITLES: [&str; 10] = [
    "E5 dual constants: closed form within 1e-10, sampled (budget 1e5) within 1e-2, < 5 s",
    "dual identities on 25 random subspace pairs (dims 2-5) below 1e-9, < 10 s",
    "srr/(srr+2) <= sr <= srr + 2e-2 on every fixture",
    "r <= sr + 2e-2 on every fixture; strict gap on E3 (sr = 1, r = 0)",
    "|sr[F] - sr| < 2e-2 on every fixture; F3Mod sandwich on E3 with sr[G] = sqrt 2",
    "ladder battery matches stated classifications; (eps,delta)-subregular => 0-Hoelder",
    "AP on E5 rate 0.5 +- 1e-4, R2 > 0.999; AP rate = c^2 +- 1e-4 on 10 line pairs; DR on E5 rate < 1",
    "Friedrichs complement invariance within 1e-12; Fri2 grid identity within 1e-6",
    "CHIP inclusion on every fixture with sr > 2e-2 and a structured intersection cone",
    "satisfied convergence hypothesis => fitted rate < 1 on all 20 fixtures",
];

fn main() {
    let cfg = SuiteConfig::default();
    assert_eq!(cfg.tol.closed, 1e-10);
    assert_eq!(cfg.tol.sampled, 1e-2);
    assert_eq!(cfg.tol.sampled_budget, 100_000);
    assert_eq!(cfg.tol.identity, 1e-9);
    assert_eq!(cfg.tol.sampling, 2e-2);
    assert_eq!(cfg.tol.rate, 1e-4);
    assert_eq!(cfg.tol.fit_quality, 0.999);
    assert_eq!(cfg.tol.fri1, 1e-12);
    assert_eq!(cfg.tol.fri2, 1e-6);
    assert_eq!(cfg.tol.exact, 1e-9);

    let t = Instant::now();
    let results = match suite::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL suite did not run: {e}");
            std::process::exit(1);
        }
    };
    let elapsed = t.elapsed().as_secs_f64();

    let mut all_ok = true;
    for (i, title) in TITLES.iter().enumerate() {
        let n = i as u8 + 1;
        let group: Vec<&CheckResult> = results.iter().filter(|r| r.criterion == Some(n)).collect();
        let failed: Vec<&CheckResult> = group.iter().copied().filter(|r| !r.pass).collect();
        let secs: f64 = group.iter().map(|r| r.seconds).sum();
        let mut ok = !group.is_empty() && failed.is_empty();
        let mut notes = vec![format!("{} checks", group.len())];
        match n {
            1 => {
                ok &= secs < AC1_SECONDS;
                notes.push(format!("{secs:.2}s"));
            }
            2 => {
                ok &= secs < AC2_SECONDS;
                notes.push(format!("{secs:.2}s"));
            }
            10 => {
                let fixtures = group.len();
                ok &= fixtures == 20;
                notes.push(format!("{fixtures} fixtures"));
            }
            _ => {}
        }
        for f in &failed {
            notes.push(format!("{}: {}", f.id, f.detail));
        }
        all_ok &= ok;
        println!("{} AC{n} {title} [{}]", if ok { "PASS" } else { "FAIL" }, notes.join("; "));
    }

    let stray: Vec<&CheckResult> = results.iter().filter(|r| r.criterion.is_none() && !r.pass).collect();
    let suite_ok = elapsed < SUITE_SECONDS && stray.is_empty();
    all_ok &= suite_ok;
    println!(
        "{} VERIFY full suite passes in under 60 s [{:.2}s, {} checks{}]",
        if suite_ok { "PASS" } else { "FAIL" },
        elapsed,
        results.len(),
        stray.iter().map(|r| format!("; {}: {}", r.id, r.detail)).collect::<String>()
    );

    if !all_ok {
        std::process::exit(1);
    }
}
