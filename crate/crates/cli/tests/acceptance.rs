//! One PASS/FAIL line per acceptance criterion.
//!
//! A few sub-checks are known not to hold (listed in `KNOWN`). They still
//! print FAIL; the process exits non-zero only for failures outside that
//! list, or for any failure when `ACCEPTANCE_STRICT=1`.

use optmech::oracle::{self, brute_force_menu_search, certificate_check, local_max_check};
use optmech::sample::{seeded_rects, DEFAULT_SEED};
use optmech::{classify, expected_revenue, solve, MenuItem, PhaseRegion, Rectangle, StructureKind};
use optmech_cli::{cmd_linear, phase_grid, LinearArgs};
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

/// Sub-checks that cannot pass as stated, with the reason.
const KNOWN: &[(&str, &str)] = &[
    ("c=0.077 kind A", "exact kind-A limit of (c,c,1,1) is c = 0.07656"),
    ("revenue 8.375", "the stated menu earns 8 + 0.75^2 = 8.5625"),
    ("c=0 p", "1.09597 is the out-of-support root of the bundle-region quartic; revenue peaks at 1.090858"),
];

struct Criterion {
    id: u32,
    name: &'static str,
    subs: Vec<(String, bool, String)>,
}

impl Criterion {
    fn new(id: u32, name: &'static str) -> Self {
        Criterion { id, name, subs: Vec::new() }
    }

    fn check(&mut self, sub: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.subs.push((sub.into(), pass, detail.into()));
    }

    fn close(&mut self, sub: &str, got: f64, want: f64, tol: f64) {
        let err = (got - want).abs();
        self.check(sub, err <= tol, format!("{got:.12} vs {want:.12}, err {err:.1e} (tol {tol:.0e})"));
    }

    fn pass(&self) -> bool {
        self.subs.iter().all(|s| s.1)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn rect(c1: f64, c2: f64, b1: f64, b2: f64) -> Rectangle {
    Rectangle::new(c1, c2, b1, b2).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn c1_unit_square() -> Criterion {
    let mut c = Criterion::new(1, "unit square: kind A, item prices 2/3, bundle (4-sqrt2)/3, < 10 ms");
    let r = rect(0.0, 0.0, 1.0, 1.0);
    solve(&r).unwrap();
    let (m, dt) = timed(|| solve(&r).unwrap());
    c.check("kind", m.kind == StructureKind::A, format!("{}", m.kind));
    c.close("p_a1", m.menu[1].t, 2.0 / 3.0, 1e-12);
    c.close("p_a2", m.menu[2].t, 2.0 / 3.0, 1e-12);
    c.close("bundle", m.menu[3].t, (4.0 - 2f64.sqrt()) / 3.0, 1e-10);
    c.check("runtime", dt < Duration::from_millis(10), format!("{dt:?}"));
    c
}

fn c2_skewed_square() -> Criterion {
    let mut c = Criterion::new(2, "skewed square (0,0,3,1): bundle price 11/6");
    let m = solve(&rect(0.0, 0.0, 3.0, 1.0)).unwrap();
    c.close("bundle", m.menu.last().unwrap().t, 11.0 / 6.0, 1e-10);
    c
}

fn c3_pavlov() -> Criterion {
    let mut c = Criterion::new(3, "small symmetric corners: kind A, certificate, oracle gap, < 5 s each");
    for cc in [0.02, 0.05, 0.077] {
        let r = rect(cc, cc, 1.0, 1.0);
        let ((m, rep, bf), dt) = timed(|| {
            let m = solve(&r).unwrap();
            let (rep, bf) = oracle::verify(&m, &r, 16, 4).unwrap();
            (m, rep, bf)
        });
        c.check(format!("c={cc} kind A"), m.kind == StructureKind::A, format!("{}", m.kind));
        let cert_ok = rep.checks.iter().filter(|k| k.name != "oracle_gap").all(|k| k.pass);
        c.check(format!("c={cc} certificate"), cert_ok, "");
        let gap = (m.revenue - bf.revenue) / m.revenue;
        c.check(
            format!("c={cc} oracle gap"),
            gap <= oracle::ORACLE_GAP_TOL && gap >= -oracle::ORACLE_UNDERSHOOT_TOL,
            format!("{gap:.2e}"),
        );
        c.check(format!("c={cc} runtime"), dt < Duration::from_secs(5), format!("{dt:.2?}"));
    }
    c
}

fn c4_bundling() -> Criterion {
    let mut c = Criterion::new(4, "bundling (2,2,1,1): kind C at 4+(sqrt22-4)/3, oracle within 5e-3");
    let r = rect(2.0, 2.0, 1.0, 1.0);
    let m = solve(&r).unwrap();
    c.check("kind", m.kind == StructureKind::C, format!("{}", m.kind));
    c.close("price", m.menu.last().unwrap().t, 4.0 + (22f64.sqrt() - 4.0) / 3.0, 1e-10);
    let bf = brute_force_menu_search(&r, 16, 4);
    let gap = (m.revenue - bf.revenue) / m.revenue;
    c.check("oracle", gap.abs() <= oracle::ORACLE_GAP_TOL, format!("{gap:.2e}"));
    c
}

fn c5_no_exclusion() -> Criterion {
    let mut c = Criterion::new(5, "no exclusion (0.5,8,1,1): kind E menu, revenue 8.375, local max, mirror H");
    let r = rect(0.5, 8.0, 1.0, 1.0);
    let m = solve(&r).unwrap();
    c.check("kind", m.kind == StructureKind::E, format!("{}", m.kind));
    let want = vec![MenuItem { q1: 0.0, q2: 1.0, t: 8.0 }, MenuItem::bundle(8.75)];
    c.check("menu", m.menu == want, format!("{:?}", m.menu));
    let rev = expected_revenue(&m.menu, &r);
    c.check("revenue 8.375", rev == 8.375, format!("{rev}"));
    c.check("local max", local_max_check(&m.menu, &r, 1e-4), "");
    let h = solve(&r.swapped()).unwrap();
    c.check("mirror H", h.kind == StructureKind::H, format!("{}", h.kind));
    c
}

fn c6_linear() -> Criterion {
    let mut c = Criterion::new(6, "linear marginals: c=0 and c=0.1 parameters");
    let run = |x: f64| -> serde_json::Value {
        let mut buf = Vec::new();
        cmd_linear(&LinearArgs { c: x, json: true }, &mut buf).unwrap();
        serde_json::from_slice(&buf).unwrap()
    };
    let v0 = run(0.0);
    let p = &v0["params"];
    c.close("c=0 p_a1", p["p_a1"].as_f64().unwrap(), 0.6f64.sqrt(), 1e-9);
    c.close("c=0 p", p["p"].as_f64().unwrap(), 1.09597, 1e-4);
    let v1 = run(0.1);
    let p = &v1["params"];
    c.close("c=0.1 p_a1", p["p_a1"].as_f64().unwrap(), 0.796151, 1e-4);
    c.close("c=0.1 a1", p["a1"].as_f64().unwrap(), 0.231984, 1e-4);
    c.close("c=0.1 P1", p["P1"].as_f64().unwrap(), 0.364655, 1e-4);
    c.close("c=0.1 p", p["p"].as_f64().unwrap(), 1.19941, 1e-4);
    c
}

fn c7_certificates() -> Criterion {
    let mut c = Criterion::new(7, "certificate suite: 50 seeded rectangles over all six regions, < 60 s");
    let (results, dt) = timed(|| {
        let rects = seeded_rects(DEFAULT_SEED, 50);
        let regions: BTreeSet<_> = rects.iter().map(|r| classify(r) as u8).collect();
        let bad: Vec<String> = rects
            .iter()
            .filter_map(|r| {
                let m = match solve(r) {
                    Ok(m) => m,
                    Err(e) => return Some(format!("{r:?}: {e}")),
                };
                let rep = certificate_check(&m, r).unwrap();
                let failed: Vec<_> = rep.checks.iter().filter(|k| !k.pass).map(|k| k.name.as_str()).collect();
                (!failed.is_empty() || m.menu.len() > 4).then(|| format!("{r:?} {}: {failed:?}", m.kind))
            })
            .collect();
        (regions.len(), bad)
    });
    let (regions, bad) = results;
    c.check("regions", regions == PhaseRegion::ALL.len(), format!("{regions} of 6"));
    c.check("all certified", bad.is_empty(), bad.join("; "));
    c.check("runtime", dt < Duration::from_secs(60), format!("{dt:.2?}"));
    c
}

/// Largest revenue jump across label changes along `x -> build(x)`.
fn boundary_jumps(build: impl Fn(f64) -> Rectangle, lo: f64, hi: f64, steps: usize) -> (usize, f64) {
    let label = |x: f64| {
        let r = build(x);
        (classify(&r), solve(&r).unwrap().kind)
    };
    let (mut n, mut worst) = (0, 0.0f64);
    let mut x0 = lo;
    let mut l0 = label(x0);
    for i in 1..=steps {
        let x1 = lo + (hi - lo) * i as f64 / steps as f64;
        let l1 = label(x1);
        if l1 != l0 {
            let (mut a, mut b) = (x0, x1);
            while b - a > 1e-12 * (1.0 + b.abs()) {
                let m = 0.5 * (a + b);
                if label(m) == l0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let ra = solve(&build(a)).unwrap().revenue;
            let rb = solve(&build(b)).unwrap().revenue;
            worst = worst.max((ra - rb).abs());
            n += 1;
        }
        x0 = x1;
        l0 = l1;
    }
    (n, worst)
}

fn c8_properties() -> Criterion {
    let mut c = Criterion::new(8, "properties: scale invariance, index swap, continuity across boundaries");
    let rects = seeded_rects(DEFAULT_SEED + 8, 60);
    let mut scale_bad = 0;
    let mut swap_bad = 0;
    for r in &rects {
        let m = solve(r).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let ms = solve(&r.scaled(lambda)).unwrap();
            let prices = m.menu.len() == ms.menu.len()
                && m.menu.iter().zip(&ms.menu).all(|(a, b)| rel(a.t * lambda, b.t) < 1e-9);
            if ms.kind != m.kind || !prices {
                scale_bad += 1;
            }
        }
        let sw = solve(&r.swapped()).unwrap();
        if sw.kind != m.kind.swapped() || rel(sw.revenue, m.revenue) > 1e-9 {
            swap_bad += 1;
        }
    }
    c.check("scale", scale_bad == 0, format!("{scale_bad} of {} mismatched", 3 * rects.len()));
    c.check("swap", swap_bad == 0, format!("{swap_bad} of {} mismatched", rects.len()));
    let sweeps: Vec<(usize, f64)> = vec![
        boundary_jumps(|x| rect(x, x, 1.0, 1.0), 0.0, 4.0, 200),
        boundary_jumps(|x| rect(0.2, x, 1.0, 1.0), 0.0, 30.0, 400),
        boundary_jumps(|x| rect(0.1, x, 0.6, 1.0), 0.0, 30.0, 400),
        boundary_jumps(|x| rect(0.3, x, 1.5, 1.0), 0.0, 30.0, 400),
        boundary_jumps(|x| rect(x, 0.4, 0.6, 1.0), 0.0, 30.0, 400),
        boundary_jumps(|x| rect(2.0, x, 1.0, 1.0), 0.0, 20.0, 300),
    ];
    let crossings: usize = sweeps.iter().map(|s| s.0).sum();
    let worst = sweeps.iter().map(|s| s.1).fold(0.0, f64::max);
    c.check("continuity", worst < 1e-6 && crossings > 0, format!("{crossings} crossings, max jump {worst:.1e}"));
    c
}

fn c9_phase() -> Criterion {
    let mut c = Criterion::new(9, "phase maps b=(1,1),(0.6,1),(1.5,1), N=100, R=5: all eight kinds, < 120 s");
    let (maps, dt) = timed(|| {
        [(1.0, 1.0), (0.6, 1.0), (1.5, 1.0)].map(|(b1, b2)| phase_grid(b1, b2, 100, 5.0).unwrap())
    });
    for (map, b) in maps.iter().zip(["(1,1)", "(0.6,1)", "(1.5,1)"]) {
        let kinds: BTreeSet<_> = map.iter().filter_map(|cell| cell.kind).collect();
        let errs = map.iter().filter(|cell| cell.kind.is_none()).count();
        c.check(format!("b={b} kinds"), kinds.len() == 8 && errs == 0, format!("{} kinds, {errs} errors", kinds.len()));
    }
    let differ = maps[0] != maps[1] && maps[1] != maps[2] && maps[0] != maps[2];
    c.check("maps differ", differ, "");
    c.check("runtime", dt < Duration::from_secs(120), format!("{dt:.2?}"));
    c
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria = [
        c1_unit_square as fn() -> Criterion,
        c2_skewed_square,
        c3_pavlov,
        c4_bundling,
        c5_no_exclusion,
        c6_linear,
        c7_certificates,
        c8_properties,
        c9_phase,
    ];
    let mut unexpected = 0;
    let mut failed = 0;
    for run in criteria {
        let c = run();
        let details: Vec<String> = c
            .subs
            .iter()
            .filter(|s| !s.1)
            .map(|s| {
                let known = KNOWN.iter().find(|k| k.0 == s.0);
                if known.is_none() {
                    unexpected += 1;
                }
                let note = known.map_or(String::new(), |k| format!("; known: {}", k.1));
                format!("{} [{}{note}]", s.0, s.2)
            })
            .collect();
        let status = if c.pass() { "PASS" } else { "FAIL" };
        if !c.pass() {
            failed += 1;
        }
        if details.is_empty() {
            println!("{status} {} {}", c.id, c.name);
        } else {
            println!("{status} {} {} -- {}", c.id, c.name, details.join(", "));
        }
    }
    println!("{} of 9 criteria pass; {unexpected} unexpected sub-check failures", 9 - failed);
    if unexpected > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
