//! Subcommands of the `optmech` binary. Each writes to the given sink and
//! reports failures as a [`CliError`] carrying the process exit code.

use clap::{Args, Parser, Subcommand, ValueEnum};
use optmech::oracle::{self, CertificateReport};
use optmech::sample::{seeded_rects, DEFAULT_SEED};
use optmech::{classify, solve, solve_linear, linear_revenue, Mechanism, Rectangle, StructureKind};
use rayon::prelude::*;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Diverged(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("certificate failed: {0}")]
    Certificate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io(_) => 4,
            CliError::Certificate(_) => 5,
        }
    }
}

impl From<optmech::Error> for CliError {
    fn from(e: optmech::Error) -> Self {
        use optmech::Error::*;
        match e {
            SolverDiverged { .. } | NoConvergence(_) => CliError::Diverged(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult = std::result::Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "optmech", version, about = "Optimal two-item menus for uniform valuations on a rectangle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance [c1, c1+b1] x [c2, c2+b2].
    Solve(SolveArgs),
    /// Structure map over (c1/b1, c2/b2) in [0, R]^2.
    Phase(PhaseArgs),
    /// Certificate checks plus a brute-force menu search.
    Verify(VerifyArgs),
    /// Linear marginals 2z/(2c+1) on [c, c+1].
    Linear(LinearArgs),
}

#[derive(Debug, Args)]
pub struct Instance {
    #[arg(allow_negative_numbers = true)]
    pub c1: f64,
    #[arg(allow_negative_numbers = true)]
    pub c2: f64,
    #[arg(allow_negative_numbers = true)]
    pub b1: f64,
    #[arg(allow_negative_numbers = true)]
    pub b2: f64,
}

impl Instance {
    fn rect(&self) -> Result<Rectangle, CliError> {
        Ok(Rectangle::new(self.c1, self.c2, self.b1, self.b2)?)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: Instance,
    /// Print the mechanism as JSON.
    #[arg(long)]
    pub json: bool,
    /// Indented JSON (implies --json).
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseFormat {
    Csv,
    Svg,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    pub b1: f64,
    pub b2: f64,
    /// Cells per axis.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Largest corner-to-side ratio on each axis.
    #[arg(long, default_value_t = 5.0)]
    pub max_ratio: f64,
    #[arg(long, value_enum, default_value_t = PhaseFormat::Csv)]
    pub out: PhaseFormat,
    /// Output file; stdout when absent.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Instance; omit together with --random.
    #[arg(allow_negative_numbers = true, num_args = 4, value_names = ["C1", "C2", "B1", "B2"])]
    pub instance: Option<Vec<f64>>,
    /// Verify this many seeded random rectangles instead.
    #[arg(long, conflicts_with = "instance")]
    pub random: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Coarse grid points per axis of the brute-force search.
    #[arg(long, default_value_t = 16)]
    pub coarse: usize,
    /// Refinement rounds of the brute-force search.
    #[arg(long, default_value_t = 4)]
    pub rounds: usize,
    /// Add this to the bundle price before checking (negative control).
    #[arg(long, allow_negative_numbers = true, hide = true)]
    pub perturb: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct LinearArgs {
    #[arg(allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long)]
    pub json: bool,
}

/// Size the global pool from `OPTMECH_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("OPTMECH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("thread pool already initialised: {e}");
            }
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a, out),
        Command::Phase(a) => cmd_phase(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Linear(a) => cmd_linear(&a, out),
    }
}

fn r6(x: f64) -> f64 {
    let v = (x * 1e6).round() / 1e6;
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn json_out(out: &mut dyn Write, v: &impl serde::Serialize, pretty: bool) -> CliResult {
    let s = if pretty { serde_json::to_string_pretty(v) } else { serde_json::to_string(v) }
        .map_err(|e| CliError::Validation(e.to_string()))?;
    writeln!(out, "{s}")?;
    Ok(())
}

fn write_menu(out: &mut dyn Write, mech: &Mechanism) -> CliResult {
    writeln!(out, "{:>10} {:>10} {:>12}", "q1", "q2", "price")?;
    for it in &mech.menu {
        writeln!(out, "{:>10} {:>10} {:>12}", r6(it.q1), r6(it.q2), r6(it.t))?;
    }
    Ok(())
}

pub fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> CliResult {
    let rect = a.instance.rect()?;
    let mech = solve(&rect)?;
    if a.json || a.pretty {
        return json_out(out, &mech, a.pretty);
    }
    writeln!(out, "region   {:?}", classify(&rect))?;
    writeln!(out, "kind     {}", mech.kind)?;
    writeln!(out, "revenue  {}", r6(mech.revenue))?;
    write_menu(out, &mech)
}

/// One cell of a phase map; `None` when the solver failed there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub c1_ratio: f64,
    pub c2_ratio: f64,
    pub kind: Option<StructureKind>,
}

/// Row-major over `c1_ratio`, then `c2_ratio`, both `i R/(N-1)`.
pub fn phase_grid(b1: f64, b2: f64, n: usize, max_ratio: f64) -> Result<Vec<PhaseCell>, CliError> {
    if n < 10 {
        return Err(CliError::Validation(format!("grid must be at least 10, got {n}")));
    }
    if !(max_ratio.is_finite() && max_ratio > 0.0) {
        return Err(CliError::Validation(format!("max ratio must be positive, got {max_ratio}")));
    }
    Rectangle::new(0.0, 0.0, b1, b2)?;
    let step = max_ratio / (n - 1) as f64;
    Ok((0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let (x, y) = (i as f64 * step, j as f64 * step);
            let kind = Rectangle::new(x * b1, y * b2, b1, b2).and_then(|r| solve(&r)).map(|m| m.kind);
            if let Err(e) = &kind {
                log::warn!("cell ({x}, {y}): {e}");
            }
            PhaseCell { c1_ratio: x, c2_ratio: y, kind: kind.ok() }
        })
        .collect())
}

pub fn phase_csv(cells: &[PhaseCell]) -> String {
    let mut s = String::from("c1_ratio,c2_ratio,kind\n");
    for c in cells {
        let k = c.kind.map_or("ERR", StructureKind::as_str);
        s.push_str(&format!("{},{},{}\n", r6(c.c1_ratio), r6(c.c2_ratio), k));
    }
    s
}

pub const PALETTE: [(StructureKind, &str); 8] = [
    (StructureKind::A, "#4e79a7"),
    (StructureKind::B, "#f28e2b"),
    (StructureKind::F, "#e15759"),
    (StructureKind::C, "#76b7b2"),
    (StructureKind::D, "#59a14f"),
    (StructureKind::E, "#edc948"),
    (StructureKind::G, "#b07aa1"),
    (StructureKind::H, "#ff9da7"),
];

fn color(kind: Option<StructureKind>) -> &'static str {
    kind.and_then(|k| PALETTE.iter().find(|p| p.0 == k)).map_or("#000000", |p| p.1)
}

/// Raster with `c1/b1` to the right and `c2/b2` upward, legend on the right.
pub fn phase_svg(cells: &[PhaseCell], n: usize, max_ratio: f64) -> String {
    let px = (600 / n).max(2);
    let side = px * n;
    let (w, h) = (side + 140, side + 40);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" shape-rendering=\"crispEdges\">\n"
    );
    for (k, c) in cells.iter().enumerate() {
        let (i, j) = (k / n, k % n);
        let y = side - (j + 1) * px;
        s.push_str(&format!(
            "<rect x=\"{}\" y=\"{y}\" width=\"{px}\" height=\"{px}\" fill=\"{}\"/>\n",
            i * px,
            color(c.kind)
        ));
    }
    let font = "font-family=\"sans-serif\" font-size=\"12\"";
    s.push_str(&format!("<text x=\"0\" y=\"{}\" {font}>c1/b1 in [0, {max_ratio}]</text>\n", side + 16));
    s.push_str(&format!("<text x=\"0\" y=\"{}\" {font}>c2/b2 in [0, {max_ratio}] upward</text>\n", side + 32));
    for (k, (kind, col)) in PALETTE.iter().enumerate() {
        let y = 10 + 22 * k;
        s.push_str(&format!("<rect x=\"{}\" y=\"{y}\" width=\"14\" height=\"14\" fill=\"{col}\"/>\n", side + 16));
        s.push_str(&format!("<text x=\"{}\" y=\"{}\" {font}>{kind}</text>\n", side + 38, y + 12));
    }
    s.push_str("</svg>\n");
    s
}

pub fn cmd_phase(a: &PhaseArgs, out: &mut dyn Write) -> CliResult {
    let cells = phase_grid(a.b1, a.b2, a.grid, a.max_ratio)?;
    let body = match a.out {
        PhaseFormat::Csv => phase_csv(&cells),
        PhaseFormat::Svg => phase_svg(&cells, a.grid, a.max_ratio),
    };
    match &a.output {
        Some(path) => std::fs::write(path, body)?,
        None => out.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn verify_one(rect: &Rectangle, a: &VerifyArgs) -> Result<(Mechanism, CertificateReport, oracle::BruteForceResult), CliError> {
    let mut mech = solve(rect)?;
    if let Some(d) = a.perturb {
        let k = mech.menu.len() - 1;
        mech.menu[k].t += d;
        mech.revenue = optmech::expected_revenue(&mech.menu, rect);
    }
    let (rep, bf) = oracle::verify(&mech, rect, a.coarse, a.rounds)?;
    Ok((mech, rep, bf))
}

fn write_report(out: &mut dyn Write, rect: &Rectangle, rep: &CertificateReport, bf: &oracle::BruteForceResult) -> CliResult {
    writeln!(out, "instance ({}, {}, {}, {})", rect.c1, rect.c2, rect.b1, rect.b2)?;
    writeln!(out, "kind     {}", rep.kind)?;
    writeln!(out, "revenue  {}", r6(rep.revenue))?;
    writeln!(out, "oracle   {} ({} menus)", r6(bf.revenue), bf.evaluations)?;
    for c in &rep.checks {
        let mark = if c.pass { "ok  " } else { "FAIL" };
        writeln!(out, "  {mark} {:<18} {:>12.3e}  tol {:.1e}", c.name, c.value, c.tolerance)?;
    }
    writeln!(out, "oracle best menu:")?;
    for it in bf.menu.iter().filter(|it| !it.is_null()) {
        writeln!(out, "  ({}, {}) at {}", r6(it.q1), r6(it.q2), r6(it.t))?;
    }
    writeln!(out, "{}", if rep.pass { "PASS" } else { "FAIL" })?;
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CliResult {
    let rects = match (&a.instance, a.random) {
        (Some(v), None) => vec![Rectangle::new(v[0], v[1], v[2], v[3])?],
        (None, Some(n)) => seeded_rects(a.seed, n),
        _ => return Err(CliError::Validation("give an instance or --random N".into())),
    };
    let mut failed = Vec::new();
    for rect in &rects {
        let (mech, rep, bf) = verify_one(rect, a)?;
        if a.json {
            let v = serde_json::json!({ "rect": rect, "mechanism": mech, "report": rep, "oracle_menu": bf.menu });
            json_out(out, &v, false)?;
        } else {
            write_report(out, rect, &rep, &bf)?;
        }
        if !rep.pass {
            let names: Vec<_> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
            failed.push(format!("({}, {}, {}, {}): {}", rect.c1, rect.c2, rect.b1, rect.b2, names.join(", ")));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Certificate(failed.join("; ")))
    }
}

pub fn cmd_linear(a: &LinearArgs, out: &mut dyn Write) -> CliResult {
    let p = solve_linear(a.c)?;
    let revenue = linear_revenue(&p);
    if a.json {
        let v = serde_json::json!({ "params": p, "revenue": revenue });
        return json_out(out, &v, false);
    }
    writeln!(out, "c        {}", p.c)?;
    writeln!(out, "p_a1     {}", r6(p.p_a1))?;
    writeln!(out, "a1       {}", r6(p.a1))?;
    writeln!(out, "P        ({}, {})", r6(p.p1), r6(p.p2))?;
    writeln!(out, "p        {}", r6(p.p))?;
    writeln!(out, "revenue  {}", r6(revenue))?;
    Ok(())
}
