//! `carnotw`: batch front end for the carnot-w1 library.
//!
//! Inputs are JSON files (or inline JSON when the argument starts with `{`
//! or `[`). Reports go to stdout or `--out` as CSV or JSON.
//!
//! Exit codes: 0 success, 1 I/O or parse error, 2 validation or
//! precondition failure, 3 check failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use carnot_w1::formats;
use carnot_w1::geodesics::{self, GeodesicCurve};
use carnot_w1::norms::{self, NormSpec};
use carnot_w1::report::{fmt_f64, CheckReport};
use carnot_w1::rigidity::{self, IsometrySpec};
use carnot_w1::wasserstein;
use carnot_w1::{Error, GroupPoint, GroupSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "carnotw", about = "Homogeneous norms and 1-Wasserstein geometry on Carnot groups")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Tolerance override (each subcommand has its own default).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sample count override.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Group JSON; defaults to the first Heisenberg group.
    #[arg(long, global = true)]
    group: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a norm at a point.
    Norm {
        #[arg(long)]
        norm: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Distance d_N(p, q).
    Dist {
        #[arg(long)]
        norm: String,
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    /// Exact 1-Wasserstein distance with plan and dual certificate.
    W1 {
        #[arg(long)]
        norm: String,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
        /// Also print the optimal plan (CSV: i,j,flow,cost).
        #[arg(long)]
        plan: bool,
    },
    /// Check that a curve is a unit-speed geodesic on a time grid.
    GeodesicValidate {
        #[arg(long)]
        norm: String,
        #[arg(long)]
        curve: String,
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Build the two branching geodesics between mu and nu.
    GeodesicBranch {
        #[arg(long)]
        norm: String,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
        /// Points of the positive part of mu - nu transported first.
        #[arg(long)]
        select: String,
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Sampled norm axioms.
    CheckNorm {
        #[arg(long)]
        norm: String,
    },
    /// Horizontal strict convexity scan.
    CheckHsc {
        #[arg(long)]
        norm: String,
    },
    /// Inequality chain behind the Hebisch-Sikora triangle inequality.
    CheckHsProof {
        #[arg(long)]
        r: f64,
    },
    /// Structure constants and the Hebisch-Sikora radius threshold.
    R0,
    /// Rigidity demonstration for the push-forward of an isometry.
    RigidityDemo {
        #[arg(long)]
        norm: String,
        /// Isometry JSON; identity when omitted.
        #[arg(long)]
        iso: Option<String>,
    },
    /// Perturb points into pairwise related position.
    Perturb {
        #[arg(long)]
        norm: String,
        #[arg(long)]
        points: String,
        #[arg(long)]
        epsilon: f64,
    },
}

enum Failure {
    Io(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) | Failure::Lib(Error::Parse(_)) => 1,
            Failure::Lib(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

/// Output text and whether every check passed.
struct Outcome {
    text: String,
    passed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, passed: true }
    }
}

fn read_input(arg: &str) -> Result<String, Failure> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(arg.to_string());
    }
    fs::read_to_string(arg).map_err(|e| Failure::Io(format!("cannot read {arg}: {e}")))
}

fn parse_point(s: &str) -> Result<GroupPoint, Failure> {
    let coords = s
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Lib(Error::Parse(format!("point '{s}': {e}"))))?;
    Ok(GroupPoint::new(coords))
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

fn report_out(rep: &CheckReport, fmt: Format) -> Outcome {
    let text = match fmt {
        Format::Csv => rep.to_csv(),
        Format::Json => json_text(&to_value(rep)),
    };
    Outcome { text, passed: rep.passed() }
}

struct Ctx {
    format: Format,
    tol: Option<f64>,
    samples: Option<usize>,
    seed: u64,
    group: GroupSpec,
}

impl Ctx {
    fn norm(&self, arg: &str) -> Result<NormSpec, Failure> {
        Ok(formats::parse_norm(&read_input(arg)?, self.group.clone())?)
    }

    fn measure(&self, arg: &str) -> Result<wasserstein::DiscreteMeasure, Failure> {
        Ok(formats::parse_measure(&read_input(arg)?)?)
    }
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    let group = match &cli.group {
        Some(g) => formats::parse_group(&read_input(g)?)?,
        None => GroupSpec::heisenberg(1)?,
    };
    let ctx = Ctx { format: cli.format, tol: cli.tol, samples: cli.samples, seed: cli.seed, group };
    let fmt = ctx.format;
    match &cli.command {
        Command::Norm { norm, point } => {
            let n = ctx.norm(norm)?;
            let v = n.eval(&parse_point(point)?)?;
            Ok(Outcome::ok(match fmt {
                Format::Csv => format!("{}\n", fmt_f64(v)),
                Format::Json => json_text(&json!({ "norm": n.name(), "value": v })),
            }))
        }
        Command::Dist { norm, p, q } => {
            let n = ctx.norm(norm)?;
            let v = n.distance(&parse_point(p)?, &parse_point(q)?)?;
            Ok(Outcome::ok(match fmt {
                Format::Csv => format!("{}\n", fmt_f64(v)),
                Format::Json => json_text(&json!({ "norm": n.name(), "distance": v })),
            }))
        }
        Command::W1 { norm, mu, nu, plan } => {
            let n = ctx.norm(norm)?;
            let (mu, nu) = (ctx.measure(mu)?, ctx.measure(nu)?);
            let sol = wasserstein::w1_distance(&n, &mu, &nu)?;
            let (pot, gap) = wasserstein::kr_dual(&n, &mu, &nu, &sol.plan)?;
            Ok(Outcome::ok(match fmt {
                Format::Csv => {
                    let mut s = format!("{}\n", fmt_f64(sol.value));
                    if *plan {
                        s.push_str(&sol.plan.to_csv());
                    }
                    s
                }
                Format::Json => json_text(&json!({
                    "value": sol.value,
                    "plan": sol.plan.edges().iter().map(|e| json!({"i": e.0, "j": e.1, "flow": e.2, "cost": e.3})).collect::<Vec<_>>(),
                    "dual": to_value(&pot),
                    "gap": gap,
                })),
            }))
        }
        Command::GeodesicValidate { norm, curve, grid } => {
            let n = ctx.norm(norm)?;
            let c = formats::parse_curve(&read_input(curve)?)?;
            let rep = geodesics::validate_unit_speed(&n, &c, *grid, ctx.tol.unwrap_or(geodesics::DEFAULT_GEODESIC_TOL))?;
            let text = match fmt {
                Format::Csv => rep.to_csv(),
                Format::Json => json_text(&to_value(&rep)),
            };
            Ok(Outcome { text, passed: rep.passed })
        }
        Command::GeodesicBranch { norm, mu, nu, select, grid } => {
            let n = ctx.norm(norm)?;
            let (mu, nu) = (ctx.measure(mu)?, ctx.measure(nu)?);
            let sel = formats::parse_points(&read_input(select)?)?;
            let (g1, g2) = geodesics::build_branching_geodesics(&mu, &nu, &sel, &n)?;
            let tol = ctx.tol.unwrap_or(geodesics::DEFAULT_GEODESIC_TOL);
            let r1 = geodesics::validate_unit_speed(&n, &g1, *grid, tol)?;
            let r2 = geodesics::validate_unit_speed(&n, &g2, *grid, tol)?;
            let sep = geodesics::max_separation(&n, &g1, &g2, *grid)?;
            let passed = r1.passed && r2.passed;
            let text = match fmt {
                Format::Csv => curves_csv(&[("gamma1", &g1, r1.max_deviation), ("gamma2", &g2, r2.max_deviation)], sep),
                Format::Json => json_text(&json!({
                    "gamma1": to_value(&g1),
                    "gamma2": to_value(&g2),
                    "max_deviation": [r1.max_deviation, r2.max_deviation],
                    "max_separation": sep,
                })),
            };
            Ok(Outcome { text, passed })
        }
        Command::CheckNorm { norm } => {
            let n = ctx.norm(norm)?;
            let rep = norms::check_norm_axioms(&n, ctx.samples.unwrap_or(10_000), ctx.seed, ctx.tol.unwrap_or(1e-10))?;
            for note in &rep.notes {
                eprintln!("{note}");
            }
            Ok(report_out(&rep, fmt))
        }
        Command::CheckHsc { norm } => {
            let n = ctx.norm(norm)?;
            let scan = norms::hsc_scan(&n, ctx.samples.unwrap_or(10_000), ctx.seed, ctx.tol.unwrap_or(1e-12))?;
            let rep = scan.to_check_report();
            for note in &rep.notes {
                eprintln!("{note}");
            }
            let mut out = report_out(&rep, fmt);
            out.passed = scan.hsc_consistent();
            Ok(out)
        }
        Command::CheckHsProof { r } => {
            let rep = norms::verify_hs_proof_inequalities(
                &ctx.group,
                *r,
                ctx.samples.unwrap_or(10_000),
                ctx.seed,
                ctx.tol.unwrap_or(1e-10),
            )?;
            for note in &rep.notes {
                eprintln!("{note}");
            }
            Ok(report_out(&rep, fmt))
        }
        Command::R0 => {
            let c = norms::estimate_c1_c2(&ctx.group, ctx.samples.unwrap_or(norms::R0_SAMPLES), ctx.seed)?;
            let r0 = norms::r0_from_constants(&c);
            Ok(Outcome::ok(match fmt {
                Format::Csv => format!(
                    "c1_sampled,c1,c2,r0\n{},{},{},{}\n",
                    fmt_f64(c.c1_sampled),
                    fmt_f64(c.c1),
                    fmt_f64(c.c2),
                    fmt_f64(r0)
                ),
                Format::Json => json_text(&json!({ "c1_sampled": c.c1_sampled, "c1": c.c1, "c2": c.c2, "r0": r0 })),
            }))
        }
        Command::RigidityDemo { norm, iso } => {
            let n = ctx.norm(norm)?;
            let iso = match iso {
                Some(a) => formats::parse_isometry(&read_input(a)?, &n)?,
                None => IsometrySpec::identity(n.group()),
            };
            let rep = rigidity::rigidity_demo(&n, &iso, ctx.samples.unwrap_or(100), ctx.seed)?;
            let text = match fmt {
                Format::Csv => rep.to_csv(),
                Format::Json => json_text(&to_value(&rep)),
            };
            Ok(Outcome { text, passed: rep.passed() })
        }
        Command::Perturb { norm, points, epsilon } => {
            let n = ctx.norm(norm)?;
            let pts = formats::parse_points(&read_input(points)?)?;
            let out = rigidity::perturb_to_tilde_position(&n, &pts, *epsilon, ctx.seed)?;
            Ok(Outcome::ok(match fmt {
                Format::Csv => {
                    let mut s = String::new();
                    for (a, b) in pts.iter().zip(&out) {
                        let coords: Vec<String> = b.coords().iter().map(|c| fmt_f64(*c)).collect();
                        s.push_str(&format!("{},{}\n", coords.join(","), fmt_f64(n.distance(a, b)?)));
                    }
                    s
                }
                Format::Json => json_text(&to_value(&out)),
            }))
        }
    }
}

fn curves_csv(curves: &[(&str, &GeodesicCurve, f64)], sep: f64) -> String {
    let mut s = String::from("curve,t,weight,point\n");
    for (name, c, _) in curves {
        for k in c.knots() {
            for (p, w) in k.measure.atoms() {
                let coords: Vec<String> = p.coords().iter().map(|v| fmt_f64(*v)).collect();
                s.push_str(&format!("{name},{},{},{}\n", fmt_f64(k.t), fmt_f64(w), coords.join(" ")));
            }
        }
    }
    for (name, _, dev) in curves {
        s.push_str(&format!("# {name} max_deviation {}\n", fmt_f64(*dev)));
    }
    s.push_str(&format!("# max_separation {}\n", fmt_f64(sep)));
    s
}

fn main() -> ExitCode {
    let version: &'static str =
        Box::leak(format!("{} ({})", env!("CARGO_PKG_VERSION"), formats::format_versions()).into_boxed_str());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let out_path = cli.out.clone();
    match run(cli) {
        Ok(outcome) => {
            let written = match &out_path {
                Some(p) => fs::write(p, &outcome.text).map_err(|e| format!("cannot write {}: {e}", p.display())),
                None => {
                    print!("{}", outcome.text);
                    Ok(())
                }
            };
            if let Err(m) = written {
                eprintln!("error: {m}");
                return ExitCode::from(1);
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed");
                ExitCode::from(3)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
