use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use signstab::delay::{delay_robust_rates, DelayCertificate, DEFAULT_INFLATION};
use signstab::graph::{build_network, check_condition_i, find_long_cycles, NetworkConfig, SignedNetwork};
use signstab::model::Model;
use signstab::region::Region;
use signstab::sim::{
    contraction_rate, example4_sweep, integrate, integrate_delayed, norm, write_sweep_csv, write_trajectory_csv,
    DelaySpec, EdgeDelay, SweepConfig, Trajectory,
};
use signstab::verify::{
    format_point, render_condition_i, render_condition_iii, render_text, verify_network, ConditionIii, VerifyConfig,
    REPORT_SCHEMA,
};

#[derive(Parser)]
#[command(name = "signstab", version, about = "Sign-stability analysis of networked dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural checks: opposite reciprocal signs and no long cycles.
    Check(Common),
    /// Full verdict with metric construction and LMI certificates.
    Verify(Common),
    /// Integrate a model, or run the periodic-asymmetry sweep.
    Simulate(SimulateArgs),
    /// Delay-independent rate certificate.
    Delay(DelayArgs),
}

#[derive(Args)]
struct Common {
    /// Model file (JSON).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(2..))]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Replace every state interval of the model's region with LO,HI.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "LO,HI")]
    region: Option<Vec<f64>>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Disable the data-parallel sample loops.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Sweep the two-node periodic-asymmetry system over --alphas x --omegas.
    #[arg(long)]
    sweep: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.05, 0.09])]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0])]
    omegas: Vec<f64>,
    /// Initial state (also the constant history for delayed runs).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Override the model's delay values, in declaration order.
    #[arg(long, value_delimiter = ',')]
    delays: Option<Vec<f64>>,
    /// Second initial state; the contraction rate between the two runs is
    /// printed to stderr.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    compare: Option<Vec<f64>>,
}

#[derive(Args)]
struct DelayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    delays: Option<Vec<f64>>,
    /// Safety factor on sampled bounds.
    #[arg(long, default_value_t = DEFAULT_INFLATION)]
    inflation: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
}

type Outcome = Result<ExitCode, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(c) => cmd_check(c),
        Command::Verify(c) => cmd_verify(c),
        Command::Simulate(s) => cmd_simulate(s),
        Command::Delay(d) => cmd_delay(d),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn verdict_code(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn load(common: &Common) -> Result<Model, Failure> {
    let path = common.input.as_ref().ok_or_else(|| usage("--input is required"))?;
    let mut model = Model::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(r) = &common.region {
        if r.len() != 2 {
            return Err(usage("--region takes LO,HI"));
        }
        let x = vec![(r[0], r[1]); model.dim()];
        model.region = Region::new(x, model.region.t).map_err(|e| usage(format!("--region: {e}")))?;
    }
    Ok(model)
}

fn network(common: &Common, model: &Model) -> Result<SignedNetwork, Failure> {
    let config = NetworkConfig {
        samples: common.samples as usize,
        seed: common.seed,
        parallel: !common.sequential,
        ..NetworkConfig::default()
    };
    build_network(&model.dynamics, &model.region, &config).map_err(|e| usage(e.to_string()))
}

fn emit(output: Option<&Path>, content: &str) -> Result<(), Failure> {
    match output {
        Some(p) => std::fs::write(p, content).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(content.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn cmd_check(c: &Common) -> Outcome {
    let model = load(c)?;
    let net = network(c, &model)?;
    let i = check_condition_i(&net);
    let search = find_long_cycles(&net.digraph(), signstab::graph::DEFAULT_CYCLE_CAP);
    let iii = ConditionIii { satisfied: search.is_empty(), search };
    let admissible = i.satisfied && iii.satisfied;
    let content = match c.format.unwrap_or(Format::Text) {
        Format::Json => to_json(&json!({
            "schema": REPORT_SCHEMA,
            "name": model.name,
            "admissible": admissible,
            "condition_i": i,
            "condition_iii": iii,
        })),
        Format::Text => {
            let mut out = String::new();
            render_condition_i(&mut out, &i);
            render_condition_iii(&mut out, &iii);
            out.push_str(if admissible { "sign pattern admissible\n" } else { "sign pattern not admissible\n" });
            out
        }
        Format::Csv => return Err(usage("check does not produce CSV")),
    };
    emit(c.output.as_deref(), &content)?;
    Ok(verdict_code(admissible))
}

fn cmd_verify(c: &Common) -> Outcome {
    let model = load(c)?;
    let net = network(c, &model)?;
    let config = VerifyConfig { network: net.config().clone(), ..VerifyConfig::default() };
    let mut report = verify_network(&net, &config, model.block_metric.as_ref());
    report.name = model.name.clone();
    if !model.delays.is_empty() {
        match delay_robust_rates(&net, &model.delays, DEFAULT_INFLATION) {
            Ok(cert) => report.delay = Some(cert),
            Err(e) => report.errors.push(signstab::verify::StageError { stage: "delay".into(), message: e.to_string() }),
        }
    }
    let format = c.format.unwrap_or(if c.output.is_some() { Format::Json } else { Format::Text });
    let content = match format {
        Format::Json => to_json(&report),
        Format::Text => render_text(&report),
        Format::Csv => return Err(usage("verify does not produce CSV")),
    };
    emit(c.output.as_deref(), &content)?;
    if c.output.is_some() {
        eprintln!("{}", report.verdict);
    }
    Ok(verdict_code(report.sign_stable))
}

fn override_delays(model: &Model, values: Option<&Vec<f64>>) -> Result<Vec<EdgeDelay>, Failure> {
    let Some(values) = values else { return Ok(model.delays.clone()) };
    if model.delays.is_empty() {
        return Err(usage("--delays given but the model declares no delayed edges (add a \"delays\" field)"));
    }
    if values.len() != model.delays.len() {
        return Err(usage(format!("--delays has {} values, the model declares {} delayed edges", values.len(), model.delays.len())));
    }
    Ok(model.delays.iter().zip(values).map(|(d, &delay)| EdgeDelay { delay, ..*d }).collect())
}

fn cmd_simulate(s: &SimulateArgs) -> Outcome {
    let c = &s.common;
    if !matches!(c.format, None | Some(Format::Csv)) {
        return Err(usage("simulate writes CSV only"));
    }
    let dt = s.dt.unwrap_or(1e-2);
    if s.sweep {
        let config = SweepConfig {
            x0: s.x0.clone().unwrap_or_else(|| SweepConfig::default().x0),
            t_end: s.t_end.unwrap_or(2000.0),
            dt,
            ..SweepConfig::default()
        };
        if config.x0.len() != 2 {
            return Err(usage("--x0 for the sweep needs two values"));
        }
        let cells = example4_sweep(&s.alphas, &s.omegas, &config, !c.sequential).map_err(|e| usage(e.to_string()))?;
        let mut buf = Vec::new();
        write_sweep_csv(&cells, &mut buf).map_err(|e| Failure::Io(e.to_string()))?;
        emit(c.output.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))?;
        return Ok(ExitCode::SUCCESS);
    }

    let model = load(c)?;
    let t_end = s.t_end.unwrap_or(50.0);
    let delays = override_delays(&model, s.delays.as_ref())?;
    let x0 = s
        .x0
        .clone()
        .or_else(|| model.history.clone())
        .or_else(|| model.x0.clone())
        .ok_or_else(|| usage("no initial state: pass --x0 or set \"x0\" in the model"))?;
    let run = |x0: Vec<f64>| -> Result<Trajectory, Failure> {
        let tr = if delays.is_empty() {
            integrate(&model.dynamics, &x0, 0.0, t_end, dt)
        } else {
            let spec = DelaySpec::new(delays.clone(), x0).map_err(|e| usage(e.to_string()))?;
            integrate_delayed(&model.dynamics, &spec, 0.0, t_end, dt)
        };
        tr.map_err(|e| usage(e.to_string()))
    };
    let tr = run(x0)?;
    if tr.diverged {
        eprintln!("warning: trajectory diverged at t = {}", tr.end_time());
    }
    if let Some(e) = &tr.error {
        eprintln!("warning: integration stopped at t = {}: {e}", tr.end_time());
    }
    if let Some(other) = &s.compare {
        let tr2 = run(other.clone())?;
        match contraction_rate(&tr, &tr2, (0.0, t_end)) {
            Ok(r) => eprintln!("contraction rate {:.6} (fit residual {:.3e}, {} points)", r.rate, r.residual, r.points),
            Err(e) => eprintln!("warning: no contraction rate: {e}"),
        }
    }
    eprintln!("final norm {:.6e} at t = {}", norm(tr.last()), tr.end_time());
    match c.output.as_deref() {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            write_trajectory_csv(&tr, io::BufWriter::new(f)).map_err(|e| Failure::Io(e.to_string()))?;
        }
        None => write_trajectory_csv(&tr, io::stdout().lock()).map_err(|e| Failure::Io(e.to_string()))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn render_delay(name: Option<&str>, cert: &DelayCertificate) -> String {
    let mut out = String::new();
    if let Some(n) = name {
        out.push_str(&format!("model: {n}\n"));
    }
    out.push_str(&format!(
        "delay certificate: {}\n",
        if cert.satisfied { "satisfied" } else { "not satisfied" }
    ));
    out.push_str(&format!("Gamma = {} (sampled over {} points, inflation {})\n", cert.gamma.gamma, cert.gamma.points, cert.inflation));
    for t in &cert.nodes {
        out.push_str(&format!(
            "  x{}: rate {:.6} vs required {:.6}, margin {:.6}{}\n",
            t.node + 1,
            t.actual,
            t.required,
            t.margin,
            if t.satisfied { String::new() } else { format!("  FAILED at {}", format_point(&t.point)) }
        ));
    }
    if let Some(q) = &cert.nyquist {
        out.push_str(&format!(
            "Nyquist peak |L(iw)| = {:.6} at w = {} ({})\n",
            q.peak,
            q.omega,
            if q.certified { "certified" } else { "not certified" }
        ));
    }
    out.push_str(&format!("note: {}\n", cert.note));
    out
}

fn cmd_delay(d: &DelayArgs) -> Outcome {
    let c = &d.common;
    let model = load(c)?;
    if model.delays.is_empty() {
        return Err(usage(
            "the model declares no delayed edges; add \"delays\": [{\"from\": j, \"to\": i, \"delay\": T}] to the model",
        ));
    }
    let delays = override_delays(&model, d.delays.as_ref())?;
    let net = network(c, &model)?;
    let cert = match delay_robust_rates(&net, &delays, d.inflation) {
        Ok(cert) => cert,
        Err(e) => {
            eprintln!("no delay certificate: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    let content = match c.format.unwrap_or(Format::Text) {
        Format::Json => to_json(&json!({ "schema": REPORT_SCHEMA, "name": model.name, "delay": cert })),
        Format::Text => render_delay(model.name.as_deref(), &cert),
        Format::Csv => return Err(usage("delay does not produce CSV")),
    };
    emit(c.output.as_deref(), &content)?;
    Ok(verdict_code(cert.satisfied))
}
