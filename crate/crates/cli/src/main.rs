//! Command-line front end for the cachefield library.
//!
//! Exit codes: 0 on success, 2 on usage errors (clap), 1 on computation
//! errors. `--out` writes the output to a file and drops a manifest
//! `<path>.manifest.json` recording the resolved configuration, seeds, tool
//! version, and output digests; re-running a manifest's command line
//! reproduces the outputs bit for bit.

mod manifest;

use std::fmt::Write as _;
use std::io::BufReader;
use std::process::ExitCode;

use cachefield::analysis::{self, SCPVector};
use cachefield::popularity::{
    self, ModelConfig, ModelKind, PopularityVector, Predictor, RateModel, RequestTrace,
    DEFAULT_GAUSSIAN_SIGMA, DEFAULT_SHOT_NOISE_DECAY,
};
use cachefield::schemes::{self, LruConditionalTable, SchemeSpec};
use cachefield::simulator::{self, SimConfig};
use cachefield::state_space::StateSpace;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use manifest::OutputSink;

#[derive(Parser)]
#[command(
    name = "cachefield",
    version,
    about = "Cache replacement analysis and simulation under time-varying popularity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a cache state space
    Space(SpaceArgs),
    /// Export an overall transition matrix as coordinate-list CSV
    Theta(ThetaArgs),
    /// Sample the transition field on the SCP simplex (3-state spaces)
    Field(FieldArgs),
    /// Evolve the state caching probabilities through a popularity sequence
    Evolve(EvolveArgs),
    /// Average hit probability of a popularity sequence, direct and via fields
    Hitprob(EvolveArgs),
    /// One-step hit-probability delta at a given SCP point
    Dgamma(DgammaArgs),
    /// Worst-case bounds on the one-step delta
    Bounds(BoundsArgs),
    /// Steady state under constant popularity
    Steady(SteadyArgs),
    /// Generate a request trace and a sidecar with the sampled model
    Gen(GenArgs),
    /// Estimate the hit ratio over seeded simulation rounds
    Sim(SimArgs),
    /// Sweep the onset spread, running every scheme on paired traces
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SchemeArgs {
    /// Replacement scheme: rr | lp | tlpa | tlpp | lru
    #[arg(long)]
    scheme: String,
    /// Per-content conditional replacement probability for RR (0 <= phi <= 1/L)
    #[arg(long)]
    phi: Option<f64>,
    /// Replacement probability for LP (0 < alpha <= 1)
    #[arg(long)]
    alpha: Option<f64>,
    /// Requests used to estimate the LRU recency table
    #[arg(long, default_value_t = 1_000_000)]
    lru_requests: usize,
}

impl SchemeArgs {
    fn build(&self) -> Result<SchemeSpec, String> {
        parse_scheme(&self.scheme, self.phi, self.alpha)
    }
}

fn parse_scheme(name: &str, phi: Option<f64>, alpha: Option<f64>) -> Result<SchemeSpec, String> {
    match name {
        "rr" => Ok(SchemeSpec::Rr {
            phi: phi.ok_or("rr requires --phi")?,
        }),
        "lp" => Ok(SchemeSpec::Lp {
            alpha: alpha.ok_or("lp requires --alpha")?,
        }),
        "tlpa" => Ok(SchemeSpec::TlpA),
        "tlpp" => Ok(SchemeSpec::TlpP),
        "lru" => Ok(SchemeSpec::Lru),
        other => Err(format!("unknown scheme '{other}'")),
    }
}

fn parse_vector(text: &str) -> Result<PopularityVector, String> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| format!("bad vector '{text}': {e}"))?;
    PopularityVector::new(values).map_err(|e| e.to_string())
}

fn parse_raw_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| format!("bad vector '{text}': {e}"))
}

fn read_vector_file(path: &str) -> Result<Vec<PopularityVector>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_vector)
        .collect()
}

/// Builds the LRU recency table when the scheme needs one, estimated from a
/// seeded recency simulation under the given constant popularity.
fn lru_table_for(
    scheme: &SchemeSpec,
    space: &StateSpace,
    upsilon: &PopularityVector,
    requests: usize,
    seed: u64,
) -> Result<Option<LruConditionalTable>, cachefield::Error> {
    if matches!(scheme, SchemeSpec::Lru) {
        Ok(Some(LruConditionalTable::estimate_monte_carlo(
            space, upsilon, requests, seed,
        )?))
    } else {
        Ok(None)
    }
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long)]
    contents: usize,
    #[arg(long)]
    cache: usize,
    /// Print the full state list as a JSON array of sorted id arrays
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ThetaArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    cache: usize,
    /// Popularity vector at the current request, comma-separated
    #[arg(long)]
    upsilon: String,
    /// Predicted popularity for the next request (defaults to --upsilon)
    #[arg(long)]
    prediction: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    cache: usize,
    #[arg(long = "upsilon-n")]
    upsilon_n: String,
    #[arg(long = "upsilon-next")]
    upsilon_next: String,
    /// Prediction for the next request (defaults to --upsilon-next)
    #[arg(long)]
    prediction: Option<String>,
    #[arg(long = "grid-step", default_value_t = 0.05)]
    grid_step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    cache: usize,
    /// File with one popularity vector per line
    #[arg(long = "upsilon-file")]
    upsilon_file: String,
    /// File with one prediction vector per line (defaults to accurate)
    #[arg(long = "prediction-file")]
    prediction_file: Option<String>,
    /// Initial SCP, comma-separated (defaults to uniform)
    #[arg(long)]
    eta0: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct DgammaArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    cache: usize,
    #[arg(long = "upsilon-n", conflicts_with = "upsilon_file")]
    upsilon_n: Option<String>,
    #[arg(long = "upsilon-next", conflicts_with = "upsilon_file")]
    upsilon_next: Option<String>,
    /// Popularity sequence file: emits one per-step delta along the evolution
    #[arg(long = "upsilon-file")]
    upsilon_file: Option<String>,
    #[arg(long)]
    prediction: Option<String>,
    /// SCP point, comma-separated (defaults to uniform)
    #[arg(long)]
    eta: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    cache: usize,
    #[arg(long = "upsilon-n")]
    upsilon_n: String,
    #[arg(long)]
    prediction: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SteadyArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    cache: usize,
    #[arg(long, conflicts_with = "upsilon_file")]
    upsilon: Option<String>,
    /// Popularity vectors, one per line: emits one steady state per vector
    #[arg(long = "upsilon-file")]
    upsilon_file: Option<String>,
    #[arg(long)]
    prediction: Option<String>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = 1_000_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ModelArgs {
    /// Rate model: shotnoise | gaussian | static
    #[arg(long, default_value = "shotnoise")]
    model: String,
    #[arg(long, default_value_t = 100)]
    contents: usize,
    #[arg(long = "t0-max", default_value_t = 0.0)]
    t0_max: f64,
    #[arg(long = "a-min", default_value_t = 1.0)]
    a_min: f64,
    #[arg(long = "a-max", default_value_t = 100.0)]
    a_max: f64,
    /// Shot-noise decay rate (1/s)
    #[arg(long = "decay-b", default_value_t = DEFAULT_SHOT_NOISE_DECAY)]
    decay_b: f64,
    /// Gaussian pulse width (s)
    #[arg(long, default_value_t = DEFAULT_GAUSSIAN_SIGMA)]
    sigma: f64,
    /// Popularity vector for the static model
    #[arg(long)]
    upsilon: Option<String>,
}

impl ModelArgs {
    fn build(&self) -> Result<ModelConfig, String> {
        let kind = match self.model.as_str() {
            "shotnoise" => ModelKind::ShotNoise {
                decay: self.decay_b,
            },
            "gaussian" => ModelKind::GaussianPulse { sigma: self.sigma },
            "static" => {
                let text = self
                    .upsilon
                    .as_ref()
                    .ok_or("static model requires --upsilon")?;
                ModelKind::Static(parse_vector(text)?)
            }
            other => return Err(format!("unknown model '{other}'")),
        };
        let n_contents = match &kind {
            ModelKind::Static(v) => v.len(),
            _ => self.contents,
        };
        Ok(ModelConfig {
            n_contents,
            t0_max: self.t0_max,
            a_min: self.a_min,
            a_max: self.a_max,
            kind,
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV path; the sampled model parameters land next to it
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct PredictorArgs {
    /// Predictor: oracle | stale:<k> | constant (requires --constant-prediction)
    #[arg(long, default_value = "oracle")]
    predictor: String,
    /// Fixed prediction vector for the constant predictor
    #[arg(long = "constant-prediction")]
    constant_prediction: Option<String>,
    /// Predict at the next request's timestamp (on) or the current one (off)
    #[arg(long = "prediction-lookahead", default_value = "on")]
    lookahead: String,
}

impl PredictorArgs {
    fn build(&self) -> Result<(Predictor, bool), String> {
        let predictor = if self.predictor == "oracle" {
            Predictor::Oracle
        } else if let Some(k) = self.predictor.strip_prefix("stale:") {
            Predictor::StaleEveryK(k.parse().map_err(|e| format!("bad stale period: {e}"))?)
        } else if self.predictor == "constant" {
            let text = self
                .constant_prediction
                .as_ref()
                .ok_or("constant predictor requires --constant-prediction")?;
            Predictor::Constant(parse_vector(text)?)
        } else {
            return Err(format!("unknown predictor '{}'", self.predictor));
        };
        let lookahead = match self.lookahead.as_str() {
            "on" => true,
            "off" => false,
            other => {
                return Err(format!(
                    "--prediction-lookahead must be on|off, got '{other}'"
                ))
            }
        };
        Ok((predictor, lookahead))
    }
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    cache: usize,
    /// Replay an existing trace CSV instead of sampling models
    #[arg(long)]
    trace: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 300.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated schemes, each name[:param], e.g. rr:0.09,lp:0.9,tlpa,lru
    #[arg(long)]
    schemes: String,
    #[arg(long)]
    cache: usize,
    /// Comma-separated onset spreads to sweep
    #[arg(long)]
    t0: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 300.0)]
    horizon: f64,
    #[arg(long, default_value_t = 50)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Space(args) => cmd_space(args),
        Command::Theta(args) => cmd_theta(args),
        Command::Field(args) => cmd_field(args),
        Command::Evolve(args) => cmd_evolve(args, false),
        Command::Hitprob(args) => cmd_evolve(args, true),
        Command::Dgamma(args) => cmd_dgamma(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Steady(args) => cmd_steady(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Sim(args) => cmd_sim(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn cmd_space(args: SpaceArgs) -> Result<(), String> {
    let space = StateSpace::build(args.contents, args.cache).map_err(err)?;
    let mut body = format!("N_s = {}\n", space.n_states());
    if args.json {
        let states: Vec<Vec<usize>> = space
            .states()
            .iter()
            .map(|s| s.contents().iter().map(|c| c.index()).collect())
            .collect();
        body.push_str(&serde_json::to_string_pretty(&states).map_err(err)?);
        body.push('\n');
    }
    let config = json!({
        "command": "space",
        "contents": args.contents,
        "cache": args.cache,
        "json": args.json,
    });
    OutputSink::new(args.out).write(&body, &config, &[])
}

fn cmd_theta(args: ThetaArgs) -> Result<(), String> {
    let scheme = args.scheme.build()?;
    let upsilon = parse_vector(&args.upsilon)?;
    let prediction = match &args.prediction {
        Some(text) => parse_vector(text)?,
        None => upsilon.clone(),
    };
    let space = StateSpace::build(upsilon.len(), args.cache).map_err(err)?;
    let table = lru_table_for(&scheme, &space, &upsilon, args.scheme.lru_requests, args.seed)
        .map_err(err)?;
    let theta =
        schemes::overall_transition(&scheme, &space, &upsilon, Some(&prediction), table.as_ref())
            .map_err(err)?;
    let body = if args.json {
        let rows: Vec<_> = theta
            .triplets()
            .into_iter()
            .map(|(r, c, v)| json!({"row": r, "col": c, "value": v}))
            .collect();
        format!("{}\n", serde_json::to_string_pretty(&rows).map_err(err)?)
    } else {
        let mut body = String::from("row,col,value\n");
        for (r, c, v) in theta.triplets() {
            writeln!(body, "{r},{c},{v:.17}").unwrap();
        }
        body
    };
    let config = json!({
        "command": "theta",
        "scheme": args.scheme.scheme,
        "phi": args.scheme.phi,
        "alpha": args.scheme.alpha,
        "cache": args.cache,
        "upsilon": args.upsilon,
        "prediction": args.prediction,
        "seed": args.seed,
    });
    OutputSink::new(args.out).write(&body, &config, &[args.seed])
}

fn cmd_field(args: FieldArgs) -> Result<(), String> {
    let scheme = args.scheme.build()?;
    let upsilon_n = parse_vector(&args.upsilon_n)?;
    let upsilon_next = parse_vector(&args.upsilon_next)?;
    let prediction = args.prediction.as_deref().map(parse_vector).transpose()?;
    let space = StateSpace::build(upsilon_n.len(), args.cache).map_err(err)?;
    let table = lru_table_for(
        &scheme,
        &space,
        &upsilon_n,
        args.scheme.lru_requests,
        args.seed,
    )
    .map_err(err)?;
    let samples = analysis::field_grid(
        &scheme,
        &space,
        &upsilon_n,
        &upsilon_next,
        prediction.as_ref(),
        table.as_ref(),
        args.grid_step,
    )
    .map_err(err)?;
    let body = if args.json {
        let rows: Vec<_> = samples
            .iter()
            .map(|s| json!({"eta": s.eta, "u": s.u, "d_gamma": s.d_gamma}))
            .collect();
        format!("{}\n", serde_json::to_string_pretty(&rows).map_err(err)?)
    } else {
        let mut body = String::from("eta1,eta2,eta3,u1,u2,u3,d_gamma\n");
        for s in &samples {
            writeln!(
                body,
                "{:.6},{:.6},{:.6},{:.10},{:.10},{:.10},{:.10}",
                s.eta[0], s.eta[1], s.eta[2], s.u[0], s.u[1], s.u[2], s.d_gamma
            )
            .unwrap();
        }
        body
    };
    let config = json!({
        "command": "field",
        "scheme": args.scheme.scheme,
        "phi": args.scheme.phi,
        "alpha": args.scheme.alpha,
        "cache": args.cache,
        "upsilon_n": args.upsilon_n,
        "upsilon_next": args.upsilon_next,
        "grid_step": args.grid_step,
        "seed": args.seed,
    });
    OutputSink::new(args.out).write(&body, &config, &[args.seed])
}

fn cmd_evolve(args: EvolveArgs, hitprob_only: bool) -> Result<(), String> {
    let scheme = args.scheme.build()?;
    let seq = read_vector_file(&args.upsilon_file)?;
    if seq.is_empty() {
        return Err("empty popularity sequence".into());
    }
    let predictions = args
        .prediction_file
        .as_deref()
        .map(read_vector_file)
        .transpose()?;
    let space = StateSpace::build(seq[0].len(), args.cache).map_err(err)?;
    let eta0 = match &args.eta0 {
        Some(text) => SCPVector::new(parse_raw_vector(text)?).map_err(err)?,
        None => SCPVector::uniform(space.n_states()),
    };
    let table = lru_table_for(&scheme, &space, &seq[0], args.scheme.lru_requests, args.seed)
        .map_err(err)?;
    let evo = analysis::evolve_scp(
        &scheme,
        &space,
        &seq,
        predictions.as_deref(),
        &eta0,
        table.as_ref(),
    )
    .map_err(err)?;

    let body = if hitprob_only {
        let n = seq.len();
        let mut scp_seq = vec![eta0.clone()];
        scp_seq.extend(evo.etas[..n - 1].iter().cloned());
        let direct = analysis::average_hit_prob_direct(&seq, &scp_seq, &space).map_err(err)?;
        let via_stf = analysis::average_hit_prob_stf(&seq, &evo.stfs[..n - 1], &eta0, &space)
            .map_err(err)?;
        format!(
            "{}\n",
            serde_json::to_string_pretty(&json!({
                "requests": n,
                "gamma_avg_direct": direct,
                "gamma_avg_stf": via_stf,
            }))
            .map_err(err)?
        )
    } else if args.json {
        let rows: Vec<_> = evo
            .etas
            .iter()
            .zip(&evo.stfs)
            .enumerate()
            .map(|(t, (eta, u))| json!({"step": t + 1, "eta": eta.as_slice(), "u": u.as_slice()}))
            .collect();
        format!("{}\n", serde_json::to_string_pretty(&rows).map_err(err)?)
    } else {
        let mut body = String::from("step");
        for k in 0..space.n_states() {
            write!(body, ",eta{k}").unwrap();
        }
        for k in 0..space.n_states() {
            write!(body, ",u{k}").unwrap();
        }
        body.push('\n');
        for (t, (eta, u)) in evo.etas.iter().zip(&evo.stfs).enumerate() {
            write!(body, "{}", t + 1).unwrap();
            for v in eta.as_slice() {
                write!(body, ",{v:.12}").unwrap();
            }
            for v in u.as_slice() {
                write!(body, ",{v:.12}").unwrap();
            }
            body.push('\n');
        }
        body
    };
    let config = json!({
        "command": if hitprob_only { "hitprob" } else { "evolve" },
        "scheme": args.scheme.scheme,
        "phi": args.scheme.phi,
        "alpha": args.scheme.alpha,
        "cache": args.cache,
        "upsilon_file": args.upsilon_file,
        "prediction_file": args.prediction_file,
        "eta0": args.eta0,
        "seed": args.seed,
    });
    OutputSink::new(args.out).write(&body, &config, &[args.seed])
}

fn cmd_dgamma(args: DgammaArgs) -> Result<(), String> {
    let scheme = args.scheme.build()?;

    let body = if let Some(path) = &args.upsilon_file {
        // per-step deltas along the evolution through the sequence
        let seq = read_vector_file(path)?;
        if seq.len() < 2 {
            return Err("the popularity sequence needs at least two vectors".into());
        }
        let space = StateSpace::build(seq[0].len(), args.cache).map_err(err)?;
        let eta0 = match &args.eta {
            Some(text) => SCPVector::new(parse_raw_vector(text)?).map_err(err)?,
            None => SCPVector::uniform(space.n_states()),
        };
        let table =
            lru_table_for(&scheme, &space, &seq[0], args.scheme.lru_requests, args.seed)
                .map_err(err)?;
        let evo = analysis::evolve_scp(&scheme, &space, &seq, None, &eta0, table.as_ref())
            .map_err(err)?;
        let mut body = String::from("step,d_gamma\n");
        for t in 0..seq.len() - 1 {
            let d = analysis::hit_prob_delta(&seq[t + 1], &space, &evo.stfs[t]).map_err(err)?;
            writeln!(body, "{},{d:.12}", t + 1).unwrap();
        }
        body
    } else {
        let upsilon_n = parse_vector(
            args.upsilon_n
                .as_deref()
                .ok_or("dgamma needs --upsilon-n or --upsilon-file")?,
        )?;
        let upsilon_next = parse_vector(
            args.upsilon_next
                .as_deref()
                .ok_or("dgamma needs --upsilon-next or --upsilon-file")?,
        )?;
        let prediction = match &args.prediction {
            Some(text) => parse_vector(text)?,
            None => upsilon_next.clone(),
        };
        let space = StateSpace::build(upsilon_n.len(), args.cache).map_err(err)?;
        let eta = match &args.eta {
            Some(text) => SCPVector::new(parse_raw_vector(text)?).map_err(err)?,
            None => SCPVector::uniform(space.n_states()),
        };
        let table = lru_table_for(
            &scheme,
            &space,
            &upsilon_n,
            args.scheme.lru_requests,
            args.seed,
        )
        .map_err(err)?;
        let theta = schemes::overall_transition(
            &scheme,
            &space,
            &upsilon_n,
            Some(&prediction),
            table.as_ref(),
        )
        .map_err(err)?;
        let u = analysis::instantaneous_stf(&theta, &eta).map_err(err)?;
        let d = analysis::hit_prob_delta(&upsilon_next, &space, &u).map_err(err)?;
        format!(
            "{}\n",
            serde_json::to_string_pretty(&json!({"d_gamma": d})).map_err(err)?
        )
    };
    let config = json!({
        "command": "dgamma",
        "scheme": args.scheme.scheme,
        "phi": args.scheme.phi,
        "alpha": args.scheme.alpha,
        "cache": args.cache,
        "upsilon_n": args.upsilon_n,
        "upsilon_next": args.upsilon_next,
        "upsilon_file": args.upsilon_file,
        "eta": args.eta,
        "seed": args.seed,
    });
    OutputSink::new(args.out).write(&body, &config, &[args.seed])
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), String> {
    let scheme = args.scheme.build()?;
    let upsilon_n = parse_vector(&args.upsilon_n)?;
    let prediction = args.prediction.as_deref().map(parse_vector).transpose()?;
    let (lower, upper) =
        analysis::delta_bounds(&scheme, &upsilon_n, prediction.as_ref(), args.cache)
            .map_err(err)?;
    let body = format!(
        "{}\n",
        serde_json::to_string_pretty(&json!({"lower": lower, "upper": upper})).map_err(err)?
    );
    let config = json!({
        "command": "bounds",
        "scheme": args.scheme.scheme,
        "phi": args.scheme.phi,
        "alpha": args.scheme.alpha,
        "cache": args.cache,
        "upsilon_n": args.upsilon_n,
        "prediction": args.prediction,
    });
    OutputSink::new(args.out).write(&body, &config, &[])
}

fn cmd_steady(args: SteadyArgs) -> Result<(), String> {
    let scheme = args.scheme.build()?;
    let vectors = if let Some(path) = &args.upsilon_file {
        read_vector_file(path)?
    } else {
        vec![parse_vector(
            args.upsilon
                .as_deref()
                .ok_or("steady needs --upsilon or --upsilon-file")?,
        )?]
    };
    if vectors.is_empty() {
        return Err("empty popularity input".into());
    }
    let space = StateSpace::build(vectors[0].len(), args.cache).map_err(err)?;
    let mut steady = Vec::with_capacity(vectors.len());
    for upsilon in &vectors {
        let prediction = match &args.prediction {
            Some(text) => Some(parse_vector(text)?),
            None => scheme.needs_prediction().then(|| upsilon.clone()),
        };
        let table =
            lru_table_for(&scheme, &space, upsilon, args.scheme.lru_requests, args.seed)
                .map_err(err)?;
        steady.push(
            analysis::steady_state(
                &scheme,
                &space,
                upsilon,
                prediction.as_ref(),
                table.as_ref(),
                args.tol,
                args.max_iters,
            )
            .map_err(err)?,
        );
    }
    let body = if args.json {
        let rows: Vec<_> = steady.iter().map(|eta| json!(eta.as_slice())).collect();
        if rows.len() == 1 {
            format!("{}\n", serde_json::to_string_pretty(&rows[0]).map_err(err)?)
        } else {
            format!("{}\n", serde_json::to_string_pretty(&rows).map_err(err)?)
        }
    } else if steady.len() == 1 {
        let mut body = String::from("state,eta\n");
        for (k, v) in steady[0].as_slice().iter().enumerate() {
            writeln!(body, "{k},{v:.12}").unwrap();
        }
        body
    } else {
        let mut body = String::from("input");
        for k in 0..space.n_states() {
            write!(body, ",eta{k}").unwrap();
        }
        body.push('\n');
        for (i, eta) in steady.iter().enumerate() {
            write!(body, "{i}").unwrap();
            for v in eta.as_slice() {
                write!(body, ",{v:.12}").unwrap();
            }
            body.push('\n');
        }
        body
    };
    let config = json!({
        "command": "steady",
        "scheme": args.scheme.scheme,
        "phi": args.scheme.phi,
        "alpha": args.scheme.alpha,
        "cache": args.cache,
        "upsilon": args.upsilon,
        "upsilon_file": args.upsilon_file,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "seed": args.seed,
    });
    OutputSink::new(args.out).write(&body, &config, &[args.seed])
}

fn cmd_gen(args: GenArgs) -> Result<(), String> {
    let config = args.model.build()?;
    let model = popularity::sample_model(&config, args.seed).map_err(err)?;
    let trace = popularity::sample_trace(&model, args.horizon, args.seed).map_err(err)?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).map_err(err)?;

    let params = match &model {
        RateModel::ShotNoise { contents } => json!({
            "model": "shotnoise",
            "contents": contents
                .iter()
                .map(|c| json!({"amplitude": c.amplitude, "decay": c.decay, "onset": c.onset}))
                .collect::<Vec<_>>(),
        }),
        RateModel::GaussianPulse { contents, sigma } => json!({
            "model": "gaussian",
            "sigma": sigma,
            "contents": contents
                .iter()
                .map(|c| json!({"amplitude": c.amplitude, "peak": c.peak}))
                .collect::<Vec<_>>(),
        }),
        RateModel::Static(v) => json!({"model": "static", "upsilon": v.as_slice()}),
        RateModel::Piecewise(_) => json!({"model": "piecewise"}),
    };
    let sidecar_path = format!("{}.params.json", args.out);
    let sidecar = format!("{}\n", serde_json::to_string_pretty(&params).map_err(err)?);

    let resolved = json!({
        "command": "gen",
        "model": args.model.model,
        "contents": config.n_contents,
        "t0_max": args.model.t0_max,
        "a_min": args.model.a_min,
        "a_max": args.model.a_max,
        "decay_b": args.model.decay_b,
        "sigma": args.model.sigma,
        "horizon": args.horizon,
        "seed": args.seed,
        "requests": trace.len(),
    });
    OutputSink::new(Some(args.out)).write_many(
        &[
            (String::from_utf8(csv).map_err(err)?, None),
            (sidecar, Some(sidecar_path)),
        ],
        &resolved,
        &[args.seed],
    )
}

fn load_trace(path: &str) -> Result<RequestTrace, String> {
    let file = std::fs::File::open(path).map_err(|e| format!("{path}: {e}"))?;
    RequestTrace::read_csv(BufReader::new(file)).map_err(err)
}

fn cmd_sim(args: SimArgs) -> Result<(), String> {
    let scheme = args.scheme.build()?;
    let (predictor, lookahead) = args.predictor.build()?;

    let result = if let Some(trace_path) = &args.trace {
        let trace = load_trace(trace_path)?;
        let model = popularity::sample_model(&args.model.build()?, args.seed).map_err(err)?;
        let run_config = simulator::TraceRunConfig {
            scheme: scheme.clone(),
            cache_size: args.cache,
            lookahead,
        };
        let hits = simulator::run_trace(&run_config, &trace, &model, &predictor, args.seed)
            .map_err(err)?;
        let ratio = if hits.is_empty() {
            0.0
        } else {
            hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
        };
        json!({
            "mean": ratio,
            "stderr": 0.0,
            "rounds": 1,
            "requests": hits.len(),
        })
    } else {
        let config = SimConfig {
            model_config: args.model.build()?,
            horizon: args.horizon,
            rounds: args.rounds,
            cache_size: args.cache,
            master_seed: args.seed,
            predictor,
            lookahead,
        };
        let result = simulator::run_monte_carlo(&scheme, &config).map_err(err)?;
        json!({
            "mean": result.mean,
            "stderr": result.stderr,
            "rounds": config.rounds,
            "requests": result.total_requests,
        })
    };
    let body = format!("{}\n", serde_json::to_string_pretty(&result).map_err(err)?);
    let config = json!({
        "command": "sim",
        "scheme": args.scheme.scheme,
        "phi": args.scheme.phi,
        "alpha": args.scheme.alpha,
        "cache": args.cache,
        "trace": args.trace,
        "model": args.model.model,
        "contents": args.model.contents,
        "horizon": args.horizon,
        "rounds": args.rounds,
        "seed": args.seed,
        "predictor": args.predictor.predictor,
        "lookahead": args.predictor.lookahead,
    });
    OutputSink::new(args.out).write(&body, &config, &[args.seed])
}

fn parse_scheme_list(text: &str) -> Result<Vec<(String, SchemeSpec)>, String> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let (name, param) = match item.split_once(':') {
                Some((n, p)) => {
                    let value: f64 = p.parse().map_err(|e| format!("bad parameter '{p}': {e}"))?;
                    (n, Some(value))
                }
                None => (item, None),
            };
            let scheme = match name {
                "rr" => parse_scheme("rr", param, None)?,
                "lp" => parse_scheme("lp", None, param)?,
                other => parse_scheme(other, None, None)?,
            };
            Ok((item.to_string(), scheme))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<(), String> {
    let schemes = parse_scheme_list(&args.schemes)?;
    let t0_values: Vec<f64> = args
        .t0
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad t0 list: {e}"))?;
    let (predictor, lookahead) = args.predictor.build()?;
    let config = SimConfig {
        model_config: args.model.build()?,
        horizon: args.horizon,
        rounds: args.rounds,
        cache_size: args.cache,
        master_seed: args.seed,
        predictor,
        lookahead,
    };
    let rows = simulator::sweep_t0max(&schemes, &config, &t0_values).map_err(err)?;
    let body = if args.json {
        let rows: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "t0_max": r.t0_max,
                    "scheme": r.scheme,
                    "mean": r.mean,
                    "stderr": r.stderr,
                })
            })
            .collect();
        format!("{}\n", serde_json::to_string_pretty(&rows).map_err(err)?)
    } else {
        let mut body = String::from("t0_max,scheme,mean,stderr\n");
        for r in &rows {
            writeln!(body, "{},{},{:.6},{:.6}", r.t0_max, r.scheme, r.mean, r.stderr).unwrap();
        }
        body
    };
    let config_json = json!({
        "command": "sweep",
        "schemes": args.schemes,
        "cache": args.cache,
        "t0": args.t0,
        "model": args.model.model,
        "contents": args.model.contents,
        "a_min": args.model.a_min,
        "a_max": args.model.a_max,
        "decay_b": args.model.decay_b,
        "sigma": args.model.sigma,
        "horizon": args.horizon,
        "rounds": args.rounds,
        "seed": args.seed,
        "predictor": args.predictor.predictor,
        "lookahead": args.predictor.lookahead,
    });
    OutputSink::new(args.out).write(&body, &config_json, &[args.seed])
}
