use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use delaynet::feasibility::{self, SearchOptions};
use delaynet::galois::Field;
use delaynet::netmodel::{self, LecAssignment, NetworkSpec};
use delaynet::onoff;
use delaynet::par::Exec;
use delaynet::pbna::{self, BlockDemands, PbnaInstance, Strategy};
use delaynet::symbolic::trial_rng;
use delaynet::transform::{self, DftCtx};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "delaynet", version, about = "Linear network coding over delay networks")]
struct Cli {
    /// Field for the network, e.g. "2^6:1+x+x^6"; overrides the file's field.
    #[arg(long, global = true, env = "DELAYNET_FIELD")]
    field: Option<String>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Disable data-parallel trial search.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transfer matrices M_ij(D), numeric or symbolic.
    ComputeTransfer {
        network: PathBuf,
        #[command(flatten)]
        lecs: LecArg,
    },
    /// Zero-interference, invertibility and transform feasibility.
    CheckFeasibility {
        network: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Classical)]
        mode: Mode,
        #[command(flatten)]
        lecs: LecArg,
        /// Block length for --mode transform.
        #[arg(long)]
        n: Option<usize>,
        /// DFT root for --mode transform; chosen automatically when absent.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long, default_value_t = 24)]
        max_degree: u32,
        #[arg(long, default_value_t = 4096)]
        max_n: u64,
        /// Largest acceptable d_max / n for --mode search.
        #[arg(long, default_value_t = 1.0)]
        rate_loss: f64,
    },
    /// Cyclic-prefix transform through the register simulator.
    TransformSimulate {
        network: PathBuf,
        #[command(flatten)]
        lecs: LecArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: Option<String>,
        /// JSON {"x": [[...], ...]}: one newest-first block per source.
        #[arg(long)]
        inputs: Option<PathBuf>,
    },
    /// Precoding-based alignment for three unicast sessions.
    PbnaCheck {
        network: PathBuf,
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        n2: Option<usize>,
        #[arg(long)]
        n3: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        nprime: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 32)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = StrategyArg::Krylov)]
        strategy: StrategyArg,
        /// Fixed coefficients: "ones" or a JSON file. Random when absent.
        #[arg(long)]
        lecs: Option<String>,
    },
    /// Parity on-off schedule after declared cancellations.
    OnoffCheck {
        network: PathBuf,
        cancellations: PathBuf,
    },
}

#[derive(Args)]
struct LecArg {
    /// "ones", "random", "symbolic" or a JSON file of values.
    #[arg(long, default_value = "ones")]
    lecs: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Classical,
    Transform,
    Search,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "2z")]
    TwoZ,
    #[value(name = "3")]
    Three,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Krylov,
    Free,
}

/// Files read during a run, with their digests.
#[derive(Default)]
struct Inputs {
    digests: Vec<Value>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.digests.push(json!({
            "path": path.display().to_string(),
            "sha256": hex::encode(Sha256::digest(&bytes)),
        }));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }
}

struct Ctx {
    field: Option<Field>,
    seed: u64,
    exec: Exec,
    inputs: Inputs,
}

impl Ctx {
    fn network(&mut self, path: &Path) -> Result<NetworkSpec> {
        let text = self.inputs.read(path)?;
        NetworkSpec::from_json(&text, self.field.as_ref()).with_context(|| format!("parsing {}", path.display()))
    }

    /// None means "leave the coefficients symbolic".
    fn lecs(&mut self, net: &NetworkSpec, spec: &str) -> Result<Option<LecAssignment>> {
        let symbols = net.symbols();
        Ok(match spec {
            "symbolic" => None,
            "ones" => Some(LecAssignment::uniform(&net.field, &symbols, net.field.one())),
            "random" => {
                let mut rng = trial_rng(self.seed, 0);
                Some(LecAssignment::random(&net.field, &symbols, &mut rng))
            }
            path => {
                let text = self.inputs.read(Path::new(path))?;
                Some(LecAssignment::from_json(&text, &net.field).with_context(|| format!("parsing {path}"))?)
            }
        })
    }

    fn numeric_lecs(&mut self, net: &NetworkSpec, spec: &str) -> Result<LecAssignment> {
        match self.lecs(net, spec)? {
            Some(l) => Ok(l),
            None => bail!("this command needs numeric coefficients; use --lecs ones, random or a file"),
        }
    }
}

fn dft_for(net: &NetworkSpec, n: usize, alpha: Option<&str>) -> Result<DftCtx> {
    let a = alpha.map(|s| net.field.parse_element(s)).transpose()?;
    Ok(DftCtx::new(&net.field, n, a)?)
}

fn run(cli: Cli) -> Result<Value> {
    let field = cli.field.as_deref().map(Field::parse).transpose()?;
    let mut ctx = Ctx {
        field,
        seed: cli.seed,
        exec: if cli.sequential { Exec::Sequential } else { Exec::default() },
        inputs: Inputs::default(),
    };
    let (name, field_lit, result) = match cli.command {
        Command::ComputeTransfer { network, lecs } => {
            let net = ctx.network(&network)?;
            let result = match ctx.lecs(&net, &lecs.lecs)? {
                None => {
                    let sym = netmodel::symbolic_transfer(&net)?;
                    json!({
                        "symbolic": true,
                        "d_min": sym.d_min,
                        "grid": sym.grid.iter().map(|row| row.iter().map(|m| format_symbolic(&net.field, m)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    })
                }
                Some(l) => {
                    let ts = netmodel::transfer_matrices(&net, &l)?;
                    let f = &net.field;
                    let dets: Vec<Value> = (0..net.sinks.len())
                        .map(|j| -> Result<Value> {
                            let m = feasibility::demanded_submatrix(&net, &ts, j)?;
                            Ok(json!(delaynet::polymatrix::polymat_det(f, &m)?.format(f)))
                        })
                        .map(|r| r.unwrap_or(Value::Null))
                        .collect();
                    json!({
                        "symbolic": false,
                        "d_min": ts.d_min,
                        "d_max": ts.d_max,
                        "grid": ts.grid.iter().map(|row| row.iter().map(|m| m.format(f)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                        "demanded_determinants": dets,
                    })
                }
            };
            ("compute-transfer", net.field.literal(), result)
        }
        Command::CheckFeasibility {
            network,
            mode,
            lecs,
            n,
            alpha,
            max_degree,
            max_n,
            rate_loss,
        } => {
            let net = ctx.network(&network)?;
            let l = ctx.numeric_lecs(&net, &lecs.lecs)?;
            let rep = match mode {
                Mode::Classical => feasibility::check_classical(&net, &l)?,
                Mode::Transform => {
                    let n = n.context("--mode transform needs --n")?;
                    feasibility::transform_feasible(&net, &l, &dft_for(&net, n, alpha.as_deref())?)?
                }
                Mode::Search => feasibility::exists_transform_code(
                    &net,
                    &l,
                    &SearchOptions {
                        target_rate_loss: rate_loss,
                        max_degree,
                        max_n,
                        exec: ctx.exec,
                    },
                )?,
            };
            ("check-feasibility", net.field.literal(), rep.to_json())
        }
        Command::TransformSimulate {
            network,
            lecs,
            n,
            alpha,
            inputs,
        } => {
            let net = ctx.network(&network)?;
            let l = ctx.numeric_lecs(&net, &lecs.lecs)?;
            let result = transform_simulate(&mut ctx, &net, &l, n, alpha.as_deref(), inputs.as_deref())?;
            ("transform-simulate", net.field.literal(), result)
        }
        Command::PbnaCheck {
            network,
            scheme,
            n1,
            n2,
            n3,
            n,
            nprime,
            k,
            trials,
            strategy,
            lecs,
        } => {
            let net = ctx.network(&network)?;
            let fixed = match lecs.as_deref() {
                None => None,
                Some(spec) => Some(ctx.numeric_lecs(&net, spec)?),
            };
            let inst = PbnaInstance::new(net)?;
            let seed = ctx.seed;
            let exec = ctx.exec;
            let block = || -> Result<BlockDemands> {
                Ok(BlockDemands {
                    n1: n1.context("--n1 is required")?,
                    n2: n2.context("--n2 is required")?,
                    n3: n3.context("--n3 is required")?,
                    n: n.context("--n is required")?,
                })
            };
            let rep = match scheme {
                Scheme::One => pbna::scheme1_check(
                    &inst,
                    nprime.context("--nprime is required")?,
                    trials,
                    seed,
                    fixed.as_ref(),
                    exec,
                )?,
                Scheme::Two => {
                    let s = match strategy {
                        StrategyArg::Krylov => Strategy::Krylov,
                        StrategyArg::Free => Strategy::Free,
                    };
                    pbna::scheme2_check(&inst, block()?, trials, seed, s, fixed.as_ref(), exec)?
                }
                Scheme::TwoZ => {
                    let pair = match inst.zero_pairs().as_slice() {
                        [p] => *p,
                        other => bail!("scheme 2z needs exactly one zero cross min-cut, found {}", other.len()),
                    };
                    pbna::scheme2_mincut0_check(&inst, pair, block()?, trials, seed, fixed.as_ref(), exec)?
                }
                Scheme::Three => {
                    if fixed.is_some() {
                        bail!("scheme 3 draws its own per-block coefficients; drop --lecs");
                    }
                    pbna::scheme3_pipeline(
                        &inst,
                        nprime.context("--nprime is required")?,
                        k.context("--k is required")?,
                        trials,
                        seed,
                        exec,
                    )?
                }
            };
            ("pbna-check", inst.field().literal(), rep.to_json())
        }
        Command::OnoffCheck { network, cancellations } => {
            let net = ctx.network(&network)?;
            let text = ctx.inputs.read(&cancellations)?;
            let rules = onoff::parse_cancellations(&text)?;
            let rep = onoff::onoff_check(&net, &rules, ctx.seed)?;
            ("onoff-check", net.field.literal(), rep.to_json())
        }
    };
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "delaynet",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "seed": ctx.seed,
        "field": field_lit,
        "inputs": ctx.inputs.digests,
        "result": result,
    }))
}

fn transform_simulate(
    ctx: &mut Ctx,
    net: &NetworkSpec,
    lecs: &LecAssignment,
    n: usize,
    alpha: Option<&str>,
    inputs: Option<&Path>,
) -> Result<Value> {
    let f = &net.field;
    let dft = dft_for(net, n, alpha)?;
    let ts = netmodel::transfer_matrices(net, lecs)?;
    let hat = transform::hat_transfer(&ts, &dft)?;
    let x: Vec<Vec<_>> = match inputs {
        Some(p) => {
            let text = ctx.inputs.read(p)?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let rows = v["x"].as_array().context("inputs file needs an \"x\" array")?;
            rows.iter()
                .map(|row| {
                    row.as_array()
                        .context("each source block must be an array")?
                        .iter()
                        .map(|e| {
                            let s = match e {
                                Value::String(s) => s.clone(),
                                other => other.to_string(),
                            };
                            Ok(f.parse_element(&s)?)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?
        }
        None => {
            let mut rng = trial_rng(ctx.seed, 1);
            net.sources
                .iter()
                .map(|s| (0..n * s.processes).map(|_| f.random(&mut rng)).collect())
                .collect()
        }
    };
    if x.len() != net.sources.len() {
        bail!("expected {} source blocks, got {}", net.sources.len(), x.len());
    }
    for (i, s) in net.sources.iter().enumerate() {
        if x[i].len() != n * s.processes {
            bail!("source {} needs {} symbols", net.source_name(i), n * s.processes);
        }
    }
    let run = transform::cp_pipeline(net, lecs, &ts, &dft, &x)?;
    let expect = hat.apply(f, &x);
    // residual[j][t]: nonzero entries of Ŷ_j^(t) − Σ_i M̂_ij^(t) X_i^(t)
    let residuals: Vec<Vec<usize>> = net
        .sinks
        .iter()
        .enumerate()
        .map(|(j, s)| {
            (0..n)
                .map(|p| {
                    (0..s.outputs)
                        .filter(|&o| run.yhat[j][p * s.outputs + o] != expect[j][p * s.outputs + o])
                        .count()
                })
                .collect()
        })
        .collect();
    let all_zero = residuals.iter().flatten().all(|&r| r == 0);
    Ok(json!({
        "n": n,
        "alpha": f.format(dft.alpha),
        "d_min": ts.d_min,
        "d_max": ts.d_max,
        "wire_slots": run.wire_slots,
        "order": "newest-first",
        "residuals": residuals,
        "instantaneous_relation_holds": all_zero,
        "yhat": run.yhat.iter().map(|y| y.iter().map(|v| f.format(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
    }))
}

fn format_symbolic(f: &Field, m: &delaynet::polymatrix::Matrix<delaynet::symbolic::MultiPoly>) -> Vec<Vec<String>> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c).format(f)).collect())
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match run(cli) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            let written = match &out {
                Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
