//! `stable-rank`: batch access to ranking stability analysis.

mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stable_rank::engine::{verify, Engine, EngineKind, EngineParams, VerifyOptions};
use stable_rank::exact2d::Verified;
use stable_rank::sampler::RoiSampler;
use stable_rank::{
    generate_synthetic, Constraint, Dataset, Ranking, RegionOfInterest, ResultMode, RngStream, Schema, SyntheticMode,
    WeightVector,
};

use output::{Format, Sink};

const EXIT_HELP: &str = "\
Exit status:
  0  success (including an engine running out of results)
  1  usage or input error
  2  the ranking to verify is infeasible

STABLE_RANK_THREADS caps the number of worker threads.";

#[derive(Parser, Debug)]
#[command(name = "stable-rank", version, about = "Stability of rankings under linear scoring functions")]
#[command(after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Stability and region of one ranking.
    Verify(VerifyArgs),
    /// List two-attribute ranking regions, most stable first.
    Enumerate2d(EnumerateArgs),
    /// Stream the most stable rankings or top-k results.
    GetNext(GetNextArgs),
    /// Draw weight vectors uniformly from a region of interest.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "id")]
    id_col: String,
    /// Scoring attribute as `expr[:higher|:lower]`, e.g. `log(price):lower`.
    /// Repeat per attribute; defaults to every other column, higher preferred.
    #[arg(long = "attr")]
    attrs: Vec<String>,
    /// Use values as given (they must lie in [0, 1]) instead of min-max normalizing.
    #[arg(long)]
    raw: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset<f64>, String> {
        let attrs: Vec<String> = if self.attrs.is_empty() {
            let mut reader = csv::Reader::from_path(&self.data).map_err(|e| format!("{}: {e}", self.data.display()))?;
            let headers = reader.headers().map_err(|e| format!("{}: {e}", self.data.display()))?;
            headers.iter().map(str::trim).filter(|h| *h != self.id_col).map(String::from).collect()
        } else {
            self.attrs.clone()
        };
        let refs: Vec<&str> = attrs.iter().map(String::as_str).collect();
        let schema = Schema::parse(&self.id_col, &refs).map_err(err)?.with_normalization(!self.raw);
        stable_rank::model::load_dataset_path(&self.data, &schema).map_err(err)
    }
}

#[derive(Args, Debug, Default)]
struct RoiArgs {
    /// Reference weight vector of a cone-shaped region, e.g. `1,1,1`.
    #[arg(long, value_delimiter = ',', requires = "roi_angle")]
    roi_ray: Option<Vec<f64>>,
    /// Maximum angle (radians) to the reference ray.
    #[arg(long, requires = "roi_ray")]
    roi_angle: Option<f64>,
    /// Homogeneous constraint such as `1,-1<=0`; repeatable.
    #[arg(long = "roi-constraint", allow_hyphen_values = true)]
    roi_constraints: Vec<String>,
    /// Angle range `lo,hi` (radians) for two attributes.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    roi_interval: Option<Vec<f64>>,
}

impl RoiArgs {
    fn build(&self, d: usize) -> Result<RegionOfInterest<f64>, String> {
        let styles = [self.roi_ray.is_some(), !self.roi_constraints.is_empty(), self.roi_interval.is_some()];
        if styles.iter().filter(|&&s| s).count() > 1 {
            return Err("give one region of interest style: ray and angle, constraints, or interval".into());
        }
        if let (Some(ray), Some(angle)) = (&self.roi_ray, self.roi_angle) {
            if ray.len() != d {
                return Err(format!("--roi-ray has {} components, expected {d}", ray.len()));
            }
            return RegionOfInterest::cone(WeightVector::from_f64(ray).map_err(err)?, angle).map_err(err);
        }
        if !self.roi_constraints.is_empty() {
            let cs = self
                .roi_constraints
                .iter()
                .map(|c| c.parse::<Constraint<f64>>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            return RegionOfInterest::constraints(d, cs).map_err(err);
        }
        if let Some(iv) = &self.roi_interval {
            if d != 2 {
                return Err("--roi-interval needs two attributes".into());
            }
            let [lo, hi] = iv[..] else {
                return Err("--roi-interval takes `lo,hi`".into());
            };
            return RegionOfInterest::angle_range(lo, hi).map_err(err);
        }
        Ok(RegionOfInterest::full(d))
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// independent, correlated or anti_correlated.
    #[arg(long, default_value = "independent")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    roi: RoiArgs,
    /// Comma-separated ids, best first.
    #[arg(long, conflicts_with_all = ["ranking_file", "weights"])]
    ranking: Option<String>,
    /// File listing ids, best first, separated by commas or newlines.
    #[arg(long, conflicts_with = "weights")]
    ranking_file: Option<PathBuf>,
    /// Verify the ranking produced by these weights.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Sample store size for more than two attributes.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::JsonLines)]
    format: Format,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    roi: RoiArgs,
    /// Stop after this many regions.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
struct GetNextArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    roi: RoiArgs,
    /// 2d, md or random.
    #[arg(long, default_value = "2d")]
    engine: String,
    /// full, topk-set or topk-ranked.
    #[arg(long, default_value = "full")]
    mode: String,
    #[arg(long)]
    k: Option<usize>,
    /// Samples per result (random engine, fixed budget).
    #[arg(long, conflicts_with = "error")]
    budget: Option<u64>,
    /// Target confidence error (random engine, fixed error).
    #[arg(long)]
    error: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample store size (md engine).
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Per-result sample cap of the fixed-error variant.
    #[arg(long, default_value_t = 10_000_000)]
    max_samples: u64,
    /// Samples required before the fixed-error stopping rule applies.
    #[arg(long, default_value_t = 30)]
    min_samples: u64,
    /// Number of results.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Stop before the first result below this stability.
    #[arg(long)]
    min_stability: Option<f64>,
    /// Settle near-empty regions exactly (md engine).
    #[arg(long)]
    exact_fallback: bool,
    #[arg(long, value_enum, default_value_t = Format::JsonLines)]
    format: Format,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Number of attributes; taken from the region flags when omitted.
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    roi: RoiArgs,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Infeasible(String),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Usage(s)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli.command, &mut out).and_then(|()| out.flush().map_err(|e| Failure::Usage(e.to_string())));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) if msg.contains("Broken pipe") => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Generate(a) => generate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Enumerate2d(a) => enumerate(a, out),
        Command::GetNext(a) => get_next(a, out),
        Command::Sample(a) => sample(a, out),
    }
}

fn io_err(e: io::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mode: SyntheticMode = a.mode.parse().map_err(err)?;
    let ds = generate_synthetic::<f64>(a.n, a.d, mode, a.seed).map_err(err)?;
    eprintln!("seed: {}", a.seed);
    let target: Box<dyn Write + '_> = match &a.output {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| format!("{}: {e}", path.display()))?)),
        None => Box::new(out),
    };
    let mut w = csv::Writer::from_writer(target);
    let mut header = vec!["id".to_string()];
    header.extend(ds.attr_meta().iter().map(|m| m.name.clone()));
    w.write_record(&header).map_err(err)?;
    for item in ds.items() {
        let mut row = vec![item.id.clone()];
        row.extend(item.attrs.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(io_err)
}

fn parse_ids(text: &str) -> Vec<String> {
    text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let ds = a.data.load()?;
    let roi = a.roi.build(ds.dim())?;
    let ranking = match (&a.ranking, &a.ranking_file, &a.weights) {
        (Some(ids), _, _) => Ranking { order: parse_ids(ids) },
        (_, Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Ranking { order: parse_ids(&text) }
        }
        (_, _, Some(w)) => {
            if w.len() != ds.dim() {
                return Err(format!("--weights has {} components, expected {}", w.len(), ds.dim()).into());
            }
            stable_rank::rank(&ds, &WeightVector::from_f64(w).map_err(err)?).map_err(err)?
        }
        _ => return Err("give --ranking, --ranking-file or --weights".to_string().into()),
    };
    if ds.dim() > 2 {
        eprintln!("seed: {}", a.seed);
    }
    let opts = VerifyOptions { samples: a.samples, seed: a.seed, alpha: a.alpha };
    match verify(&ds, &ranking, &roi, opts).map_err(err)? {
        Verified::Feasible(report) => {
            let mut sink = Sink::new(a.format, out);
            sink.verify(&report).map_err(io_err)
        }
        Verified::Infeasible(why) => Err(Failure::Infeasible(why.to_string())),
    }
}

fn enumerate(a: EnumerateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let ds = a.data.load()?;
    let roi = a.roi.build(ds.dim())?;
    let mut engine = Engine::new(&ds, &roi, EngineParams::new(EngineKind::TwoD)).map_err(err)?;
    let mut sink = Sink::new(a.format, out);
    let limit = a.limit.unwrap_or(usize::MAX);
    while engine.produced() < limit {
        let Some(rec) = engine.next(&ds).map_err(err)? else { break };
        sink.region(&rec).map_err(io_err)?;
    }
    sink.finish().map_err(io_err)
}

fn get_next(a: GetNextArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let engine_kind: EngineKind = a.engine.parse().map_err(err)?;
    let mode = ResultMode::parse(&a.mode, a.k).map_err(err)?;
    let ds = a.data.load()?;
    let roi = a.roi.build(ds.dim())?;
    let params = EngineParams {
        mode,
        samples: a.samples,
        budget: a.budget,
        error: a.error,
        alpha: a.alpha,
        seed: a.seed,
        exact_fallback: a.exact_fallback,
        max_samples: a.max_samples,
        min_samples: a.min_samples,
        ..EngineParams::new(engine_kind)
    };
    if a.count == 0 {
        return Ok(());
    }
    if engine_kind != EngineKind::TwoD {
        eprintln!("seed: {}", a.seed);
    }
    let mut engine = Engine::new(&ds, &roi, params).map_err(err)?;
    let mut sink = Sink::new(a.format, out);
    while engine.produced() < a.count {
        let Some(rec) = engine.next(&ds).map_err(err)? else { break };
        if a.min_stability.is_some_and(|m| rec.stability < m) {
            break;
        }
        sink.next(&rec).map_err(io_err)?;
    }
    sink.finish().map_err(io_err)
}

fn sample(a: SampleArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let d =
        a.d.or_else(|| a.roi.roi_ray.as_ref().map(Vec::len))
            .or_else(|| a.roi.roi_interval.as_ref().map(|_| 2))
            .or_else(|| {
                a.roi.roi_constraints.first().and_then(|c| c.parse::<Constraint<f64>>().ok()).map(|c| c.coeffs.len())
            })
            .ok_or_else(|| "give --d or a region of interest".to_string())?;
    let roi = a.roi.build(d)?;
    let sampler = RoiSampler::new(roi).map_err(err)?;
    eprintln!("seed: {}", a.seed);
    let mut rng = RngStream::new(a.seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=d).map(|i| format!("w{i}"))).map_err(err)?;
    let mut buf = vec![0.0; d];
    for _ in 0..a.count {
        sampler.sample_into(&mut buf, &mut rng).map_err(err)?;
        w.write_record(buf.iter().map(|v| v.to_string())).map_err(err)?;
    }
    w.flush().map_err(io_err)
}
