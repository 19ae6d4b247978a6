//! `hupsamp`: weigh, sample and verify high-utility pattern samples.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 usage error (bad flags or
//! constraints), 3 input error (missing or malformed files), 4 nothing to
//! sample (total weight is zero), 5 oracle check failed.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hupsamp_core::combinatorics::{PascalCache, RandomSource};
use hupsamp_core::disk::{select_ids, stream_draw, stream_weigh};
use hupsamp_core::gen::GenConfig;
use hupsamp_core::oracle::{compare_records, enumerate, representativeness, DEFAULT_SUBSET_CAP};
use hupsamp_core::profile::{merge_subprofiles, pattern_to_subprofile, profile_to_qdb, Direction, PredicateWeights, Profile};
use hupsamp_core::qdb::{parse_qdb, LengthUtility, PriceTable, QuantitativeDatabase, UtilityMode};
use hupsamp_core::sampler::{bootstrap_sample, sample_patterns_concurrent, write_jsonl, SampleRecord, SampleRequest, Sampler};
use hupsamp_core::weighting::{build_weight_index, cache_for};
use hupsamp_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "hupsamp", version, about = "Exact sampling of high-utility patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print per-transaction weights and their total
    Weigh(WeighArgs),
    /// Draw patterns as JSON lines
    Sample(SampleArgs),
    /// Compare the sampler against exhaustive enumeration
    OracleCheck(OracleArgs),
    /// Turn a profile into a qDB
    ConvertProfile(ConvertArgs),
    /// Rebuild the sub-profile of sampled patterns
    Subprofile(SubprofileArgs),
    /// Time preprocessing and drawing
    Bench(BenchArgs),
    /// Write a synthetic qDB
    Gen(GenArgs),
    /// Run the HTTP service
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
struct Constraint {
    /// Shortest pattern length
    #[arg(long = "min", default_value_t = 1)]
    min_len: usize,
    /// Longest pattern length, an integer or `inf`
    #[arg(long = "max", default_value = "inf", value_parser = parse_max)]
    max_len: MaxLen,
    #[arg(long, value_enum, default_value_t = Mode::Hup)]
    mode: Mode,
}

#[derive(Clone, Copy)]
struct MaxLen(Option<usize>);

fn parse_max(s: &str) -> Result<MaxLen, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "none" => Ok(MaxLen(None)),
        v => v
            .parse()
            .map(|n| MaxLen(Some(n)))
            .map_err(|_| format!("expected an integer or `inf`, got {s:?}")),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Hup,
    Haup,
}

impl Constraint {
    fn utility(&self) -> Result<LengthUtility, Failure> {
        let mode = match self.mode {
            Mode::Hup => UtilityMode::Hup,
            Mode::Haup => UtilityMode::Haup,
        };
        LengthUtility::new(mode, self.min_len, self.max_len.0).map_err(|e| Failure::Usage(e.to_string()))
    }
}

#[derive(Args, Clone)]
struct Source {
    /// qDB in the text format
    #[arg(long, conflicts_with = "profile", required_unless_present = "profile")]
    db: Option<PathBuf>,
    /// Profile JSON; edges become items
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Price table, one `label price` per line
    #[arg(long, conflicts_with = "profile")]
    prices: Option<PathBuf>,
    /// Predicate weights JSON object, for --profile
    #[arg(long, requires = "profile")]
    predicate_weights: Option<PathBuf>,
    /// Which edge groups become transactions, for --profile
    #[arg(long, value_enum, default_value_t = Dir::Both)]
    direction: Dir,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Out,
    In,
    Both,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Out => Direction::Out,
            Dir::In => Direction::In,
            Dir::Both => Direction::Both,
        }
    }
}

#[derive(Args)]
struct WeighArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    constraint: Constraint,
    /// Stream the file instead of loading it
    #[arg(long, requires = "db")]
    disk: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    constraint: Constraint,
    /// Number of patterns
    #[arg(short = 'k', default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream the file in two passes instead of loading it
    #[arg(long, requires = "db", conflicts_with_all = ["jobs", "bootstrap"])]
    disk: bool,
    /// Split the draws over this many threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Use the uniform bootstrap baseline instead of the exact sampler
    #[arg(long)]
    bootstrap: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    constraint: Constraint,
    #[arg(short = 'k', default_value_t = 200_000)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the two-pass file sampler instead of the in-memory one
    #[arg(long, requires = "db", conflicts_with = "bootstrap")]
    disk: bool,
    /// Check the bootstrap baseline; expected to fail
    #[arg(long)]
    bootstrap: bool,
    /// Largest total number of subsets to enumerate
    #[arg(long, default_value_t = DEFAULT_SUBSET_CAP)]
    cap: u128,
    /// Fail when the total-variation distance reaches this value
    #[arg(long, default_value_t = 0.01)]
    max_tv: f64,
    /// Fail when the chi-square p-value is at or below this value
    #[arg(long, default_value_t = 0.001)]
    min_p: f64,
    /// Also write per-pattern normalized utilities of the sampler and the
    /// bootstrap baseline as CSV
    #[arg(long)]
    representativeness_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    predicate_weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Dir::Both)]
    direction: Dir,
    /// qDB text output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Price table output; edge prices are the predicate weights
    #[arg(long)]
    prices_out: Option<PathBuf>,
}

#[derive(Args)]
struct SubprofileArgs {
    #[arg(long)]
    profile: PathBuf,
    /// Comma-separated edge ids of one pattern
    #[arg(long, conflicts_with = "records", required_unless_present = "records")]
    items: Option<String>,
    /// JSON lines sample; all patterns are merged
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Generate the database, e.g. `n=1000000,avg=10`
    #[arg(long, conflicts_with = "db", required_unless_present = "db")]
    gen: Option<GenConfig>,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[command(flatten)]
    constraint: Constraint,
    #[arg(short = 'k', default_value_t = 10_000)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time the two-pass file sampler
    #[arg(long)]
    disk: bool,
}

#[derive(Args)]
struct GenArgs {
    /// `n=…,avg=…,items=…,qmax=…,seed=…`
    #[arg(long, default_value = "")]
    params: GenConfig,
    #[arg(short = 'n')]
    transactions: Option<usize>,
    #[arg(long)]
    avg: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    qmax: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Overrides HUPSAMP_PORT
    #[arg(long)]
    port: Option<u16>,
    /// Overrides HUPSAMP_DATA_DIR
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    ZeroMass,
    Oracle(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::ZeroMass => 4,
            Failure::Oracle(_) => 5,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ZeroMass => Failure::ZeroMass,
            Error::InvalidConstraint(_) | Error::InvalidRequest(_) => Failure::Usage(e.to_string()),
            Error::Parse { .. }
            | Error::Io(_)
            | Error::IoAtLine { .. }
            | Error::Json(_)
            | Error::Profile(_)
            | Error::UnmappedItem(_)
            | Error::EnumerationCap { .. }
            | Error::SourceChanged { .. } => Failure::Input(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn input<T>(path: &Path, r: Result<T, impl std::fmt::Display>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    input(path, File::open(path)).map(BufReader::new)
}

fn read(path: &Path) -> Result<String, Failure> {
    input(path, std::fs::read_to_string(path))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn prices(path: &Option<PathBuf>) -> Result<PriceTable, Failure> {
    match path {
        Some(p) => input(p, PriceTable::parse(open(p)?)),
        None => Ok(PriceTable::new()),
    }
}

fn load_profile(path: &Path) -> Result<Profile, Failure> {
    input(path, Profile::from_json(&read(path)?))
}

fn predicate_weights(path: &Option<PathBuf>) -> Result<PredicateWeights, Failure> {
    match path {
        Some(p) => {
            let w: PredicateWeights = input(p, serde_json::from_str(&read(p)?))?;
            input(p, w.validate())?;
            Ok(w)
        }
        None => Ok(PredicateWeights::new()),
    }
}

fn load(source: &Source) -> Result<QuantitativeDatabase, Failure> {
    match (&source.db, &source.profile) {
        (Some(db), _) => input(db, parse_qdb(open(db)?, prices(&source.prices)?)),
        (None, Some(p)) => {
            let profile = load_profile(p)?;
            let w = predicate_weights(&source.predicate_weights)?;
            Ok(profile_to_qdb(&profile, &w, source.direction.into())?.db)
        }
        (None, None) => Err(Failure::Usage("one of --db or --profile is required".into())),
    }
}

fn weigh(args: WeighArgs) -> Result<(), Failure> {
    let u = args.constraint.utility()?;
    let weights = if args.disk {
        let path = args.source.db.as_ref().expect("clap requires --db");
        let mut cache = PascalCache::new(0);
        stream_weigh(path, &u, &prices(&args.source.prices)?, &mut cache)?
            .weights()
            .to_vec()
    } else {
        let db = load(&args.source)?;
        build_weight_index(&db, &u, &cache_for(&db))?.weights()
    };
    let total: num_bigint::BigUint = weights.iter().sum();
    let report = json!({
        "constraint": u.to_string(),
        "transactions": weights.len(),
        "total": total.to_string(),
        "weights": weights.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    });
    let mut out = output(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Failure::Other(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn draw_disk(path: &Path, prices: &PriceTable, u: &LengthUtility, k: usize, seed: u64) -> Result<Vec<SampleRecord>, Failure> {
    let mut cache = PascalCache::new(0);
    let dw = stream_weigh(path, u, prices, &mut cache)?;
    let mut rng = RandomSource::from_seed(seed);
    let ids = select_ids(&dw, k, &mut rng)?;
    Ok(stream_draw(&dw, &ids, &mut rng, &mut cache)?)
}

fn sample(args: SampleArgs) -> Result<(), Failure> {
    let u = args.constraint.utility()?;
    let req = SampleRequest::new(u.clone(), args.k, args.seed)?;
    let records = if args.disk {
        let path = args.source.db.as_ref().expect("clap requires --db");
        draw_disk(path, &prices(&args.source.prices)?, &u, args.k, args.seed)?
    } else {
        let db = load(&args.source)?;
        if args.bootstrap {
            bootstrap_sample(&db, &req)?
        } else {
            let cache = cache_for(&db);
            let index = build_weight_index(&db, &u, &cache)?;
            sample_patterns_concurrent(&db, &index, &cache, &req, args.jobs.unwrap_or(1))?
        }
    };
    let mut out = output(&args.out)?;
    write_jsonl(&records, &mut out)?;
    out.flush()?;
    Ok(())
}

fn oracle_check(args: OracleArgs) -> Result<(), Failure> {
    let u = args.constraint.utility()?;
    let db = load(&args.source)?;
    let dist = enumerate(&db, &u, args.cap)?;
    let req = SampleRequest::new(u.clone(), args.k, args.seed)?;
    let start = Instant::now();
    let (method, records) = if args.bootstrap {
        ("bootstrap", bootstrap_sample(&db, &req)?)
    } else if args.disk {
        let path = args.source.db.as_ref().expect("clap requires --db");
        ("disk", draw_disk(path, db.prices(), &u, args.k, args.seed)?)
    } else {
        let cache = cache_for(&db);
        let index = build_weight_index(&db, &u, &cache)?;
        let mut rng = RandomSource::from_seed(args.seed);
        ("exact", Sampler::new(&db, &index, &cache)?.sample(args.k, &mut rng)?)
    };
    let sampling_secs = start.elapsed().as_secs_f64();
    let report = compare_records(&dist, &records)?;
    let passed = report.tv_distance < args.max_tv && report.chi_square.p_value > args.min_p;

    let baseline = if args.bootstrap {
        records.clone()
    } else {
        bootstrap_sample(&db, &SampleRequest::new(u.clone(), args.k, args.seed ^ 0x5eed)?)?
    };
    let repr = representativeness(&db, &[(method, &records), ("bootstrap", &baseline)])?;
    if let Some(path) = &args.representativeness_csv {
        let mut csv = output(&Some(path.clone()))?;
        writeln!(csv, "method,value")?;
        for r in &repr {
            for v in &r.values {
                writeln!(csv, "{},{v}", r.method)?;
            }
        }
        csv.flush()?;
    }
    let summaries: Vec<_> = repr
        .iter()
        .map(|r| {
            json!({
                "method": r.method,
                "draws": r.draws,
                "meanNormalizedUtility": r.mean_normalized_utility,
                "confidenceInterval95": [r.confidence_interval_95.0, r.confidence_interval_95.1],
                "degenerate": r.degenerate,
                "histogram": r.histogram,
            })
        })
        .collect();
    let doc = json!({
        "method": method,
        "constraint": u.to_string(),
        "patterns": dist.len(),
        "normalizer": dist.normalizer().to_string(),
        "draws": report.draws,
        "samplingSeconds": sampling_secs,
        "tvDistance": report.tv_distance,
        "chiSquare": report.chi_square,
        "maxAbsZ": report.max_abs_z(),
        "outsideSupport": report.outside_support,
        "zScores": report.z_scores,
        "representativeness": summaries,
        "passed": passed,
    });
    let mut out = output(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Failure::Other(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Oracle(format!(
            "tv = {:.4}, chi-square p = {:.3e}",
            report.tv_distance, report.chi_square.p_value
        )))
    }
}

fn convert_profile(args: ConvertArgs) -> Result<(), Failure> {
    let profile = load_profile(&args.profile)?;
    let w = predicate_weights(&args.predicate_weights)?;
    let q = profile_to_qdb(&profile, &w, args.direction.into())?;
    let mut out = output(&args.out)?;
    q.db.write_qdb(&mut out)?;
    out.flush()?;
    if let Some(p) = &args.prices_out {
        let mut out = output(&Some(p.clone()))?;
        q.db.write_prices(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn subprofile(args: SubprofileArgs) -> Result<(), Failure> {
    let profile = load_profile(&args.profile)?;
    let patterns: Vec<Vec<String>> = match (&args.items, &args.records) {
        (Some(items), _) => vec![items.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()],
        (None, Some(path)) => read(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<SampleRecord>(l).map(|r| r.items))
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
        (None, None) => return Err(Failure::Usage("one of --items or --records is required".into())),
    };
    let parts = patterns
        .iter()
        .map(|p| pattern_to_subprofile(p, &profile))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = merge_subprofiles(&parts);
    let mut out = output(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &merged).map_err(|e| Failure::Other(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let u = args.constraint.utility()?;
    let prices = prices(&args.prices)?;
    let tmp;
    let path: PathBuf = match (&args.gen, &args.db) {
        (Some(cfg), _) => {
            tmp = tempfile::NamedTempFile::new()?;
            let start = Instant::now();
            cfg.write(BufWriter::new(tmp.reopen()?))?;
            eprintln!("generated {} transactions in {:.2} s", cfg.transactions, start.elapsed().as_secs_f64());
            tmp.path().to_path_buf()
        }
        (None, Some(db)) => db.clone(),
        (None, None) => return Err(Failure::Usage("one of --gen or --db is required".into())),
    };
    let start = Instant::now();
    let (transactions, preprocess, per_pattern) = if args.disk {
        let mut cache = PascalCache::new(0);
        let dw = stream_weigh(&path, &u, &prices, &mut cache)?;
        let preprocess = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let mut rng = RandomSource::from_seed(args.seed);
        let ids = select_ids(&dw, args.k, &mut rng)?;
        stream_draw(&dw, &ids, &mut rng, &mut cache)?;
        (dw.len(), preprocess, start.elapsed().as_secs_f64() * 1e3 / args.k as f64)
    } else {
        let db = input(&path, parse_qdb(open(&path)?, prices))?;
        let cache = cache_for(&db);
        let index = build_weight_index(&db, &u, &cache)?;
        let preprocess = start.elapsed().as_secs_f64();
        let sampler = Sampler::new(&db, &index, &cache)?;
        let mut rng = RandomSource::from_seed(args.seed);
        let start = Instant::now();
        for _ in 0..args.k {
            sampler.draw(&mut rng)?;
        }
        (db.len(), preprocess, start.elapsed().as_secs_f64() * 1e3 / args.k as f64)
    };
    println!(
        "{}",
        json!({
            "pipeline": if args.disk { "disk" } else { "memory" },
            "constraint": u.to_string(),
            "transactions": transactions,
            "preprocessSeconds": preprocess,
            "draws": args.k,
            "msPerPattern": per_pattern,
        })
    );
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), Failure> {
    let mut cfg = args.params;
    if let Some(n) = args.transactions {
        cfg.transactions = n;
    }
    if let Some(a) = args.avg {
        cfg.avg_len = a;
    }
    if let Some(i) = args.items {
        cfg.items = i;
    }
    if let Some(q) = args.qmax {
        cfg.max_quantity = q;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.write(output(&args.out)?)?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let mut config = hupsamp_service::Config::from_env().map_err(Failure::Usage)?;
    if let Some(p) = args.port {
        config.port = p;
    }
    if args.data_dir.is_some() {
        config.data_dir = args.data_dir;
    }
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(hupsamp_service::serve(config))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Weigh(a) => weigh(a),
        Command::Sample(a) => sample(a),
        Command::OracleCheck(a) => oracle_check(a),
        Command::ConvertProfile(a) => convert_profile(a),
        Command::Subprofile(a) => subprofile(a),
        Command::Bench(a) => bench(a),
        Command::Gen(a) => gen(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::ZeroMass => eprintln!("error: {}", Error::ZeroMass),
                Failure::Usage(m) | Failure::Input(m) | Failure::Oracle(m) | Failure::Other(m) => {
                    eprintln!("error: {m}")
                }
            }
            ExitCode::from(f.code())
        }
    }
}
