//! `h00t`: seal and open hoots, search for colliding tags, run feed
//! scenarios, reproduce the protocol's analyses, and benchmark.
//!
//! Exit status is 0 on success, 1 on usage errors and 2 on data errors.

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;

use clap::{Args, Parser, Subcommand, ValueEnum};
use h00t::analysis::{
    self, anonymity_report, bandwidth_budget, brute_force_time, collision_probability,
    entropy_bits, generate_powerlaw_corpus, Corpus, NamespaceComponent, NamespaceSpec,
};
use h00t::collider::{self, Alphabet, SearchMode, SearchSpec, Target};
use h00t::feed::{run_scenario, ScenarioScript};
use h00t::tagcrypt::{PlainTag, TagMaterial, TagScheme};
use h00t::throughput::{measure, BenchConfig};
use h00t::wire::{self, seal_to_wire, short_tag_from_base32, WireParams};
use rand::rngs::OsRng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use config::{Effective, FileConfig, KdfChoice, KdfFlags};

#[derive(Parser, Debug)]
#[command(
    name = "h00t",
    version,
    about = "Collision-cloaked group messaging over hashtags"
)]
struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true, env = "H00T_CONFIG")]
    config: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seal a message to one or more plain tags and print the wire line.
    Seal(SealArgs),
    /// Print the messages in a stream of wire lines that open under a tag.
    Open(OpenArgs),
    /// Search for plain tags whose short tag matches a target.
    Collide(CollideArgs),
    /// Run a feed scenario script and print its statistics.
    Simulate(SimulateArgs),
    /// Entropy, brute-force, collision, bandwidth and corpus analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Measure seal and open throughput; prints a JSON report.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct TagArgs {
    /// Plain tag (repeatable). Falls back to $H00T_TAG (comma separated),
    /// then to a prompt on the terminal.
    #[arg(
        long = "tag",
        env = "H00T_TAG",
        value_delimiter = ',',
        hide_env_values = true
    )]
    tags: Vec<String>,
}

#[derive(Args, Debug)]
struct SealArgs {
    #[command(flatten)]
    tags: TagArgs,
    /// Message text; read from stdin when absent.
    message: Option<String>,
    /// Short-tag width in bits.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    glyph_budget: Option<usize>,
    /// Seed the session-key generator. For tests only: keys become predictable.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    kdf: KdfFlags,
}

#[derive(Args, Debug)]
struct OpenArgs {
    #[command(flatten)]
    tags: TagArgs,
    /// Wire lines to filter; stdin when absent or "-".
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    glyph_budget: Option<usize>,
    /// Print line counts to stderr when done.
    #[arg(long)]
    stats: bool,
    #[command(flatten)]
    kdf: KdfFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exhaustive,
    FirstN,
}

#[derive(Args, Debug)]
struct CollideArgs {
    #[arg(long, default_value = "")]
    prefix: String,
    /// Plain tag whose short tag is the target.
    #[arg(long, conflicts_with = "target_short", required_unless_present_any = ["target_short", "estimate"])]
    target: Option<String>,
    /// Target short tag in base32.
    #[arg(long)]
    target_short: Option<String>,
    #[arg(long)]
    suffix_len: u32,
    /// "alnum", "base64", or the literal glyphs to use.
    #[arg(long, default_value = "alnum")]
    alphabet: String,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    /// Matches wanted in first-n mode.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long)]
    shards: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<u32>,
    /// Print a runtime estimate instead of searching.
    #[arg(long)]
    estimate: bool,
    /// Hashes per second per core for --estimate.
    #[arg(long, default_value_t = 1.9e6)]
    hash_rate: f64,
    /// Cores for --estimate.
    #[arg(long, default_value_t = 8)]
    cores: u32,
    #[command(flatten)]
    kdf: KdfFlags,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    script: PathBuf,
    /// Override the script's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// log2 of a plain-tag namespace.
    Entropy(EntropyArgs),
    /// Time to search a namespace.
    BruteForce(BruteForceArgs),
    /// Chance that |A|^L candidates hit a c-glyph short tag.
    CollisionProb(CollisionProbArgs),
    /// Per-tag traffic against a link's capacity.
    Bandwidth(BandwidthArgs),
    /// Anonymity sets of a hashtag corpus.
    Report(ReportArgs),
    /// Write a synthetic power-law corpus as CSV.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// Dictionary size of one word component (repeatable).
    #[arg(long)]
    dictionary: Vec<u64>,
    /// Number of decimal digits.
    #[arg(long)]
    digits: Option<u32>,
    /// ALPHABET:LENGTH glyph component (repeatable).
    #[arg(long, value_parser = parse_glyphs)]
    glyphs: Vec<(u64, u32)>,
}

fn parse_glyphs(s: &str) -> Result<(u64, u32), String> {
    let (a, l) = s.split_once(':').ok_or("expected ALPHABET:LENGTH")?;
    Ok((
        a.parse().map_err(|e| format!("{e}"))?,
        l.parse().map_err(|e| format!("{e}"))?,
    ))
}

#[derive(Args, Debug)]
struct BruteForceArgs {
    #[arg(long)]
    bits: f64,
    /// Guesses per second per core.
    #[arg(long, default_value_t = 262_144.0)]
    rate: f64,
    #[arg(long, default_value_t = 1024.0)]
    cores: f64,
}

#[derive(Args, Debug)]
struct CollisionProbArgs {
    #[arg(long)]
    alphabet: u64,
    /// Short-tag length in glyphs.
    #[arg(long)]
    c: u32,
    /// Suffix length in glyphs.
    #[arg(long)]
    l: u32,
}

#[derive(Args, Debug)]
struct BandwidthArgs {
    /// Messages per second across the service.
    #[arg(long)]
    total_rate: f64,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 128_000.0)]
    link_bps: f64,
    #[arg(long, default_value_t = 140.0)]
    msg_bytes: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// `hashtag,count` CSV; "-" for stdin.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    k: Option<u32>,
    /// Buckets to list.
    #[arg(long, default_value_t = 20)]
    top: usize,
    /// Also write rank,count pairs here.
    #[arg(long)]
    rank_csv: Option<PathBuf>,
    #[command(flatten)]
    kdf: KdfFlags,
}

#[derive(Args, Debug)]
struct GenCorpusArgs {
    #[arg(long)]
    tags: usize,
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    #[arg(long)]
    total: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, default_value_t = 39)]
    message_len: usize,
    /// One in this many opened hoots belongs to the reader.
    #[arg(long, default_value_t = 10)]
    match_every: usize,
}

enum Failure {
    Usage(String),
    Data(String),
}

type CmdResult = Result<(), Failure>;

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "warn"
    } else {
        "info"
    }))
    .format_timestamp(None)
    .init();

    let file = match &cli.config {
        Some(p) => match FileConfig::load(p) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => FileConfig::default(),
    };

    let result = match cli.command {
        Command::Seal(a) => seal(a, &file),
        Command::Open(a) => open(a, &file),
        Command::Collide(a) => collide(a, &file),
        Command::Simulate(a) => simulate(a, &file),
        Command::Analyze(a) => analyze(a, &file),
        Command::Bench(a) => bench(a, &file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn plain_tags(args: &TagArgs) -> Result<Vec<PlainTag>, Failure> {
    let raw: Vec<String> = if args.tags.is_empty() {
        let entered = rpassword::prompt_password("plain tag: ").map_err(|e| {
            usage(format!(
                "no --tag, $H00T_TAG unset, and no terminal to prompt on ({e})"
            ))
        })?;
        vec![entered]
    } else {
        args.tags.clone()
    };
    raw.iter()
        .map(|t| t.trim().parse::<PlainTag>().map_err(usage))
        .collect()
}

fn scheme(k: u32, kdf: h00t::KdfConfig) -> Result<TagScheme, Failure> {
    TagScheme::new(k, kdf).map_err(usage)
}

fn stdout_line(text: &str) -> CmdResult {
    let mut out = io::stdout().lock();
    writeln!(out, "{text}").map_err(data)
}

fn seal(a: SealArgs, file: &FileConfig) -> CmdResult {
    let k = file.k(a.k);
    let kdf = file.kdf(&a.kdf, true, KdfChoice::MemoryHard, k);
    let budget = file.glyph_budget(a.glyph_budget);
    let seed = file.seed(a.seed);
    let mut e = Effective::new("seal");
    (e.k, e.kdf, e.glyph_budget, e.seed) = (Some(k), Some(kdf), Some(budget), seed);
    e.log();

    let scheme = scheme(k, kdf)?;
    let tags = plain_tags(&a.tags)?;
    let message = match a.message {
        Some(m) => m.into_bytes(),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).map_err(data)?;
            if buf.ends_with(b"\n") {
                buf.pop();
                if buf.ends_with(b"\r") {
                    buf.pop();
                }
            }
            buf
        }
    };
    let params = WireParams::new(k).with_budget(budget);
    let wire = match seed {
        Some(s) => seal_to_wire(
            &message,
            &tags,
            &scheme,
            &params,
            &mut ChaCha20Rng::seed_from_u64(s),
        ),
        None => seal_to_wire(&message, &tags, &scheme, &params, &mut OsRng),
    }
    .map_err(data)?;
    stdout_line(wire.as_str())
}

#[derive(Debug, Default, Serialize)]
struct OpenStats {
    lines: u64,
    opened: u64,
    /// Parsed, but on another short tag.
    other_tag: u64,
    /// On our short tag but failed the MAC: a colliding group or tampering.
    mac_rejected: u64,
    malformed: u64,
}

fn open(a: OpenArgs, file: &FileConfig) -> CmdResult {
    let k = file.k(a.k);
    let kdf = file.kdf(&a.kdf, true, KdfChoice::MemoryHard, k);
    let budget = file.glyph_budget(a.glyph_budget);
    let mut e = Effective::new("open");
    (e.k, e.kdf, e.glyph_budget) = (Some(k), Some(kdf), Some(budget));
    e.with("input", a.input.as_ref().map(|p| p.display().to_string()))
        .log();

    let scheme = scheme(k, kdf)?;
    let materials: Vec<TagMaterial> = plain_tags(&a.tags)?
        .iter()
        .map(|t| scheme.derive(t))
        .collect();
    let params = WireParams::new(k).with_budget(budget);
    let reader: Box<dyn BufRead> = match a.input.as_deref() {
        None => Box::new(io::stdin().lock()),
        Some(p) if p == Path::new("-") => Box::new(io::stdin().lock()),
        Some(p) => Box::new(BufReader::new(
            File::open(p).map_err(|e| data(format!("{}: {e}", p.display())))?,
        )),
    };

    let mut stats = OpenStats::default();
    let mut out = io::BufWriter::new(io::stdout().lock());
    for line in reader.lines() {
        let line = line.map_err(data)?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let hoot = match wire::parse(line, &params) {
            Ok(h) => h,
            Err(err) => {
                log::debug!("line {}: {err}", stats.lines);
                stats.malformed += 1;
                continue;
            }
        };
        let ours: Vec<&TagMaterial> = materials
            .iter()
            .filter(|m| hoot.short_tags().contains(&m.short_tag))
            .collect();
        if ours.is_empty() {
            stats.other_tag += 1;
            continue;
        }
        match ours.iter().find_map(|m| m.open(&hoot)) {
            Some(msg) => {
                stats.opened += 1;
                out.write_all(&msg)
                    .and_then(|_| out.write_all(b"\n"))
                    .map_err(data)?;
            }
            None => stats.mac_rejected += 1,
        }
    }
    out.flush().map_err(data)?;
    if a.stats {
        eprintln!(
            "lines={} opened={} other_tag={} mac_rejected={} malformed={}",
            stats.lines, stats.opened, stats.other_tag, stats.mac_rejected, stats.malformed
        );
    }
    Ok(())
}

fn alphabet(spec: &str) -> Result<Alphabet, Failure> {
    match spec {
        "alnum" => Ok(Alphabet::alphanumeric()),
        "base64" => Ok(Alphabet::base64()),
        glyphs => Alphabet::new(glyphs.chars()).map_err(usage),
    }
}

fn collide(a: CollideArgs, file: &FileConfig) -> CmdResult {
    let k = file.k(a.k);
    let kdf = file.kdf(&a.kdf, false, KdfChoice::Fast, k);
    let seed = file.seed(a.seed).unwrap_or(0);
    let shards = a
        .shards
        .or(file.shards)
        .unwrap_or_else(rayon_threads)
        .max(1);
    let mut e = Effective::new("collide");
    (e.k, e.kdf, e.seed) = (Some(k), Some(kdf), Some(seed));
    e.with("prefix", &a.prefix)
        .with("suffix_len", a.suffix_len)
        .with("alphabet", &a.alphabet)
        .with("mode", format!("{:?}", a.mode))
        .with("n", a.n)
        .with("shards", shards)
        .log();

    let scheme = TagScheme::for_search(k, kdf).map_err(usage)?;
    let alphabet = alphabet(&a.alphabet)?;
    if a.estimate {
        let space = (alphabet.len() as f64).powi(a.suffix_len as i32);
        let est = collider::estimate_from_space(space, k, a.hash_rate, a.cores.max(1));
        stdout_line(&format!("candidates={space}"))?;
        stdout_line(&format!("exhaustive_secs={:.3}", est.exhaustive_secs))?;
        return stdout_line(&format!("first_match_secs={:.6}", est.first_match_secs));
    }
    let target = match (&a.target, &a.target_short) {
        (Some(t), None) => Target::Plain(t.parse().map_err(usage)?),
        (None, Some(s)) => Target::Short(short_tag_from_base32(s, k).map_err(usage)?),
        _ => return Err(usage("give exactly one of --target and --target-short")),
    };
    let mode = match a.mode {
        ModeArg::Exhaustive => SearchMode::Exhaustive,
        ModeArg::FirstN => SearchMode::FirstN(a.n),
    };
    let spec = SearchSpec::new(a.prefix, target, a.suffix_len, scheme)
        .with_alphabet(alphabet)
        .with_mode(mode)
        .with_seed(seed);
    let result = collider::find_tag_parallel_cancellable(&spec, shards, &AtomicBool::new(false))
        .map_err(data)?;
    log::info!(
        "tried {} candidates in {:.3} s, {} matches",
        result.candidates_tried,
        result.elapsed.as_secs_f64(),
        result.matches.len()
    );
    let mut out = io::BufWriter::new(io::stdout().lock());
    for m in &result.matches {
        writeln!(out, "{}", m.plain_tag.as_str()).map_err(data)?;
    }
    out.flush().map_err(data)
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn simulate(a: SimulateArgs, file: &FileConfig) -> CmdResult {
    let text = std::fs::read_to_string(&a.script)
        .map_err(|e| data(format!("{}: {e}", a.script.display())))?;
    let mut script = ScenarioScript::from_toml(&text).map_err(data)?;
    if let Some(seed) = a.seed.or(file.seed) {
        script.seed = seed;
    }
    let mut e = Effective::new("simulate");
    (e.k, e.glyph_budget, e.seed) = (Some(script.k), script.glyph_budget, Some(script.seed));
    e.with("script", a.script.display().to_string())
        .with("groups", script.groups.len())
        .with("rules", script.rules.len())
        .log();
    let stats = run_scenario(&script).map_err(data)?;
    print!("{stats}");
    Ok(())
}

fn analyze(cmd: AnalyzeCommand, file: &FileConfig) -> CmdResult {
    match cmd {
        AnalyzeCommand::Entropy(a) => {
            let mut parts: Vec<NamespaceComponent> = a
                .dictionary
                .iter()
                .map(|&n| NamespaceComponent::Dictionary(n))
                .collect();
            parts.extend(a.digits.map(NamespaceComponent::Digits));
            parts.extend(
                a.glyphs
                    .iter()
                    .map(|&(alphabet, length)| NamespaceComponent::Glyphs { alphabet, length }),
            );
            Effective::new("analyze entropy")
                .with("components", format!("{parts:?}"))
                .log();
            let bits = entropy_bits(&NamespaceSpec::new(parts)).map_err(usage)?;
            stdout_line(&format!("entropy_bits={bits:.4}"))
        }
        AnalyzeCommand::BruteForce(a) => {
            if !(a.bits > 0.0 && a.rate > 0.0 && a.cores > 0.0) {
                return Err(usage("bits, rate and cores must be positive"));
            }
            Effective::new("analyze brute-force")
                .with("bits", a.bits)
                .with("rate", a.rate)
                .with("cores", a.cores)
                .log();
            let t = brute_force_time(a.bits, a.rate, a.cores);
            stdout_line(&format!("full_secs={:.3}", t.full_secs))?;
            stdout_line(&format!("expected_secs={:.3}", t.expected_secs))?;
            stdout_line(&format!("full_days={:.4}", t.full_days()))?;
            stdout_line(&format!("full_years={:.4}", t.full_years()))
        }
        AnalyzeCommand::CollisionProb(a) => {
            if a.alphabet < 1 || a.c < 1 {
                return Err(usage("alphabet and c must be at least 1"));
            }
            Effective::new("analyze collision-prob")
                .with("alphabet", a.alphabet)
                .with("c", a.c)
                .with("l", a.l)
                .log();
            stdout_line(&format!(
                "probability={:.12e}",
                collision_probability(a.alphabet, a.c, a.l)
            ))?;
            stdout_line(&format!(
                "log_miss_probability={:.6e}",
                analysis::log_miss_probability(a.alphabet, a.c, a.l)
            ))
        }
        AnalyzeCommand::Bandwidth(a) => {
            if a.total_rate < 0.0 || a.link_bps <= 0.0 || a.msg_bytes <= 0.0 {
                return Err(usage("rates and sizes must be positive"));
            }
            Effective::new("analyze bandwidth")
                .with("total_rate", a.total_rate)
                .with("k", a.k)
                .with("link_bps", a.link_bps)
                .with("msg_bytes", a.msg_bytes)
                .log();
            let b = bandwidth_budget(a.total_rate, a.k, a.link_bps, a.msg_bytes * 8.0);
            stdout_line(&format!("per_tag_per_sec={:.6}", b.per_tag_per_sec))?;
            stdout_line(&format!("per_tag_per_min={:.6}", b.per_tag_per_min))?;
            stdout_line(&format!("link_msgs_per_sec={:.4}", b.link_msgs_per_sec))?;
            stdout_line(&format!("headroom={:.4}", b.headroom))
        }
        AnalyzeCommand::Report(a) => {
            let k = file.k(a.k);
            let kdf = file.kdf(&a.kdf, false, KdfChoice::Fast, k);
            let mut e = Effective::new("analyze report");
            (e.k, e.kdf) = (Some(k), Some(kdf));
            e.with("corpus", a.corpus.display().to_string()).log();
            let scheme = TagScheme::for_search(k, kdf).map_err(usage)?;
            let corpus = if a.corpus == Path::new("-") {
                Corpus::from_csv(io::stdin().lock())
            } else {
                let f = File::open(&a.corpus)
                    .map_err(|e| data(format!("{}: {e}", a.corpus.display())))?;
                Corpus::from_csv(BufReader::new(f))
            }
            .map_err(data)?;
            let report = anonymity_report(&corpus, &scheme);
            if let Some(path) = &a.rank_csv {
                std::fs::write(path, report.rank_frequency_csv())
                    .map_err(|e| data(format!("{}: {e}", path.display())))?;
            }
            print!("{}", report.render(a.top));
            Ok(())
        }
        AnalyzeCommand::GenCorpus(a) => {
            let seed = file.seed(a.seed).unwrap_or(0);
            Effective::new("analyze gen-corpus")
                .with("tags", a.tags)
                .with("exponent", a.exponent)
                .with("total", a.total)
                .with("seed", seed)
                .log();
            let corpus =
                generate_powerlaw_corpus(a.tags, a.exponent, a.total, seed).map_err(usage)?;
            match &a.output {
                Some(p) => std::fs::write(p, corpus.to_csv())
                    .map_err(|e| data(format!("{}: {e}", p.display()))),
                None => {
                    print!("{}", corpus.to_csv());
                    Ok(())
                }
            }
        }
    }
}

fn bench(a: BenchArgs, file: &FileConfig) -> CmdResult {
    let cfg = BenchConfig {
        iterations: a.iterations,
        k: file.k(a.k),
        message_len: a.message_len,
        match_every: a.match_every,
    };
    let mut e = Effective::new("bench");
    (e.k, e.kdf) = (Some(cfg.k), Some(h00t::KdfConfig::fast_hash()));
    e.with("iterations", cfg.iterations)
        .with("message_len", cfg.message_len)
        .with("match_every", cfg.match_every)
        .log();
    if cfg.message_len > wire::capacity(&WireParams::new(cfg.k), 1) {
        log::warn!("message length exceeds single-tag wire capacity; measuring crypto only");
    }
    let report = measure(&cfg).map_err(usage)?;
    stdout_line(&serde_json::to_string_pretty(&report).map_err(data)?)
}
