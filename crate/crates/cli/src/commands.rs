use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use toyaudit_core::capture::{
    cross_device_overlap, endpoint_stats, parse_pcap, parse_transaction_log, DeviceProfile, HttpTransaction,
};
use toyaudit_core::client::{is_loopback, parse_target, ProbeClient};
use toyaudit_core::compliance::{
    default_catalog, load_clause_catalog, map_findings, render_report, AuditReport, ReportFormat,
};
use toyaudit_core::detect::active::{
    overwrite_own_photo, probe_response_oracle, probe_stale_resource, OracleProbe, ProbeError,
};
use toyaudit_core::detect::{run_passive, DetectorConfig};
use toyaudit_core::fsutil::write_atomic;
use toyaudit_core::mine::{
    estimate_runtime, mine, plan, MinerConfig, SuffixBudget, TokenSpace, DEFAULT_ALPHABET, DEFAULT_PREFIX_LEN,
    DEFAULT_SUFFIX_LEN,
};
use toyaudit_core::staticscan::{load_rules, scan_secrets};
use toyaudit_core::Finding;
use toyaudit_testbed::{emulate_toy_session, emulate_with_testbed, serve, Scenario, TestbedConfig, Toggles};

use crate::timefmt::now_rfc3339;

pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = Result<u8, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "toyaudit", version, about = "Smart-toy security audit toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the mock toy backend.
    Testbed {
        #[command(subcommand)]
        action: TestbedAction,
    },
    /// Emulate a toy session and write its capture, labels and profile.
    Emulate(EmulateArgs),
    /// Run passive detectors on a capture and write a compliance report.
    Analyze(AnalyzeArgs),
    /// Run the active oracle and stale-resource probes against a toy API.
    Probe(ProbeArgs),
    /// Enumerate photo tokens through the truncated-URL oracle.
    Mine(MineArgs),
    /// Estimate enumeration runtime.
    Estimate(EstimateArgs),
    /// Scan a source tree for hard-coded secrets.
    Scan(ScanArgs),
    /// Report third-party services shared across device captures.
    Overlap(OverlapArgs),
}

#[derive(Debug, Subcommand)]
enum TestbedAction {
    /// Serve until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Args)]
struct EmulateArgs {
    #[arg(long)]
    scenario: Scenario,
    #[arg(long)]
    out: PathBuf,
    /// Testbed config (toggles and geometry) the session should assume.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use an already running testbed instead of an in-process one.
    #[arg(long)]
    server: Option<String>,
    /// Turn every vulnerability toggle off.
    #[arg(long)]
    hardened: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// `.pcap` or JSONL transaction log.
    #[arg(long)]
    capture: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// Clause catalog; the built-in catalog when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Extra findings (JSON arrays from `probe` or `scan`) to include.
    #[arg(long, value_delimiter = ',')]
    findings: Vec<PathBuf>,
    /// Fixed report timestamp instead of the current time.
    #[arg(long)]
    generated_at: Option<String>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[arg(long)]
    target: String,
    #[arg(long, default_value = DEFAULT_ALPHABET)]
    alphabet: String,
    #[arg(long, default_value_t = DEFAULT_PREFIX_LEN)]
    prefix_len: usize,
    /// Random truncated probes to send.
    #[arg(long, default_value_t = 50)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prefix known to be issued; probed first.
    #[arg(long = "known-prefix")]
    known_prefixes: Vec<String>,
    #[arg(long, default_value = "/api/photo/{prefix}")]
    oracle_path: String,
    #[arg(long)]
    skip_oracle: bool,
    #[arg(long)]
    skip_stale: bool,
    /// Minimum gap between requests in milliseconds.
    #[arg(long, default_value_t = 50)]
    delay: u64,
    #[arg(long)]
    i_own_this_target: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value = DEFAULT_ALPHABET)]
    alphabet: String,
    #[arg(long, default_value_t = DEFAULT_PREFIX_LEN)]
    prefix_len: usize,
    #[arg(long, default_value_t = DEFAULT_SUFFIX_LEN)]
    suffix_len: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Suffix probes per valid prefix.
    #[arg(long)]
    budget: Option<u64>,
    /// Stop once this fraction of the planted tokens is recovered.
    #[arg(long)]
    fraction: Option<f64>,
    /// Planted-token count, required with --fraction.
    #[arg(long)]
    known_planted: Option<usize>,
    #[arg(long, default_value_t = 50)]
    delay: u64,
    #[arg(long)]
    i_own_this_target: bool,
    /// Print the request plan without sending anything.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    probes: u64,
    /// Round-trip time in milliseconds.
    #[arg(long)]
    rtt: f64,
    #[arg(long, default_value_t = 1)]
    workers: u64,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlapArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    captures: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    profiles: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Testbed {
            action: TestbedAction::Serve { config, listen },
        } => testbed_serve(config, listen),
        Command::Emulate(a) => emulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Probe(a) => probe(a),
        Command::Mine(a) => mine_cmd(a),
        Command::Estimate(a) => estimate(a),
        Command::Scan(a) => scan(a),
        Command::Overlap(a) => overlap(a),
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

fn stdout_line(line: impl std::fmt::Display) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn load_config(path: Option<&Path>) -> anyhow::Result<TestbedConfig> {
    match path {
        Some(p) => TestbedConfig::from_flat(&read_text(p)?).with_context(|| format!("config {}", p.display())),
        None => Ok(TestbedConfig::default()),
    }
}

fn testbed_serve(config: Option<PathBuf>, listen: Option<String>) -> Outcome {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(addr) = listen {
        cfg.listen_address = addr;
    }
    let server = serve(cfg).map_err(|e| anyhow!(e))?;
    stdout_line(format_args!("testbed listening on {}", server.base_url()));
    server.run_until_interrupt().context("waiting for interrupt")?;
    Ok(0)
}

fn emulate(a: EmulateArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?;
    if a.hardened {
        cfg.toggles = Toggles::hardened();
    }
    let out = match &a.server {
        Some(url) => emulate_toy_session(a.scenario, &cfg, Some(url), &a.out),
        None => emulate_with_testbed(a.scenario, &cfg, &a.out),
    }
    .map_err(|e| anyhow!(e))?;
    stdout_line(format_args!("capture  {}", out.jsonl.display()));
    stdout_line(format_args!("pcap     {}", out.pcap.display()));
    stdout_line(format_args!("labels   {}", out.labels.display()));
    stdout_line(format_args!("profile  {}", out.profile.display()));
    if let Some(src) = &out.source_tree {
        stdout_line(format_args!("source   {}", src.display()));
    }
    Ok(0)
}

fn is_pcap(bytes: &[u8]) -> bool {
    matches!(
        bytes.get(..4),
        Some([0xd4, 0xc3, 0xb2, 0xa1] | [0xa1, 0xb2, 0xc3, 0xd4] | [0x4d, 0x3c, 0xb2, 0xa1] | [0xa1, 0xb2, 0x3c, 0x4d])
    )
}

fn load_capture(path: &Path) -> anyhow::Result<Vec<HttpTransaction>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if is_pcap(&bytes) {
        let capture = parse_pcap(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        for w in &capture.warnings.messages {
            tracing::warn!("{}: {w}", path.display());
        }
        Ok(capture.transactions)
    } else {
        let text =
            String::from_utf8(bytes).map_err(|_| anyhow!("{} is neither pcap nor UTF-8 JSONL", path.display()))?;
        parse_transaction_log(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn load_profile(path: &Path) -> anyhow::Result<DeviceProfile> {
    DeviceProfile::from_json(&read_text(path)?).with_context(|| format!("profile {}", path.display()))
}

fn analyze(a: AnalyzeArgs) -> Outcome {
    let txns = load_capture(&a.capture)?;
    let profile = load_profile(&a.profile)?;
    let catalog = match &a.catalog {
        Some(p) => load_clause_catalog(&read_text(p)?).with_context(|| format!("catalog {}", p.display()))?,
        None => default_catalog(),
    };
    let mut findings = run_passive(&txns, &profile, &DetectorConfig::default());
    for path in &a.findings {
        let extra: Vec<Finding> =
            serde_json::from_str(&read_text(path)?).with_context(|| format!("findings {}", path.display()))?;
        for f in &extra {
            f.validate().map_err(|e| anyhow!("findings {}: {e}", path.display()))?;
        }
        findings.extend(extra);
    }
    let violations = map_findings(&findings, &catalog);
    let report = AuditReport {
        device_name: profile.device_name.clone(),
        capture_summary: endpoint_stats(&txns, &profile),
        findings,
        violations,
        generated_at: a.generated_at.unwrap_or_else(now_rfc3339),
    };
    let format = match a.format {
        Format::Json => ReportFormat::Json,
        Format::Markdown => ReportFormat::Markdown,
    };
    let bytes = render_report(&report, format).map_err(|e| anyhow!(e))?;
    write_out(&a.out, &bytes)?;
    stdout_line(format_args!(
        "{} transactions, {} findings, {} violations -> {}",
        txns.len(),
        report.findings.len(),
        report.violations.len(),
        a.out.display()
    ));
    Ok(u8::from(!report.findings.is_empty()))
}

fn guard_target(target: &str, acknowledged: bool) -> Result<(), Failure> {
    let url = parse_target(target).map_err(|e| usage(e.to_string()))?;
    if !acknowledged && !is_loopback(&url) {
        return Err(usage(format!(
            "{target} is not a loopback address; pass --i-own-this-target to probe a target you own"
        )));
    }
    Ok(())
}

fn probe(a: ProbeArgs) -> Outcome {
    guard_target(&a.target, a.i_own_this_target)?;
    if a.prefix_len == 0 {
        return Err(usage("--prefix-len must be at least 1"));
    }
    let client = ProbeClient::new(&a.target, Duration::from_millis(a.delay)).map_err(|e| usage(e.to_string()))?;
    let mut findings = Vec::new();
    if !a.skip_oracle {
        let probe = OracleProbe {
            path_template: a.oracle_path.clone(),
            alphabet: a.alphabet.chars().collect(),
            prefix_len: a.prefix_len,
            probe_count: a.probes,
            seed: a.seed,
            known_valid_prefixes: a.known_prefixes.clone(),
            headers: vec![],
        };
        match probe_response_oracle(&client, &probe) {
            Ok(f) => findings.extend(f),
            Err(ProbeError::OracleInconclusive { status, probes }) => {
                tracing::info!("oracle inconclusive: all {probes} probes returned {status}");
            }
            Err(ProbeError::InvalidProbe(m)) => return Err(usage(m)),
            Err(e) => return Err(anyhow!(e).into()),
        }
    }
    if !a.skip_stale {
        let prefix_len = a.prefix_len;
        let f = probe_stale_resource(&client, |c| overwrite_own_photo(c, prefix_len)).map_err(|e| anyhow!(e))?;
        findings.extend(f);
    }
    for f in &findings {
        stdout_line(format_args!("{} ({:?}): {}", f.detector_id, f.severity, f.summary));
    }
    if let Some(out) = &a.out {
        write_out(out, &to_json(&findings))?;
    }
    Ok(u8::from(!findings.is_empty()))
}

fn mine_cmd(a: MineArgs) -> Outcome {
    let space = TokenSpace::new(&a.alphabet, a.prefix_len, a.suffix_len).map_err(|e| usage(e.to_string()))?;
    let target = match (&a.target, a.dry_run) {
        (Some(t), _) => t.clone(),
        (None, true) => "http://127.0.0.1/".to_string(),
        (None, false) => return Err(usage("--target is required unless --dry-run is given")),
    };
    let mut cfg = MinerConfig::new(target, space);
    cfg.workers = a.workers;
    cfg.seed = a.seed;
    cfg.request_delay = Duration::from_millis(a.delay);
    cfg.allow_non_loopback = a.i_own_this_target;
    cfg.known_planted = a.known_planted;
    if let Some(b) = a.budget {
        cfg.suffix_budget = SuffixBudget::Limited(b);
    }
    if let Some(f) = a.fraction {
        cfg.target_fraction = f;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    if a.dry_run {
        let p = plan(&cfg);
        stdout_line(format_args!("prefix probes: {}", p.prefix_probes));
        stdout_line(format_args!(
            "suffix probes per valid prefix: {}",
            p.suffix_probes_per_prefix
        ));
        stdout_line(format_args!("token space: {}", p.token_space));
        if let Some(out) = &a.out {
            write_out(out, &to_json(&p))?;
        }
        return Ok(0);
    }
    let result = mine(&cfg).map_err(|e| anyhow!(e))?;
    stdout_line(format_args!("valid prefixes: {}", result.valid_prefixes.len()));
    stdout_line(format_args!("recovered tokens: {}", result.recovered_tokens.len()));
    stdout_line(format_args!(
        "probes sent: {} ({} prefix, {} suffix)",
        result.probes_sent, result.per_phase_counts.prefix_probes, result.per_phase_counts.suffix_probes
    ));
    stdout_line(format_args!(
        "completion: {:?} in {:.2} s",
        result.completion, result.elapsed
    ));
    if let Some(out) = &a.out {
        write_out(out, &to_json(&result))?;
    }
    Ok(0)
}

fn estimate(a: EstimateArgs) -> Outcome {
    let est = estimate_runtime(a.probes, a.rtt / 1000.0, a.workers, a.fraction).map_err(|e| usage(e.to_string()))?;
    stdout_line(format_args!("{:.1} s ({})", est.seconds, est.human));
    Ok(0)
}

fn scan(a: ScanArgs) -> Outcome {
    let rules = match &a.rules {
        Some(p) => load_rules(&read_text(p)?).with_context(|| format!("rules {}", p.display()))?,
        None => Vec::new(),
    };
    let report = scan_secrets(&a.source, &rules).map_err(|e| anyhow!(e))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.findings {
        let place = f
            .evidence
            .first()
            .map(|e| match e {
                toyaudit_core::Evidence::File { file, line } => format!("{file}:{line}"),
                other => format!("{other:?}"),
            })
            .unwrap_or_default();
        stdout_line(format_args!("{place} {}", f.summary));
    }
    stdout_line(format_args!(
        "{} files scanned, {} findings",
        report.files_scanned,
        report.findings.len()
    ));
    if let Some(out) = &a.out {
        write_out(out, &to_json(&report.findings))?;
    }
    Ok(u8::from(!report.findings.is_empty()))
}

fn overlap(a: OverlapArgs) -> Outcome {
    if a.captures.len() != a.profiles.len() {
        return Err(usage(format!(
            "{} captures but {} profiles; give one profile per capture",
            a.captures.len(),
            a.profiles.len()
        )));
    }
    let mut captures = Vec::new();
    let mut profiles = Vec::new();
    for (c, p) in a.captures.iter().zip(&a.profiles) {
        let profile = load_profile(p)?;
        captures.push((profile.device_name.clone(), load_capture(c)?));
        profiles.push(profile);
    }
    let report = cross_device_overlap(&captures, &profiles).map_err(|e| usage(e.to_string()))?;
    for s in &report.services {
        stdout_line(format_args!(
            "{}: {} devices ({})",
            s.service,
            s.device_count,
            s.devices.join(", ")
        ));
    }
    if let Some(out) = &a.out {
        write_out(out, &to_json(&report))?;
    }
    Ok(0)
}
