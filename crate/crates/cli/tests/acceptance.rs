//! End-to-end acceptance checks, one test per criterion. Each writes a
//! `criterion N ... PASS|FAIL` line to stderr.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use toyaudit_core::capture::{
    cross_device_overlap, endpoint_stats, parse_pcap, parse_transaction_log, DeviceProfile, HttpTransaction,
};
use toyaudit_core::client::ProbeClient;
use toyaudit_core::compliance::{default_catalog, map_findings};
use toyaudit_core::detect::active::{
    overwrite_own_photo, probe_response_oracle, probe_stale_resource, OracleProbe, ProbeError,
};
use toyaudit_core::detect::{run_passive, DetectorConfig};
use toyaudit_core::mine::{estimate_runtime, mine, partition_tokenspace, MinerConfig, TokenSpace};
use toyaudit_core::staticscan::scan_secrets;
use toyaudit_core::{DetectorId, Evidence, Finding};
use toyaudit_testbed::fixture::{write_smartpet_source, NOOK_CONFIG_PATH, PLANTED_SECRETS};
use toyaudit_testbed::{emulate_with_testbed, serve, Scenario, ServerHandle, TestbedConfig, Toggles};

const HEX: &str = "0123456789ABCDEF";

fn verdict(n: u8, name: &str, elapsed: Duration, limit: Option<Duration>, outcome: Result<(), String>) {
    let outcome = match (outcome, limit) {
        (Ok(()), Some(l)) if elapsed >= l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
        (o, _) => o,
    };
    let mut err = std::io::stderr().lock();
    match &outcome {
        Ok(()) => {
            let _ = writeln!(err, "criterion {n:>2} {name}: PASS ({elapsed:.2?})");
        }
        Err(why) => {
            let _ = writeln!(err, "criterion {n:>2} {name}: FAIL ({elapsed:.2?}): {why}");
        }
    }
    if let Err(why) = outcome {
        panic!("criterion {n} failed: {why}");
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Emulated {
    txns: Vec<HttpTransaction>,
    profile: DeviceProfile,
    pcap: Vec<u8>,
}

fn emulated(scenario: Scenario, toggles: Toggles, dir: &Path) -> Emulated {
    let out = emulate_with_testbed(scenario, &TestbedConfig::loopback(toggles), dir).expect("emulate");
    Emulated {
        txns: parse_transaction_log(&std::fs::read_to_string(&out.jsonl).unwrap()).unwrap(),
        profile: DeviceProfile::from_json(&std::fs::read_to_string(&out.profile).unwrap()).unwrap(),
        pcap: std::fs::read(&out.pcap).unwrap(),
    }
}

fn reduced_testbed(toggles: Toggles, tokens: &[&str]) -> ServerHandle {
    let mut cfg = TestbedConfig {
        space: TokenSpace::new(HEX, 2, 2).unwrap(),
        ..TestbedConfig::loopback(toggles)
    };
    let tokens: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
    cfg.plant_users(&tokens, 0);
    serve(cfg).expect("testbed")
}

/// Runs the oracle and stale-resource probes as an auditor with one
/// account of their own would: the oracle is seeded with the prefix of the
/// auditor's own photo.
fn active_findings(toggles: Toggles) -> Vec<Finding> {
    let server = serve(TestbedConfig::loopback(toggles)).unwrap();
    let client = ProbeClient::new(&server.base_url(), Duration::ZERO).unwrap();
    let mut own_prefix = String::new();
    let mut findings = probe_stale_resource(&client, |c| {
        let target = overwrite_own_photo(c, 3)?;
        // /api/photo/{prefix}/{token}
        own_prefix = target.old_url.split('/').nth(3).unwrap_or_default().to_string();
        Ok(target)
    })
    .unwrap();
    let probe = OracleProbe {
        path_template: "/api/photo/{prefix}".into(),
        alphabet: toyaudit_core::mine::DEFAULT_ALPHABET.chars().collect(),
        prefix_len: 3,
        probe_count: 64,
        seed: 11,
        known_valid_prefixes: vec![own_prefix],
        headers: vec![],
    };
    match probe_response_oracle(&client, &probe) {
        Ok(f) => findings.extend(f),
        Err(ProbeError::OracleInconclusive { .. }) => {}
        Err(e) => panic!("oracle probe: {e}"),
    }
    findings
}

fn ids(findings: &[Finding]) -> BTreeSet<DetectorId> {
    findings.iter().map(|f| f.detector_id).collect()
}

#[test]
fn criterion_01_prefix_sweep_count() {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_toyaudit"))
        .args(["mine", "--dry-run"])
        .output()
        .unwrap();
    let elapsed = t.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    let want = 36u64.pow(3);
    let outcome = check(out.status.success(), || format!("exit {:?}", out.status.code())).and_then(|_| {
        check(text.lines().any(|l| l == format!("prefix probes: {want}")), || {
            format!("plan output: {text}")
        })
    });
    verdict(
        1,
        "prefix sweep plans 36^3 probes",
        elapsed,
        Some(Duration::from_secs(1)),
        outcome,
    );
}

#[test]
fn criterion_02_estimator() {
    let t = Instant::now();
    let year = 365.25 * 86_400.0;
    let full = estimate_runtime(36u64.pow(9), 0.2, 1, 1.0).unwrap();
    let sweep = estimate_runtime(46_656, 0.2, 1, 1.0).unwrap();
    let half = estimate_runtime(46_656, 0.2, 1, 0.5).unwrap();
    let expected_sweep = 46_656.0 * 0.2;
    let outcome = check(full.seconds / year > 1e5, || {
        format!("full space only {} years", full.seconds / year)
    })
    .and_then(|_| check(full.human.contains("years"), || format!("human form {}", full.human)))
    .and_then(|_| {
        check((sweep.seconds - expected_sweep).abs() <= 0.1, || {
            format!("sweep {} s, want {expected_sweep}", sweep.seconds)
        })
    })
    .and_then(|_| {
        check((half.seconds * 2.0 - sweep.seconds).abs() <= 1e-9, || {
            format!("half {} vs full {}", half.seconds, sweep.seconds)
        })
    });
    verdict(2, "runtime estimator", t.elapsed(), None, outcome);
}

#[test]
fn criterion_03_mining_completeness() {
    let planted = ["AB01", "AB7F", "ABE2", "CD00", "CDFF"];
    let server = reduced_testbed(Toggles::all_on(), &planted);
    let space = TokenSpace::new(HEX, 2, 2).unwrap();
    let mut cfg = MinerConfig::new(server.base_url(), space);
    cfg.workers = 4;
    cfg.seed = 3;
    cfg.request_delay = Duration::ZERO;
    let t = Instant::now();
    let result = mine(&cfg);
    let elapsed = t.elapsed();
    let bound = 16u64.pow(2) + 5 * 16u64.pow(2);
    let outcome = match result {
        Err(e) => Err(e.to_string()),
        Ok(r) => {
            let want: BTreeSet<String> = planted.iter().map(|s| s.to_string()).collect();
            let prefixes: BTreeSet<String> = ["AB", "CD"].iter().map(|s| s.to_string()).collect();
            check(r.recovered_tokens == want, || {
                format!("recovered {:?}", r.recovered_tokens)
            })
            .and_then(|_| {
                check(r.valid_prefixes == prefixes, || {
                    format!("prefixes {:?}", r.valid_prefixes)
                })
            })
            .and_then(|_| check(r.probes_sent <= bound, || format!("{} probes > {bound}", r.probes_sent)))
            .and_then(|_| {
                check(server.request_count() as u64 == r.probes_sent, || {
                    format!(
                        "server saw {} requests, miner counted {}",
                        server.request_count(),
                        r.probes_sent
                    )
                })
            })
        }
    };
    verdict(
        3,
        "mining recovers exactly the planted tokens",
        elapsed,
        Some(Duration::from_secs(60)),
        outcome,
    );
}

fn all_suffixes(alphabet: &str, len: usize) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = [String::new()].into();
    for _ in 0..len {
        out = out
            .iter()
            .flat_map(|s| alphabet.chars().map(move |c| format!("{s}{c}")))
            .collect();
    }
    out
}

#[test]
fn criterion_04_partition() {
    let t = Instant::now();
    let geometries = [
        ("01", 1),
        ("abc", 4),
        (HEX, 2),
        ("0123456789", 3),
        (HEX, 4),
        ("abcdefg", 5),
    ];
    let mut outcome = Ok(());
    'outer: for (alphabet, s) in geometries {
        let space = TokenSpace::new(alphabet, 1, s).unwrap();
        let universe = all_suffixes(alphabet, s);
        assert!(universe.len() <= 65_536);
        for workers in [1, 2, 3, 8] {
            let prefix = &alphabet[..1];
            let streams: Vec<Vec<String>> = partition_tokenspace(&space, prefix, workers, 42)
                .into_iter()
                .map(Iterator::collect)
                .collect();
            let again: Vec<Vec<String>> = partition_tokenspace(&space, prefix, workers, 42)
                .into_iter()
                .map(Iterator::collect)
                .collect();
            let total: usize = streams.iter().map(Vec::len).sum();
            let union: BTreeSet<String> = streams.iter().flatten().cloned().collect();
            let r = check(streams.len() == workers, || format!("{} streams", streams.len()))
                .and_then(|_| check(total == union.len(), || format!("{alphabet}/{s}/{workers}: overlap")))
                .and_then(|_| check(union == universe, || format!("{alphabet}/{s}/{workers}: union differs")))
                .and_then(|_| {
                    check(streams == again, || {
                        format!("{alphabet}/{s}/{workers}: not deterministic")
                    })
                });
            if r.is_err() {
                outcome = r;
                break 'outer;
            }
        }
    }
    verdict(
        4,
        "worker streams partition the suffix space",
        t.elapsed(),
        Some(Duration::from_secs(10)),
        outcome,
    );
}

#[test]
fn criterion_05_detector_soundness() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = DetectorConfig::default();
    let passive_want: BTreeSet<DetectorId> = [
        DetectorId::Cleartext,
        DetectorId::PiiExposure,
        DetectorId::TokenReuse,
        DetectorId::NoAuth,
        DetectorId::PiiThirdParty,
    ]
    .into();
    let active_want: BTreeSet<DetectorId> = [DetectorId::Oracle, DetectorId::StaleResource].into();

    let hyd = emulated(Scenario::Hydration, Toggles::all_on(), &dir.path().join("on"));
    let hyd_passive = ids(&run_passive(&hyd.txns, &hyd.profile, &cfg));
    let hyd_active = ids(&active_findings(Toggles::all_on()));

    let hard = emulated(Scenario::Hydration, Toggles::hardened(), &dir.path().join("off"));
    let hard_passive = run_passive(&hard.txns, &hard.profile, &cfg);
    let hard_active = active_findings(Toggles::hardened());

    let fit = emulated(Scenario::Fitness, Toggles::all_on(), &dir.path().join("fit"));
    let fit_passive = run_passive(&fit.txns, &fit.profile, &cfg);

    let outcome = check(passive_want.is_subset(&hyd_passive), || {
        format!("passive on hydration: {hyd_passive:?}")
    })
    .and_then(|_| {
        check(hyd_active == active_want, || {
            format!("active on hydration: {hyd_active:?}")
        })
    })
    .and_then(|_| {
        check(hard_passive.is_empty(), || {
            format!("hardened passive: {:?}", ids(&hard_passive))
        })
    })
    .and_then(|_| {
        check(hard_active.is_empty(), || {
            format!("hardened active: {:?}", ids(&hard_active))
        })
    })
    .and_then(|_| check(fit_passive.is_empty(), || format!("fitness: {:?}", ids(&fit_passive))));
    verdict(5, "detector soundness", t.elapsed(), None, outcome);
}

#[test]
fn criterion_06_scenario_fidelity() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut outcome = Ok(());
    for (scenario, hosts) in [
        (Scenario::Hydration, 12),
        (Scenario::Smartpet, 6),
        (Scenario::Fitness, 3),
    ] {
        let e = emulated(scenario, Toggles::all_on(), &dir.path().join(scenario.as_str()));
        let distinct: BTreeSet<&str> = e.txns.iter().map(|t| t.host.as_str()).collect();
        let stats = endpoint_stats(&e.txns, &e.profile);
        let sum: f64 = stats.iter().map(|s| s.byte_fraction).sum();
        // fractions recomputed from raw sizes
        let total: u64 = stats.iter().map(|s| s.total_bytes).sum();
        let frac_ok = stats
            .iter()
            .all(|s| (s.byte_fraction - s.total_bytes as f64 / total as f64).abs() <= 1e-12);
        let r = check(distinct.len() == hosts, || {
            format!("{scenario}: {} hosts, want {hosts}", distinct.len())
        })
        .and_then(|_| {
            check(stats.len() == hosts, || {
                format!("{scenario}: {} stat rows", stats.len())
            })
        })
        .and_then(|_| {
            check((sum - 1.0).abs() <= 1e-9, || {
                format!("{scenario}: fractions sum to {sum}")
            })
        })
        .and_then(|_| check(frac_ok, || format!("{scenario}: fraction differs from bytes/total")));
        if r.is_err() {
            outcome = r;
            break;
        }
    }
    verdict(6, "scenario host counts and byte fractions", t.elapsed(), None, outcome);
}

#[test]
fn criterion_07_oracle_behavior() {
    let planted = ["AB01", "AB7F", "C300", "F0F0", "0E9D"];
    let server = reduced_testbed(Toggles::all_on(), &planted);
    let client = ProbeClient::new(&server.base_url(), Duration::ZERO).unwrap();
    let planted_prefixes: BTreeSet<String> = planted.iter().map(|t| t[..2].to_string()).collect();
    let t = Instant::now();
    let mut outcome = Ok(());
    for prefix in all_suffixes(HEX, 2) {
        let r = client.get(&format!("/api/photo/{prefix}"), &[]).unwrap();
        let want = if planted_prefixes.contains(&prefix) { 301 } else { 404 };
        if r.status != want {
            outcome = Err(format!("{prefix}: status {}, want {want}", r.status));
            break;
        }
    }
    verdict(
        7,
        "truncated probes split 301/404 exhaustively",
        t.elapsed(),
        None,
        outcome,
    );
}

#[test]
fn criterion_08_compliance_mapping() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let hyd = emulated(Scenario::Hydration, Toggles::all_on(), dir.path());
    let mut findings = run_passive(&hyd.txns, &hyd.profile, &DetectorConfig::default());
    findings.extend(active_findings(Toggles::all_on()));
    let catalog = default_catalog();
    let violations = map_findings(&findings, &catalog);

    let triggers: BTreeMap<&str, BTreeSet<DetectorId>> = [
        (
            "COPPA-312.8",
            [
                DetectorId::Cleartext,
                DetectorId::PiiExposure,
                DetectorId::NoAuth,
                DetectorId::Oracle,
                DetectorId::PiiThirdParty,
            ]
            .into(),
        ),
        ("COPPA-312.10", [DetectorId::StaleResource].into()),
        ("PP-SSL", [DetectorId::Cleartext].into()),
        ("PP-SECURED-NET", [DetectorId::NoAuth, DetectorId::Oracle].into()),
    ]
    .into();
    let mut outcome = Ok(());
    for must in ["COPPA-312.8", "COPPA-312.10", "PP-SSL"] {
        if !violations.iter().any(|v| v.clause_id == must) {
            outcome = Err(format!("missing {must}"));
        }
    }
    for v in &violations {
        let Some(dets) = triggers.get(v.clause_id.as_str()) else {
            outcome = Err(format!("unexpected clause {}", v.clause_id));
            continue;
        };
        let want: Vec<usize> = findings
            .iter()
            .enumerate()
            .filter(|(_, f)| dets.contains(&f.detector_id))
            .map(|(i, _)| i)
            .collect();
        if v.supporting_findings != want {
            outcome = Err(format!(
                "{}: supporting {:?}, want {want:?}",
                v.clause_id, v.supporting_findings
            ));
        }
    }
    let stale_only: Vec<Finding> = findings
        .iter()
        .filter(|f| f.detector_id == DetectorId::StaleResource)
        .cloned()
        .collect();
    let clauses: BTreeSet<String> = map_findings(&stale_only, &catalog)
        .into_iter()
        .map(|v| v.clause_id)
        .collect();
    if outcome.is_ok() {
        outcome = check(
            !stale_only.is_empty() && clauses == ["COPPA-312.10".to_string()].into(),
            || format!("stale-only maps to {clauses:?}"),
        );
    }
    verdict(8, "compliance mapping", t.elapsed(), None, outcome);
}

#[test]
fn criterion_09_static_scan() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let root = write_smartpet_source(dir.path()).unwrap();
    let text = std::fs::read_to_string(root.join(NOOK_CONFIG_PATH)).unwrap();
    let mut want: BTreeSet<(String, usize)> = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if PLANTED_SECRETS.iter().any(|name| line.contains(&format!("{name} ="))) {
            want.insert((NOOK_CONFIG_PATH.to_string(), i + 1));
        }
    }
    let report = scan_secrets(&root, &[]).unwrap();
    let got: BTreeSet<(String, usize)> = report
        .findings
        .iter()
        .flat_map(|f| f.evidence.iter())
        .filter_map(|e| match e {
            Evidence::File { file, line } => Some((file.clone(), *line)),
            _ => None,
        })
        .collect();
    let outcome = check(want.len() == 2, || format!("fixture has {} secret lines", want.len()))
        .and_then(|_| {
            check(report.findings.len() == 2, || {
                format!("{} findings", report.findings.len())
            })
        })
        .and_then(|_| {
            check(
                report
                    .findings
                    .iter()
                    .all(|f| f.detector_id == DetectorId::SecretConstant),
                || "non-secret finding".into(),
            )
        })
        .and_then(|_| check(got == want, || format!("evidence {got:?}, want {want:?}")));
    verdict(9, "static scan finds both secrets", t.elapsed(), None, outcome);
}

fn parity(e: &Emulated) -> Result<(), String> {
    let parsed = parse_pcap(&e.pcap).map_err(|err| err.to_string())?;
    let mut expected: Vec<HttpTransaction> = e.txns.iter().map(HttpTransaction::opaque_view).collect();
    let mut got = parsed.transactions;
    if got.len() != expected.len() {
        return Err(format!(
            "{} transactions from pcap, {} from log",
            got.len(),
            expected.len()
        ));
    }
    // timestamps compared separately, everything else must match exactly
    let strip = |t: &HttpTransaction| {
        let mut t = t.clone();
        t.ts_start = 0.0;
        t.ts_end = 0.0;
        serde_json::to_string(&t).unwrap()
    };
    expected.sort_by_key(strip);
    got.sort_by_key(strip);
    for (g, x) in got.iter().zip(&expected) {
        if strip(g) != strip(x) {
            return Err(format!("mismatch: {g:?} vs {x:?}"));
        }
        if (g.ts_start - x.ts_start).abs() > 1e-3 || (g.ts_end - x.ts_end).abs() > 1e-3 {
            return Err(format!("timestamps differ on {} {}", x.host, x.path));
        }
    }
    Ok(())
}

#[test]
fn criterion_10_pcap_jsonl_parity() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut outcome = Ok(());
    for scenario in Scenario::ALL {
        let e = emulated(scenario, Toggles::all_on(), &dir.path().join(scenario.as_str()));
        if let Err(why) = parity(&e) {
            outcome = Err(format!("{scenario}: {why}"));
            break;
        }
    }
    verdict(
        10,
        "pcap and log parse to the same transactions",
        t.elapsed(),
        None,
        outcome,
    );
}

fn wildcard(pattern: &str, host: &str) -> bool {
    let (p, h) = (pattern.to_ascii_lowercase(), host.to_ascii_lowercase());
    match p.strip_prefix("*.") {
        Some(base) => h.len() > base.len() && h.ends_with(&format!(".{base}")),
        None => p == h,
    }
}

#[test]
fn criterion_11_cross_device_overlap() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut captures = Vec::new();
    let mut profiles = Vec::new();
    for scenario in Scenario::ALL {
        let e = emulated(scenario, Toggles::all_on(), &dir.path().join(scenario.as_str()));
        captures.push((e.profile.device_name.clone(), e.txns));
        profiles.push(e.profile);
    }
    // independent count: devices per service label from profile lookups
    let mut per_service: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for ((device, txns), profile) in captures.iter().zip(&profiles) {
        for tx in txns {
            for h in &profile.third_party_hosts {
                if wildcard(&h.pattern, &tx.host) {
                    per_service.entry(h.service.clone()).or_default().insert(device.clone());
                }
            }
        }
    }
    let outcome = cross_device_overlap(&captures, &profiles)
        .map_err(|e| e.to_string())
        .and_then(|report| {
            let shared: Vec<&str> = report
                .services
                .iter()
                .filter(|s| s.device_count == 3)
                .map(|s| s.service.as_str())
                .collect();
            let want: Vec<&str> = per_service
                .iter()
                .filter(|(_, d)| d.len() == 3)
                .map(|(s, _)| s.as_str())
                .collect();
            let mut shared_sorted = shared.clone();
            shared_sorted.sort_unstable();
            check(!shared.is_empty(), || "no service reached by all three devices".into())
                .and_then(|_| check(shared_sorted == want, || format!("shared {shared:?}, want {want:?}")))
        });
    verdict(
        11,
        "analytics service shared by all devices",
        t.elapsed(),
        None,
        outcome,
    );
}
