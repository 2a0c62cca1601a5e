use proptest::prelude::*;
use toyaudit_core::capture::{
    parse_pcap, parse_transaction_log, write_pcap, write_transaction_log, DeviceProfile, HeaderList,
};
use toyaudit_core::compliance::{default_catalog, map_findings, render_report, AuditReport, ReportFormat};
use toyaudit_core::detect::{run_passive, DetectorConfig};
use toyaudit_core::{DetectorId, HttpTransaction, Method};

const PROFILE: &str = r#"{
  "device_name": "bottle",
  "first_party_hosts": ["*.toymaker.test"],
  "third_party_hosts": [{"pattern": "*.analytics-1.test", "service": "analytics-1"}]
}"#;

fn txn(i: u16, host: &str, method: Method, path: &str, body: &[u8]) -> HttpTransaction {
    let mut req_headers = HeaderList::from_pairs([("Host", host)]);
    if !body.is_empty() {
        req_headers.push("Content-Type", "application/json");
        req_headers.push("Content-Length", body.len().to_string());
    }
    HttpTransaction {
        ts_start: 1000.0 + f64::from(i),
        ts_end: 1000.25 + f64::from(i),
        src_ip: "192.168.4.23".parse().unwrap(),
        src_port: 50_000 + i,
        dst_ip: "203.0.113.10".parse().unwrap(),
        dst_port: 80,
        host: host.into(),
        tls: false,
        method,
        path: path.into(),
        req_headers,
        status: 200,
        resp_headers: HeaderList::from_pairs([("Content-Type", "text/plain"), ("Content-Length", "2")]),
        req_body: body.to_vec(),
        resp_body: b"ok".to_vec(),
        req_bytes: 0,
        resp_bytes: 0,
    }
    .with_wire_sizes()
}

#[test]
fn pcap_to_report() {
    let body = br#"{"name":"Ava","birthday":"2010-04-02","weight":31}"#;
    let txns = vec![
        txn(0, "api.toymaker.test", Method::Post, "/api/account", body),
        txn(1, "api.toymaker.test", Method::Get, "/api/config", b""),
        txn(2, "www.analytics-1.test", Method::Get, "/collect", b""),
    ];
    let mut pcap = Vec::new();
    write_pcap(&txns, &mut pcap).unwrap();
    let parsed = parse_pcap(&pcap).unwrap();
    assert!(parsed.warnings.is_empty());
    assert_eq!(parsed.transactions.len(), 3);

    let profile = DeviceProfile::from_json(PROFILE).unwrap();
    let findings = run_passive(&parsed.transactions, &profile, &DetectorConfig::default());
    let ids: Vec<DetectorId> = findings.iter().map(|f| f.detector_id).collect();
    assert!(ids.contains(&DetectorId::Cleartext));
    assert!(ids.contains(&DetectorId::PiiExposure));

    let violations = map_findings(&findings, &default_catalog());
    let clauses: Vec<&str> = violations.iter().map(|v| v.clause_id.as_str()).collect();
    assert!(clauses.contains(&"COPPA-312.8"));
    assert!(clauses.contains(&"PP-SSL"));
    assert!(!clauses.contains(&"COPPA-312.10"));

    let report = AuditReport {
        device_name: profile.device_name.clone(),
        capture_summary: toyaudit_core::capture::endpoint_stats(&parsed.transactions, &profile),
        findings,
        violations,
        generated_at: "2017-11-06T20:26:40Z".into(),
    };
    let json: serde_json::Value = serde_json::from_slice(&render_report(&report, ReportFormat::Json).unwrap()).unwrap();
    assert_eq!(json["device_name"], "bottle");
    assert_eq!(json["capture_summary"].as_array().unwrap().len(), 2);
    let md = String::from_utf8(render_report(&report, ReportFormat::Markdown).unwrap()).unwrap();
    assert!(md.contains("PP-SSL"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cleartext_round_trips_through_both_formats(
        paths in prop::collection::vec("/[a-z]{1,12}", 1..6),
        body in prop::collection::vec(any::<u8>(), 0..3000),
    ) {
        let txns: Vec<HttpTransaction> = paths
            .iter()
            .enumerate()
            .map(|(i, p)| txn(i as u16, "api.toymaker.test", Method::Post, p, &body))
            .collect();
        let log = write_transaction_log(&txns);
        prop_assert_eq!(&parse_transaction_log(&log).unwrap(), &txns);

        let mut pcap = Vec::new();
        write_pcap(&txns, &mut pcap).unwrap();
        let mut got = parse_pcap(&pcap).unwrap().transactions;
        got.sort_by_key(|t| t.src_port);
        prop_assert_eq!(got.len(), txns.len());
        for (g, t) in got.iter().zip(&txns) {
            prop_assert_eq!(&g.path, &t.path);
            prop_assert_eq!(&g.req_body, &t.req_body);
            prop_assert_eq!(g.req_bytes, t.req_bytes);
            prop_assert!((g.ts_start - t.ts_start).abs() <= 1e-3);
        }
    }
}
