use std::net::TcpListener;
use std::process::{Command, Stdio};

use priv_ebc::{ClampMode, Protocol, ProtocolConfig, SessionRng};
use priv_ebc_experiment::{read_csv, Dataset, ExperimentConfig, RowKind, SyntheticSpec};
use rand::SeedableRng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_priv-ebc"))
}

#[test]
fn sweep_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let status = bin()
        .args([
            "sweep",
            "--synthetic",
            "n=300,m=2,seed=5",
            "--egos",
            "4",
            "--eps",
            "0.5,1",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(
        rows.iter().filter(|r| r.trial == RowKind::Summary).count(),
        2
    );
    assert_eq!(
        rows.iter()
            .filter(|r| matches!(r.trial, RowKind::Trial(_)))
            .count(),
        8
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["mode"], "sweep");
    assert_eq!(meta["non_private"], false);
}

#[test]
fn stdout_when_no_out() {
    let out = bin()
        .args([
            "isolate",
            "--synthetic",
            "n=100,m=2",
            "--egos",
            "2",
            "--mech-masks",
            "none,all",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = read_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 2 * 2 + 2);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| {
        bin()
            .args(args)
            .stderr(Stdio::null())
            .stdout(Stdio::null())
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(
        code(&["sweep", "--synthetic", "n=50,m=2", "--eps", "-1"]),
        Some(2)
    );
    assert_eq!(
        code(&["sweep", "--synthetic", "n=50,m=2", "--trials", "0"]),
        Some(2)
    );
    assert_eq!(code(&["sweep", "--synthetic", "n=5,m=9"]), Some(2));
    assert_eq!(code(&["sweep"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(
        code(&["sweep", "--graph", "/nonexistent/edges.txt"]),
        Some(3)
    );
    assert_eq!(
        code(&[
            "sweep",
            "--synthetic",
            "n=50,m=2",
            "--egos",
            "2",
            "--out",
            "/nonexistent/dir/r.csv"
        ]),
        Some(3)
    );
}

#[test]
fn two_processes_match_in_process_run() {
    let spec = "n=400,m=4,seed=8";
    let mut config = ExperimentConfig::synthetic(spec.parse::<SyntheticSpec>().unwrap(), vec![1.0]);
    config.partition_seed = 2;
    let ds = Dataset::load(&config).unwrap();
    // An ego that triggers the exchange.
    let x_view = ds.graph.x_view();
    let ego = ds
        .graph
        .nodes_of(priv_ebc::Party::X)
        .find(|&v| {
            priv_ebc::ego_context(&x_view, v)
                .unwrap()
                .y_neighbours
                .len()
                >= 3
        })
        .unwrap();
    let label = ds.graph.graph().label(ego).to_owned();
    let pc = ProtocolConfig::new(1.0)
        .unwrap()
        .with_clamp(ClampMode::ClampNonneg);
    let local = Protocol::new(&ds.graph, pc)
        .run(ego, &mut SessionRng::seed_from_u64(11))
        .unwrap();

    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let common = |role: &str| {
        let mut c = bin();
        c.args([
            "party",
            role,
            "--synthetic",
            spec,
            "--partition-seed",
            "2",
            "--addr",
            &addr,
            "--ego",
            &label,
            "--eps",
            "1",
            "--seed",
            "11",
        ]);
        c
    };
    let y = common("y")
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let x = common("x").output().unwrap();
    let y_out = y.wait_with_output().unwrap();
    assert!(x.status.success(), "{}", String::from_utf8_lossy(&x.stderr));
    assert!(y_out.status.success());
    let value: f64 = String::from_utf8(x.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(value.to_bits(), local.value.to_bits());
}
