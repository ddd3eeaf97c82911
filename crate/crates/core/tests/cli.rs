//! End-to-end checks of the command-line interface: exit-status contract,
//! stdout/stderr split, and byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arasim"))
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn synth_reports_demand_and_cross_points() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("topo.json");
    let out = bin()
        .args(["synth", "--spec"])
        .arg(data("ara_example.xml"))
        .arg("--out")
        .arg(&topo)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("buffer demand: 26"), "{text}");
    assert!(text.contains("cross points: 59"), "{text}");
    assert!(text.contains("feasible"), "{text}");
    assert!(topo.exists());
}

#[test]
fn synth_private_uses_one_bank_per_port() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("topo.json");
    let out = bin()
        .args(["synth", "--buffers", "private", "--spec"])
        .arg(data("ara_example.xml"))
        .arg("--out")
        .arg(&topo)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("banks wired: 37"), "{}", stdout(&out));
    assert!(
        stdout(&out).contains("cross points: 37"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn synth_capacity_failure_exits_nonzero() {
    // One declared bank cannot satisfy a demand of two.
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("tiny.xml");
    std::fs::write(
        &spec,
        r#"<system>
  <ACCs>
    <acc type="a" num="2"><port size="4096" num="1"/></acc>
  </ACCs>
  <SharedBuffers size="4096" num="1" numDMACs="1"/>
  <Interconnects><ACCS_to_Buffers type="crossbar" connectivity="2"/></Interconnects>
</system>"#,
    )
    .unwrap();
    let out = bin()
        .args(["synth", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(dir.path().join("t.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("capacity"), "{}", stderr(&out));
    assert!(stdout(&out).is_empty(), "diagnostics belong on stderr");
}

#[test]
fn sim_empty_trace_reports_zeroes() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("empty.trace");
    std::fs::write(&trace, "# nothing scheduled\n").unwrap();
    let out_prefix = dir.path().join("report");
    let out = bin()
        .args(["sim", "--spec"])
        .arg(data("ara_example.xml"))
        .arg("--trace")
        .arg(&trace)
        .arg("--out")
        .arg(&out_prefix)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["total_cycles"], 0);
    assert_eq!(report["tasks_completed"], 0);
    assert_eq!(report["tlb_accesses"], 0);
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn sim_runs_trace_against_saved_topology() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("topo.json");
    assert!(bin()
        .args(["synth", "--spec"])
        .arg(data("ara_example.xml"))
        .arg("--out")
        .arg(&topo)
        .status()
        .unwrap()
        .success());
    let out_prefix = dir.path().join("r");
    let out = bin()
        .args(["sim", "--spec"])
        .arg(data("ara_example.xml"))
        .arg("--topology")
        .arg(&topo)
        .arg("--trace")
        .arg(data("parallel3.trace"))
        .arg("--out")
        .arg(&out_prefix)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["tasks_completed"], 3);
    assert_eq!(report["instances"].as_array().unwrap().len(), 5);
}

#[test]
fn sim_unknown_kernel_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.trace");
    std::fs::write(&trace, "0 app0 run warpdrive 1\n").unwrap();
    let out = bin()
        .args(["sim", "--spec"])
        .arg(data("ara_example.xml"))
        .arg("--trace")
        .arg(&trace)
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("warpdrive"), "{}", stderr(&out));
}

#[test]
fn sim_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out_prefix = dir.path().join(name);
        let out = bin()
            .args(["sim", "--spec"])
            .arg(data("ara_example.xml"))
            .args(["--pattern", "poisson:800:12:3", "--out"])
            .arg(&out_prefix)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        bytes.push((
            std::fs::read(dir.path().join(format!("{name}.json"))).unwrap(),
            std::fs::read(dir.path().join(format!("{name}.csv"))).unwrap(),
        ));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn sweep_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let csv = dir.path().join("s.csv");
    std::fs::write(
        &plan,
        format!(
            r#"{{
  "base_spec": {:?},
  "pattern": "all_parallel:2",
  "axes": {{ "buffers": ["shared", "private"] }},
  "out": {:?}
}}"#,
            data("ara_example.xml")
                .canonicalize()
                .unwrap()
                .display()
                .to_string(),
            csv.display().to_string()
        ),
    )
    .unwrap();
    let out = bin().args(["sweep", "--plan"]).arg(&plan).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("wrote 2 rows"), "{}", stdout(&out));

    let json_out = dir.path().join("summary.json");
    let out = bin()
        .args(["report", "--scenario", "buffers", "--csv"])
        .arg(&csv)
        .arg("--out")
        .arg(&json_out)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("37 banks"), "{text}");
    assert!(text.contains("saving 29.7%"), "{text}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    assert_eq!(summary["metrics"]["private_banks"], 37.0);
}

#[test]
fn report_rejects_unknown_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    std::fs::write(&csv, "version,total_cycles\n1,0\n").unwrap();
    let out = bin()
        .args(["report", "--scenario", "warp", "--csv"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn report_on_malformed_csv_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "version,buffers\n1,shared\n1,private\n").unwrap();
    let out = bin()
        .args(["report", "--scenario", "buffers", "--csv"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing column"), "{}", stderr(&out));
}

#[test]
fn synth_writes_canonical_spec_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec_json = dir.path().join("spec.json");
    let out = bin()
        .args(["synth", "--spec"])
        .arg(data("ara_example.xml"))
        .arg("--out")
        .arg(dir.path().join("t.json"))
        .arg("--spec-json")
        .arg(&spec_json)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let dump: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&spec_json).unwrap()).unwrap();
    assert_eq!(dump["acc_types"][2]["port_count"], 12);
    assert_eq!(dump["interconnect"]["acc_to_buf"]["connectivity"], 3);
}
