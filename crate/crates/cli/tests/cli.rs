use std::path::Path;
use std::process::{Command, Output};

fn cdrmig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdrmig"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = cdrmig(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) {
    let cfg = dir.join("scenario.txt");
    std::fs::write(&cfg, "agents=30\ncells=12\nurban_cells=2\nmonths=14\nseed=3\n").unwrap();
    ok(&["synth", "--config", s(&cfg), "--out-dir", s(dir)]);
    for f in ["cdr.csv.gz", "network.csv", "strata.csv", "truth.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn stages_compose_to_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let (cdr, net, strata) = (d.join("cdr.csv.gz"), d.join("network.csv"), d.join("strata.csv"));

    let full = d.join("full");
    ok(&["run", "--network", s(&net), "--strata", s(&strata), "--out-dir", s(&full), "--workers", "2", s(&cdr)]);

    let st = d.join("staged");
    ok(&["ingest", "--network", s(&net), "--out-dir", s(&st), s(&cdr)]);
    ok(&["filter", "--profiles", s(&st.join("profiles.csv")), "--out-dir", s(&st)]);
    let (ua, ub) = (st.join("users_A.txt"), st.join("users_B.txt"));
    let seg = st.join("segments.csv.gz");
    ok(&["detect", "--daily", s(&st.join("daily.csv.gz")), "--users", s(&ua), "--users", s(&ub), "--out", s(&seg)]);
    for (name, users) in [("A", &ua), ("B", &ub)] {
        for tau in ["20", "30", "60"] {
            let common = ["--segments", s(&seg), "--network", s(&net), "--users", s(users), "--tau", tau];
            let un = st.join(format!("unweighted_{name}_{tau}days.csv.gz"));
            let mut a = vec!["aggregate"];
            a.extend(common);
            a.extend(["--out", s(&un)]);
            ok(&a);
            let w = st.join(format!("weighted_{name}_{tau}days.csv.gz"));
            let mut b = vec!["weight", "--strata", s(&strata)];
            b.extend(common);
            b.extend(["--out", s(&w)]);
            ok(&b);
        }
    }

    let mut compared = 0;
    for e in std::fs::read_dir(&st).unwrap() {
        let name = e.unwrap().file_name();
        let a = std::fs::read(st.join(&name)).unwrap();
        let b = std::fs::read(full.join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
        compared += 1;
    }
    // daily, profiles, two user lists, segments, twelve tables
    assert_eq!(compared, 17);
    assert!(full.join("run_report.csv").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = d.join("o");
    // weighting without a strata table is a configuration problem
    let r = cdrmig(&["run", "--network", s(&d.join("network.csv")), "--out-dir", s(&out), s(&d.join("cdr.csv.gz"))]);
    assert_eq!(r.status.code(), Some(2));
    // a missing input file is a data problem, and leaves nothing behind
    let r = cdrmig(&[
        "run",
        "--network",
        s(&d.join("network.csv")),
        "--no-weighting",
        "--out-dir",
        s(&out),
        s(&d.join("nope.csv")),
    ]);
    assert_eq!(r.status.code(), Some(3));
    assert_eq!(std::fs::read_dir(&out).map(|r| r.count()).unwrap_or(0), 0);
    let r = cdrmig(&["filter", "--profiles", "x", "--out-dir", s(&out), "--subset", "bad"]);
    assert_eq!(r.status.code(), Some(2));
}
