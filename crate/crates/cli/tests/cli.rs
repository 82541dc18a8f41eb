use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fkwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fkwalk")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const ZERO: &str = r#"
[problem]
id = "custom"
horizon = 0.2

[kernel]
type = "truncated"
alpha = 0.75
delta = 0.2

[run]
h = 0.1
times = [0.1, 0.2]
trials = 200
seed = 3
"#;

const ATOMIC: &str = r#"
[problem]
id = "atomic"
horizon = 0.3

[kernel]
type = "atomic"
lambda = 1.0
delta = 0.2

[run]
h = 0.1
times = [0.1, 0.3]
trials = 4000
seed = 11

[fd]
h = 0.01
k = 0.01

[oracle]
cells = 200
"#;

const TRUNCATED: &str = r#"
[problem]
id = "example-a"
horizon = 0.2

[kernel]
type = "truncated"
alpha = 0.75
delta = 0.2

[run]
h = 0.1
times = [0.2]
trials = 300
seed = 5

[fd]
h = 0.05
k = 0.01
"#;

#[test]
fn zero_data_gives_zero_means() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", ZERO);
    let out = dir.path().join("out");
    let o = fkwalk(&["run-mc", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for t in ["0.1", "0.2"] {
        let text = std::fs::read_to_string(out.join(format!("mc_t{t}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,mean,stderr,n_trials,seed"));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 19);
        for r in rows {
            let f: Vec<_> = r.split(',').collect();
            assert_eq!(f[1].parse::<f64>().unwrap(), 0.0);
            assert_eq!(f[2].parse::<f64>().unwrap(), 0.0);
            assert_eq!(f[3], "200");
            assert_eq!(f[4], "3");
        }
    }
}

#[test]
fn csv_format_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "atomic.toml", ATOMIC);
    let out = dir.path().join("out");
    let o = fkwalk(&[
        "run-mc",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--time",
        "0.1",
        "--seed",
        "99",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = out.join("mc_t0.1.csv");
    assert!(!out.join("mc_t0.3.csv").exists());
    let bytes = std::fs::read(&csv).unwrap();
    assert!(!bytes.contains(&b'\r'));
    assert_eq!(*bytes.last().unwrap(), b'\n');
    let text = String::from_utf8(bytes).unwrap();
    for line in text.lines().skip(1) {
        for field in line.split(',').take(3) {
            let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
        }
        assert!(line.ends_with(",99"));
    }
    let meta: toml::Value =
        toml::from_str(&std::fs::read_to_string(out.join("mc_t0.1.csv.meta.toml")).unwrap()).unwrap();
    let hash = fkwalk_cli::config::sha256_hex(ATOMIC.as_bytes());
    assert_eq!(meta["config_sha256"].as_str(), Some(hash.as_str()));
    assert_eq!(meta["seed"].as_integer(), Some(99));
    assert_eq!(meta["trials"].as_integer(), Some(4000));
    assert_eq!(meta["command"].as_str(), Some("run-mc"));
    assert!(meta["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert!(meta.get("k").is_none());
    assert_eq!(meta["t_used"].as_float(), Some(0.1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "truncated.toml", TRUNCATED);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&fkwalk(&["run-mc", "--config", s(&cfg), "--out", s(out)])), 0);
        assert_eq!(code(&fkwalk(&["run-fd", "--config", s(&cfg), "--out", s(out)])), 0);
    }
    for name in [
        "mc_t0.2.csv",
        "fd_t0.2.csv",
        "mc_t0.2.csv.meta.toml",
        "fd_t0.2.csv.meta.toml",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let c = dir.path().join("c");
    fkwalk(&["run-mc", "--config", s(&cfg), "--out", s(&c), "--seed", "6"]);
    assert_ne!(
        std::fs::read(a.join("mc_t0.2.csv")).unwrap(),
        std::fs::read(c.join("mc_t0.2.csv")).unwrap()
    );
}

#[test]
fn mc_agrees_with_oracle_and_fd() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "atomic.toml", ATOMIC);
    let out = dir.path().join("out");
    for cmd in ["run-mc", "run-oracle", "run-fd"] {
        let o = fkwalk(&[cmd, "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for t in ["0.1", "0.3"] {
        let mc = out.join(format!("mc_t{t}.csv"));
        for reference in ["oracle", "fd"] {
            let r = out.join(format!("{reference}_t{t}.csv"));
            let o = fkwalk(&["compare", s(&mc), s(&r)]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
            assert!(String::from_utf8_lossy(&o.stdout).contains("result = pass"));
        }
    }
}

#[test]
fn compare_identical_and_corrupted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "atomic.toml", ATOMIC);
    let out = dir.path().join("out");
    assert_eq!(
        code(&fkwalk(&[
            "run-mc",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--time",
            "0.3"
        ])),
        0
    );
    let mc = out.join("mc_t0.3.csv");
    let text = std::fs::read_to_string(&mc).unwrap();
    let as_ref: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<_> = l.split(',').collect();
            if i == 0 {
                "x,u\n".to_string()
            } else {
                format!("{},{}\n", f[0], f[1])
            }
        })
        .collect();
    let same = write(dir.path(), "same.csv", &as_ref);
    let o = fkwalk(&[
        "compare",
        s(&mc),
        s(&same),
        "--tol",
        "0",
        "--z",
        "0",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let report = std::fs::read_to_string(dir.path().join("compare_report.txt")).unwrap();
    assert!(report.contains("max_abs_diff = 0.0000000000000000e0"));

    let bad: String = as_ref
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 5 {
                format!("{},7.0\n", l.split(',').next().unwrap())
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    let bad = write(dir.path(), "bad.csv", &bad);
    let o = fkwalk(&["compare", s(&mc), s(&bad)]);
    assert_eq!(code(&o), 3);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("rows_outside_band = 1"));
    assert!(stdout.contains("outside: x = -5.0000000000000000e-1"), "{stdout}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (
            "bad-phi",
            ZERO.replace("id = \"custom\"", "id = \"custom\"\nphi = \"sin(\""),
        ),
        ("unknown-id", ZERO.replace("custom", "example-z")),
        (
            "fixed-data",
            ZERO.replace("id = \"custom\"", "id = \"example-a\"\nphi = \"x\""),
        ),
        ("bad-h", ZERO.replace("h = 0.1", "h = 0.3")),
        ("late-time", ZERO.replace("[0.1, 0.2]", "[0.5]")),
        ("bad-alpha", ZERO.replace("alpha = 0.75", "alpha = 1.5")),
        ("unknown-key", ZERO.replace("seed = 3", "seed = 3\ncolour = 1")),
        ("not-toml", "[problem".to_string()),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), &format!("{name}.toml"), &text);
        let o = fkwalk(&["run-mc", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&o), 1, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.exists());
    let cfg = write(dir.path(), "zero.toml", ZERO);
    assert_eq!(code(&fkwalk(&["run-fd", "--config", s(&cfg)])), 1);
    assert_eq!(code(&fkwalk(&["run-oracle", "--config", s(&cfg)])), 1);
    assert_eq!(code(&fkwalk(&["run-heatkernel", "--config", s(&cfg)])), 1);
    assert_eq!(code(&fkwalk(&["run-mc", "--config", s(&cfg), "--trials", "5"])), 1);
    assert_eq!(code(&fkwalk(&["run-mc"])), 1);
    assert_eq!(code(&fkwalk(&["frobnicate"])), 1);
    assert_eq!(code(&fkwalk(&["run-mc", "--config", "/nonexistent.toml"])), 1);
    assert_eq!(code(&fkwalk(&["--help"])), 0);
    assert_eq!(code(&fkwalk(&["--version"])), 0);
}

#[test]
fn weights_table() {
    let o = fkwalk(&["weights", "--alpha", "0.5", "--delta", "1", "--k", "0.25"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(text.lines().next(), Some("j,omega,p"));
    assert_eq!(rows.len(), 5);
    let omega: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((omega[0] - omega[1..].iter().sum::<f64>()).abs() < 1e-15);
    assert_eq!(omega[1], 1.0);
    assert!((omega[2] - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
    assert_eq!(rows[0][2], "");
    let p: f64 = rows[1..].iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((p - 1.0).abs() < 1e-15);
    assert_eq!(
        code(&fkwalk(&["weights", "--alpha", "0.5", "--delta", "1", "--k", "0.3"])),
        1
    );

    let dir = tempfile::tempdir().unwrap();
    let o = fkwalk(&[
        "weights",
        "--alpha",
        "0.5",
        "--delta",
        "1",
        "--k",
        "0.25",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("weights.csv")).unwrap(), text);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            fkwalk_cli::config::load(&p, &Default::default()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}
