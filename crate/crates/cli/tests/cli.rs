use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_nullkirch");

fn shipped(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    fs::read_to_string(path).unwrap()
}

/// The Kirchhoff case on a coarse two-rung ladder.
fn small_kirchhoff() -> String {
    let text = shipped("kirchhoff.toml");
    let start = text.find("[[cases.ladder]]").unwrap();
    let ladder = "[[cases.ladder]]\nn_theta = 4\nn_phi = 8\nn_v = 16\n\n[[cases.ladder]]\nn_theta = 8\nn_phi = 16\nn_v = 32\n\n";
    let claims = "[[cases.claims]]\nkind = \"bound\"\nmetric = \"tr_chi_exactness\"\nmax = 1e-9\n";
    format!("{}{ladder}{claims}", &text[..start]).replace("out = \"kirchhoff-out\"\n", "")
}

struct Run {
    dir: TempDir,
    config: PathBuf,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, config).unwrap();
        Run { dir, config: path }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn exec(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .current_dir(self.dir.path())
            .env_remove("NULLKIRCH_THREADS")
            .args(args)
            .arg("--config")
            .arg(&self.config)
            .output()
            .unwrap()
    }

    fn exec_out(&self, args: &[&str]) -> Output {
        let out = self.out();
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", out.to_str().unwrap()]);
        self.exec(&full)
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_metric_exits_2_without_output() {
    let text = small_kirchhoff().replace("[cases.metric]\nkind = \"minkowski\"\n", "");
    let run = Run::new(&text);
    let o = run.exec_out(&["verify"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("metric"), "{}", stderr(&o));
    assert!(!run.out().exists());
}

#[test]
fn unknown_keys_and_bad_flags_exit_2() {
    let run = Run::new(&format!("colour = \"blue\"\n{}", small_kirchhoff()));
    let o = run.exec_out(&["cone"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!run.out().exists());

    let run = Run::new(&small_kirchhoff());
    assert_eq!(
        run.exec_out(&["cone", "--rung", "5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run.exec_out(&["cone", "--case", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run.exec_out(&["cone", "--jobs", "0"]).status.code(),
        Some(2)
    );
    assert!(!run.out().exists());
}

#[test]
fn thread_variable_is_a_jobs_fallback() {
    let run = Run::new(&small_kirchhoff());
    let o = Command::new(BIN)
        .current_dir(run.dir.path())
        .env("NULLKIRCH_THREADS", "0")
        .args(["cone", "--config"])
        .arg(&run.config)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(BIN)
        .current_dir(run.dir.path())
        .env("NULLKIRCH_THREADS", "0")
        .args(["cone", "--jobs", "1", "--config"])
        .arg(&run.config)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn out_flag_overrides_the_file() {
    let text = format!("out = \"from-file\"\n{}", small_kirchhoff());
    let run = Run::new(&text);
    assert!(run.exec(&["cone"]).status.success());
    assert!(run.dir.path().join("from-file/cone.csv").exists());
    assert!(run.exec_out(&["cone"]).status.success());
    assert!(run.out().join("cone.csv").exists());
}

#[test]
fn cone_and_transport_dumps_have_headers_and_rows() {
    let run = Run::new(&small_kirchhoff());
    let o = run.exec_out(&["transport"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cone = fs::read_to_string(run.out().join("cone.csv")).unwrap();
    assert!(cone.starts_with("iv,j,f,theta,phi,valid,s,x0,x1,x2,x3,lapse,density\n"));
    // 17 slices of 4 x 8 angles.
    assert_eq!(cone.lines().count(), 1 + 17 * 32);
    let scalars = fs::read_to_string(run.out().join("scalars.csv")).unwrap();
    assert!(scalars.starts_with("iv,j,tr_chi,"));
    assert_eq!(scalars.lines().count(), 1 + 17 * 32);
    let kernel = fs::read_to_string(run.out().join("kernel.csv")).unwrap();
    assert!(kernel.starts_with("iv,j,component,b\n"));
    assert_eq!(kernel.lines().count(), 1 + 17 * 32);
}

#[test]
fn evaluate_prints_the_breakdown() {
    let run = Run::new(&small_kirchhoff());
    let o = run.exec_out(&["evaluate", "--rung", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["F ", "E1 ", "E2 ", "I ", "lhs ", "residual "] {
        assert!(
            text.lines().any(|l| l.starts_with(key)),
            "{key} missing from\n{text}"
        );
    }
    let mut rdr = csv::Reader::from_path(run.out().join("breakdown.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |k: &str| {
        row[headers.iter().position(|h| h == k).unwrap()]
            .parse::<f64>()
            .unwrap()
    };
    let (f, e1, e2, i, lhs, residual) = (
        get("f"),
        get("e1"),
        get("e2"),
        get("i"),
        get("lhs"),
        get("residual"),
    );
    assert!((lhs - (f + e1 + e2 + i) - residual).abs() < 1e-12 * lhs.abs());
    assert!(residual.abs() < 1e-3 * lhs.abs());
}

#[test]
fn reruns_are_byte_identical() {
    let run = Run::new(&small_kirchhoff());
    let files = [
        "metrics.csv",
        "claims.csv",
        "orders.csv",
        "breakdown.csv",
        "summary.txt",
    ];
    assert!(run.exec_out(&["verify"]).status.success());
    let first: Vec<Vec<u8>> = files
        .iter()
        .map(|f| fs::read(run.out().join(f)).unwrap())
        .collect();
    assert!(run.exec_out(&["verify", "--jobs", "2"]).status.success());
    for (name, bytes) in files.iter().zip(&first) {
        assert_eq!(
            &fs::read(run.out().join(name)).unwrap(),
            bytes,
            "{name} changed"
        );
    }
}

#[test]
fn failed_claims_exit_1_with_a_report() {
    let text = small_kirchhoff().replace("max = 1e-9", "max = 1e-30");
    let run = Run::new(&text);
    let o = run.exec_out(&["verify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("fail"), "{}", stdout(&o));
    let claims = fs::read_to_string(run.out().join("claims.csv")).unwrap();
    assert!(
        claims.lines().nth(1).unwrap().contains(",fail,"),
        "{claims}"
    );
}

#[test]
fn numerical_failures_exit_1_with_diagnostics() {
    let text = small_kirchhoff().replacen("n_v = 16\n", "n_v = 16\neps0 = 0.9\n", 1);
    let run = Run::new(&text);
    let o = run.exec_out(&["evaluate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eps0"), "{}", stderr(&o));
    let o = run.exec_out(&["verify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILED"), "{}", stdout(&o));
}
