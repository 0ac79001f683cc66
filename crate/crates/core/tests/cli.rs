use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fhnreg::cli::Manifest;
use fhnreg::noise::Field;
use sha2::{Digest, Sha256};

struct Sandbox(PathBuf);

impl Sandbox {
    fn new(tag: &str) -> Sandbox {
        let p = std::env::temp_dir().join(format!("fhnreg-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&p);
        std::fs::create_dir_all(&p).unwrap();
        Sandbox(p)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fhnreg"))
            .args(args)
            .env("FHNREG_OUT", self.0.join("out"))
            .current_dir(&self.0)
            .output()
            .unwrap()
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

impl Drop for Sandbox {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_dir(o: &Output) -> PathBuf {
    let s = stdout(o);
    let line = s.lines().find_map(|l| l.strip_prefix("output: ")).expect("output line");
    PathBuf::from(line)
}

fn checked_manifest(dir: &Path) -> Manifest {
    let m = Manifest::read(&dir.join("manifest.toml")).unwrap();
    for f in &m.files {
        let bytes = std::fs::read(dir.join(&f.name)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256, "{}", f.name);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
    m
}

#[test]
fn symbols_below_zero_match_the_negative_rows() {
    let sb = Sandbox::new("symbols");
    let o = sb.run(&["symbols", "--dim", "3", "--cutoff", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let dir = run_dir(&o);
    assert!(dir.starts_with(sb.0.join("out").join("symbols")));
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with("-0"));
    let csv = std::fs::read_to_string(dir.join("symbols.csv")).unwrap();
    let names: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    for want in ["Xi", "RSW", "RSV", "RSWW", "RSI", "RSVW", "RSWV", "RSV*X1", "RSV*X2", "RSV*X3", "One"] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
    assert_eq!(names.len(), 11);
    assert!(csv.contains("RSWW (x) 1 + RSV (x) J(RSW)"));
    let m = checked_manifest(&dir);
    assert_eq!(m.subcommand, "symbols");
    assert_eq!(m.status, "ok");
}

#[test]
fn coproduct_and_zero_symbols() {
    let sb = Sandbox::new("coproduct");
    let o = sb.run(&["coproduct", "I(I(Xi)^3)*I(Xi)^2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Delta = RSWW (x) 1 + RSV (x) J(RSW)"));
    let o = sb.run(&["coproduct", "I(X1)"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("is zero"));
}

#[test]
fn renormalised_fhn_equation() {
    let sb = Sandbox::new("renorm");
    let o = sb.run(&["renorm-eq", "--dim", "3", "--F", "u - u^3 + v"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("coefficient of u: [1 + 3*C1 - 9*C2]"), "{s}");
    let o = sb.run(&["renorm-eq", "--dim", "3", "--F", "u^2*v"]);
    assert!(stdout(&o).contains("not of the local form"));
    let o = sb.run(&["renorm-eq", "--dim", "2", "--F", "u - u^3 + v", "--eps", "1/8"]);
    assert_eq!(o.status.code(), Some(0));
    let m = checked_manifest(&run_dir(&o));
    // d = 2: c1 = 3 C1
    assert!((m.constants["c1"] - 3.0 * m.constants["C1"]).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_with_one() {
    let sb = Sandbox::new("usage");
    assert_eq!(sb.run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sb.run(&["coproduct", "I(Xi"]).status.code(), Some(1));
    assert_eq!(sb.run(&["simulate", "--config", "missing.toml"]).status.code(), Some(1));
    assert_eq!(sb.run(&["renorm-eq", "--F", "u^4"]).status.code(), Some(1));
    assert_eq!(sb.run(&["constants", "--eps", "1/16,1/8"]).status.code(), Some(1));
    sb.write("bad.toml", "[grid]\nd = 2\nn = 32\n[noise]\neps = 0.01\n");
    assert_eq!(sb.run(&["simulate", "--config", "bad.toml"]).status.code(), Some(1));
    assert_eq!(sb.run(&["--help"]).status.code(), Some(0));
}

const SMALL: &str = "[grid]\nd = 2\nn = 32\ndt = 1e-3\nt_end = 0.05\n\n[noise]\nseed = 3\neps = 0.125\n\n[output]\ncadence = 10\nsnapshot_every = 25\n";

#[test]
fn simulate_writes_fields_and_replays_exactly() {
    let sb = Sandbox::new("simulate");
    sb.write("run.toml", SMALL);
    let o = sb.run(&["simulate", "--config", "run.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with("-3"));
    let m = checked_manifest(&dir);
    assert_eq!(m.seeds, vec![3]);
    assert!(m.constants["C1"] > 0.0);
    let csv = std::fs::read_to_string(dir.join("norms.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,sup_u,l2_u,sup_v,l2_v,sup_phi"));
    assert_eq!(csv.lines().count(), 1 + 6);
    let u = Field::read(&dir.join("u_final")).unwrap();
    assert_eq!((u.meta.d, u.meta.n, u.meta.nt), (2, 32, 1));
    assert!(u.is_finite());
    let snaps = Field::read(&dir.join("u_snapshots")).unwrap();
    assert_eq!(snaps.meta.nt, 2);
    assert_eq!(snaps.slice(1), u.slice(0));

    let o = sb.run(&["replay", dir.join("manifest.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("11 files reproduced"));
    let again = checked_manifest(&run_dir(&o));
    assert_eq!(again.config, m.config);

    // a different seed changes the outputs
    let o = sb.run(&["simulate", "--config", "run.toml", "--seed", "4"]);
    let other = checked_manifest(&run_dir(&o));
    assert_ne!(other.files[0].sha256, m.files[0].sha256);
}

#[test]
fn replay_detects_tampering() {
    let sb = Sandbox::new("tamper");
    let o = sb.run(&["symbols", "--dim", "2"]);
    let dir = run_dir(&o);
    let path = dir.join("manifest.toml");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut m: Manifest = toml::from_str(&text).unwrap();
    m.files[0].sha256 = "0".repeat(64);
    std::fs::write(&path, toml::to_string(&m).unwrap()).unwrap();
    assert_eq!(sb.run(&["replay", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn flag_overrides_the_environment_root() {
    let sb = Sandbox::new("root");
    let other = sb.0.join("elsewhere");
    let o = sb.run(&["--out", other.to_str().unwrap(), "symbols", "--dim", "2"]);
    assert!(run_dir(&o).starts_with(&other));
}

#[test]
fn coarse_sweep_reports_a_tolerance_failure() {
    // at 32² the mollification differences dominate, so D(ε) need not decrease
    let sb = Sandbox::new("converge");
    sb.write("sweep.toml", "[grid]\nd = 2\nn = 32\ndt = 1e-3\nt_end = 0.05\n\n[noise]\nseed = 1\neps_list = [0.25, 0.125, 0.0625]\n");
    let o = sb.run(&["converge", "--config", "sweep.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = run_dir(&o);
    let m = checked_manifest(&dir);
    assert_eq!(m.status, "tolerance");
    let csv = std::fs::read_to_string(dir.join("converge.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(m.constants["q_l1"] > 0.0);
}

#[test]
fn bounds_and_constants_tables() {
    let sb = Sandbox::new("numeric");
    let o = sb.run(&["verify-bounds", "--eps", "1/8,1/16"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(run_dir(&o).join("bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    // an impossible error budget is a tolerance failure, not a crash
    let o = sb.run(&["constants", "--dim", "2", "--eps", "1/8", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = run_dir(&o);
    let csv = std::fs::read_to_string(dir.join("constants.csv")).unwrap();
    assert!(csv.starts_with("eps,C1,C2,I00,I01,I02,I11,I12,I22,err_C1,err_C2,err_I00"));
    assert!(std::fs::read_to_string(dir.join("fit.toml")).unwrap().contains("C1 = a + b*ln(1/eps)"));
}
