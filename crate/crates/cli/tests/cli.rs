use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_phonograde");

fn phonograde(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("PHONOGRADE_JOBS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Corpus {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Corpus {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let c = root.join("corpus");
        let out = phonograde(&[
            "synth", "--speakers", "6", "--segments", "20", "--plant", "B6:F,V:1.0", "--phonemes", "S,M", "--seed",
            "7", "--out", s(&c),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let ratings = std::fs::read_to_string(c.join("ratings.csv")).unwrap();
        let kept: String = ratings
            .lines()
            .filter(|l| l.starts_with("speaker_id") || l.contains(",B6,") || l.contains(",B7,"))
            .map(|l| format!("{l}\n"))
            .collect();
        std::fs::write(c.join("ratings.csv"), kept).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn inputs(&self) -> Vec<String> {
        let c = self.path("corpus");
        vec![
            "--audio".into(),
            s(&c.join("audio")).into(),
            "--seg".into(),
            s(&c.join("segments.tsv")).into(),
            "--ratings".into(),
            s(&c.join("ratings.csv")).into(),
            "--trees".into(),
            "20".into(),
            "--seed".into(),
            "3".into(),
            "--phonemes".into(),
            "F,V,S,M".into(),
        ]
    }

    fn run(&self, cmd: &str, out: &Path, extra: &[&str]) -> Output {
        let mut args: Vec<String> = vec![cmd.into()];
        args.extend(self.inputs());
        args.extend(["--out".to_string(), s(out).to_string()]);
        args.extend(extra.iter().map(|x| x.to_string()));
        phonograde(&args.iter().map(String::as_str).collect::<Vec<_>>())
    }
}

fn picks_f_and_v(stdout: &str) -> bool {
    stdout
        .lines()
        .any(|l| l.starts_with("B6\tHostility\t") && l.contains("F(") && l.contains("V("))
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&phonograde(&["--help"])), 0);
    assert_eq!(code(&phonograde(&["--version"])), 0);
    assert_eq!(code(&phonograde(&["run", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&phonograde(&[])), 1);
    assert_eq!(code(&phonograde(&["evaluate", "--bogus"])), 1);
    assert_eq!(code(&phonograde(&["run", "--out", "/tmp/x", "--ratings", "/no/such/file.csv"])), 1);
    assert_eq!(code(&phonograde(&["run", "--p-select", "1.5", "--out", "/tmp/x"])), 1);
    assert_eq!(code(&phonograde(&["run", "--phonemes", "QQ", "--out", "/tmp/x"])), 1);
    let out = phonograde(&["evaluate", "--out", "/tmp/x"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing --ratings"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("ratings.csv");
    std::fs::write(&bad, "speaker_id,symptom_code,rating\nS01,M1,9\n").unwrap();
    let seg = dir.path().join("seg.tsv");
    std::fs::write(&seg, "recording_id\tspeaker_id\tstart_s\tdur_s\tlabel\n").unwrap();
    let out = phonograde(&[
        "run", "--audio", s(dir.path()), "--seg", s(&seg), "--ratings", s(&bad), "--out", s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let out = phonograde(&["select", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_writes_corpus_and_manifest() {
    let c = Corpus::new();
    let dir = c.path("corpus");
    for f in ["segments.tsv", "ratings.csv", "manifest.json", "audio/S01_rec.wav", "audio/S06_rec.wav"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["planted"][0]["symptom"], "B6");
    assert_eq!(manifest["phonemes"], serde_json::json!(["F", "M", "S", "V"]));
    let rows = read(dir.join("segments.tsv")).lines().count();
    assert_eq!(rows, 1 + 6 * 4 * 20);
}

#[test]
fn run_matches_stepwise_pipeline() {
    let c = Corpus::new();
    let full = c.path("full");
    let out = c.run("run", &full, &["--jobs", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(picks_f_and_v(&stdout), "{stdout}");
    for f in ["pairs.csv", "speaker_means.csv", "run.json", "selection.json", "report.json", "report.md", "chart.json"] {
        assert!(full.join(f).exists(), "{f}");
    }

    let steps = c.path("steps");
    assert_eq!(code(&c.run("evaluate", &steps, &[])), 0);
    assert_eq!(code(&phonograde(&["select", "--out", s(&steps)])), 0);
    assert_eq!(code(&phonograde(&["report", "--out", s(&steps)])), 0);
    for f in ["pairs.csv", "report.json", "report.md", "chart.json"] {
        assert_eq!(read(full.join(f)), read(steps.join(f)), "{f}");
    }

    let report: serde_json::Value = serde_json::from_str(&read(full.join("report.json"))).unwrap();
    assert_eq!(report["schema"], "phonograde/1");
    assert_eq!(report["run"]["seed"], 3);
    assert_eq!(report["run"]["config"]["rf"]["n_trees"], 20);
    assert!(report["run"]["config"].get("jobs").is_none());
    let b6 = report["symptoms"].as_array().unwrap().iter().find(|x| x["symptom"] == "B6").unwrap();
    let picked: Vec<&str> = b6["selected"].as_array().unwrap().iter().map(|x| x["phoneme"].as_str().unwrap()).collect();
    assert!(picked.contains(&"F") && picked.contains(&"V"), "{picked:?}");
}

#[test]
fn tampered_run_is_rejected() {
    let c = Corpus::new();
    let out = c.path("o");
    assert_eq!(code(&c.run("evaluate", &out, &[])), 0);
    let pairs = read(out.join("pairs.csv"));
    std::fs::write(out.join("pairs.csv"), pairs.replacen(",evaluated", ",degenerate", 1)).unwrap();
    let res = phonograde(&["select", "--out", s(&out)]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("inconsistent run"));
}

#[test]
fn features_csv_feeds_evaluate() {
    let c = Corpus::new();
    let feats = c.path("feats");
    assert_eq!(code(&c.run("features", &feats, &[])), 0);
    let header = read(feats.join("features.csv")).lines().next().unwrap().to_string();
    assert!(header.starts_with("recording_id,speaker_id,phoneme,start_s,dur_s,f00"));
    let ratings = c.path("corpus").join("ratings.csv");
    let out = c.path("from_features");
    let res = phonograde(&[
        "run", "--features", s(&feats.join("features.csv")), "--ratings", s(&ratings), "--out", s(&out), "--trees", "20",
        "--seed", "3", "--phonemes", "F,V,S,M",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(picks_f_and_v(&String::from_utf8_lossy(&res.stdout)));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let c = Corpus::new();
    let cfg = c.path("cfg.json");
    std::fs::write(&cfg, r#"{"trees": 5, "order": 32, "min_instances": 10}"#).unwrap();
    let out = c.path("o");
    let res = c.run("evaluate", &out, &["--config", s(&cfg), "--min-instances", "12"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let run: serde_json::Value = serde_json::from_str(&read(out.join("run.json"))).unwrap();
    assert_eq!(run["config"]["rf"]["n_trees"], 20);
    assert_eq!(run["config"]["min_instances"], 12);
    assert_eq!(run["config"]["features"]["order"], 32);
    std::fs::write(&cfg, r#"{"tress": 5}"#).unwrap();
    assert_eq!(code(&c.run("evaluate", &out, &["--config", s(&cfg)])), 1);
}

#[test]
fn jobs_env_is_honoured_and_validated() {
    let c = Corpus::new();
    let mut args = vec!["evaluate".to_string()];
    args.extend(c.inputs());
    args.extend(["--out".into(), s(&c.path("o")).into()]);
    let ok = Command::new(BIN).args(&args).env("PHONOGRADE_JOBS", "2").output().unwrap();
    assert_eq!(code(&ok), 0);
    let bad = Command::new(BIN).args(&args).env("PHONOGRADE_JOBS", "many").output().unwrap();
    assert_eq!(code(&bad), 1);
}
