use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gecdi::synth::{generate, SynthConfig};
use tempfile::TempDir;

fn gecdi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gecdi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gecdi(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    gecdi(dir, args).status.code().unwrap()
}

/// Synthetic train/dev files plus trained base, language and detector
/// models.
struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(pairs: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&SynthConfig { pairs, ..Default::default() }).unwrap();
        let (train, dev) = data.split_at(pairs * 9 / 10);
        let tsv = |ps: &[gecdi::corpus::TextPair]| {
            ps.iter().map(|p| format!("{}\t{}\n", p.source, p.target)).collect::<String>()
        };
        fs::write(dir.path().join("train.tsv"), tsv(train)).unwrap();
        fs::write(dir.path().join("dev.tsv"), tsv(dev)).unwrap();
        let mono: String = train.iter().map(|p| format!("{}\n", p.target)).collect();
        fs::write(dir.path().join("mono.txt"), mono).unwrap();
        let src: String = dev.iter().map(|p| format!("{}\n", p.source)).collect();
        fs::write(dir.path().join("dev.src"), src).unwrap();
        let tgt: String = dev.iter().map(|p| format!("{}\n", p.target)).collect();
        fs::write(dir.path().join("dev.tgt"), tgt).unwrap();
        let ws = Self { dir };
        let d = ws.path();
        ok(d, &["train-gec", "--train", "train.tsv", "--out", "models/gec.json"]);
        ok(d, &["train-lm", "--corpus", "mono.txt", "--out", "models/lm.json", "--vocab-out", "models/lm.vocab"]);
        ok(d, &["gen-ged-data", "--gec", "models/gec.json", "--pairs", "train.tsv", "--out-dir", "ged", "--k", "4", "--beam", "4"]);
        ok(d, &["train-ged", "--data", "ged/all.jsonl", "--references", "train.tsv", "--out", "models/ged.json", "--seeds", "0,1"]);
        ws
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path().join(name)
    }
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn pipeline_end_to_end() {
    let ws = Workspace::new(200);
    let d = ws.path();
    for name in ["models/gec.json", "models/lm.json", "models/ged.json", "ged/train.jsonl", "ged/dev.jsonl"] {
        assert!(ws.file(name).exists(), "{name}");
    }
    let all = lines(&ws.file("ged/all.jsonl")).len();
    let split = lines(&ws.file("ged/train.jsonl")).len() + lines(&ws.file("ged/dev.jsonl")).len();
    assert_eq!(all, split);

    let n = lines(&ws.file("dev.src")).len();
    for critic in ["none", "lm", "ged", "both"] {
        let out = format!("hyp.{critic}");
        ok(d, &["decode", "--gec", "models/gec.json", "--lm", "models/lm.json", "--ged", "models/ged.json",
            "--critic", critic, "--input", "dev.src", "--output", &out]);
        assert_eq!(lines(&ws.file(&out)).len(), n);
        let score = ok(d, &["evaluate", "--sources", "dev.src", "--hyps", &out, "--targets", "dev.tgt"]);
        let rows: Vec<&str> = score.lines().collect();
        assert_eq!(rows[0], "P\tR\tF0.5\tTP\tFP\tFN");
        assert_eq!(rows[1].split('\t').count(), 6);
    }
    // identity hypotheses against identity targets are perfect
    let perfect = ok(d, &["evaluate", "--sources", "dev.tgt", "--hyps", "dev.tgt", "--targets", "dev.tgt"]);
    assert!(perfect.contains("1.0000\t1.0000\t1.0000\t0\t0\t0"));
}

#[test]
fn vanilla_decode_is_deterministic_and_parallel_agnostic() {
    let ws = Workspace::new(120);
    let d = ws.path();
    let args = ["decode", "--gec", "models/gec.json", "--input", "dev.src"];
    let a = ok(d, &args);
    let mut seq = vec!["--sequential"];
    seq.extend(args);
    assert_eq!(a, ok(d, &seq));
    assert_eq!(a, ok(d, &args));
}

#[test]
fn train_ged_reports_every_seed_and_their_mean() {
    let ws = Workspace::new(150);
    let d = ws.path();
    let out = ok(d, &["train-ged", "--data", "ged/all.jsonl", "--references", "train.tsv",
        "--out", "models/ged2.json", "--seeds", "3,5,8", "--metrics", "metrics.tsv"]);
    assert_eq!(out, fs::read_to_string(ws.file("metrics.tsv")).unwrap());
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0], ["seed", "accuracy", "P", "R", "F0.5"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4][0], "mean");
    for col in 1..5 {
        let vals: Vec<f64> = rows[1..4].iter().map(|r| r[col].parse().unwrap()).collect();
        let mean: f64 = rows[4][col].parse().unwrap();
        assert!((vals.iter().sum::<f64>() / 3.0 - mean).abs() < 1e-9);
    }
}

#[test]
fn sweep_writes_grid_rows_in_order() {
    let ws = Workspace::new(120);
    let d = ws.path();
    let args = ["sweep", "--gec", "models/gec.json", "--ged", "models/ged.json", "--dev", "dev.tsv",
        "--alphas", "0.2,0.6", "--betas", "1,0.1", "--beam", "4"];
    let a = ok(d, &args);
    let rows: Vec<&str> = a.lines().collect();
    assert_eq!(rows[0], "alpha\tbeta\tP\tR\tF0.5\tdelta_F_vs_vanilla");
    assert_eq!(rows.len(), 1 + 1 + 4);
    assert!(rows[1].starts_with("-\t-\t"));
    let cells: Vec<(&str, &str)> = rows[2..]
        .iter()
        .map(|r| {
            let mut c = r.split('\t');
            (c.next().unwrap(), c.next().unwrap())
        })
        .collect();
    assert_eq!(cells, [("0.2", "1"), ("0.2", "0.1"), ("0.6", "1"), ("0.6", "0.1")]);
    assert_eq!(a, ok(d, &args));
    fs::write(ws.file("empty.json"), r#"{"sweep": {"alphas": [], "betas": [1.0]}}"#).unwrap();
    let empty = gecdi(d, &["--config", "empty.json", "sweep", "--gec", "models/gec.json", "--ged", "models/ged.json", "--dev", "dev.tsv"]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("sweep grid is empty"));
}

#[test]
fn trace_rows_cover_every_sentence() {
    let ws = Workspace::new(100);
    let d = ws.path();
    ok(d, &["decode", "--gec", "models/gec.json", "--ged", "models/ged.json", "--critic", "ged",
        "--input", "dev.src", "--output", "hyp", "--trace", "trace.tsv"]);
    let trace = lines(&ws.file("trace.tsv"));
    assert!(trace[0].starts_with("sentence\tstep\ttoken\tbase_logp"));
    let hyps = lines(&ws.file("hyp"));
    for (i, h) in hyps.iter().enumerate() {
        let steps = trace[1..].iter().filter(|l| l.split('\t').next() == Some(&i.to_string())).count();
        assert_eq!(steps, h.split_whitespace().count() + 1, "sentence {i}");
    }
}

#[test]
fn remote_language_model_matches_local() {
    let ws = Workspace::new(100);
    let d = ws.path();
    let common = ["decode", "--gec", "models/gec.json", "--critic", "lm", "--input", "dev.src"];
    let mut local = common.to_vec();
    local.extend(["--lm", "models/lm.json"]);
    let serve = format!("{} serve-scorer --model models/lm.json", env!("CARGO_BIN_EXE_gecdi"));
    let mut remote = common.to_vec();
    remote.extend(["--lm-cmd", &serve, "--lm-vocab", "models/lm.vocab", "--exact-dist"]);
    assert_eq!(ok(d, &local), ok(d, &remote));
}

#[test]
fn config_file_values_yield_to_flags() {
    let ws = Workspace::new(100);
    let d = ws.path();
    fs::write(
        ws.file("run.json"),
        r#"{"gec_model": "models/gec.json", "decode": {"beam_width": 2}, "seeds": [0]}"#,
    )
    .unwrap();
    let out = gecdi(d, &["--config", "run.json", "decode", "--input", "dev.src", "--beam", "3"]);
    assert!(out.status.success());
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("--beam overrides the configured value 2 with 3"), "{log}");
    fs::write(ws.file("bad.json"), r#"{"gec_model": "models/gec.json", "seeds": []}"#).unwrap();
    assert_eq!(code(d, &["--config", "bad.json", "decode", "--input", "dev.src"]), 2);
    fs::write(ws.file("typo.json"), r#"{"beam": 3}"#).unwrap();
    assert_eq!(code(d, &["--config", "typo.json", "decode", "--input", "dev.src"]), 2);
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let ws = Workspace::new(80);
    let d = ws.path();
    assert_eq!(code(d, &["decode", "--input", "dev.src"]), 2);
    assert_eq!(code(d, &["decode", "--gec", "models/gec.json", "--input", "missing.txt"]), 3);
    assert_eq!(code(d, &["decode", "--gec", "models/gec.json", "--critic", "lm", "--input", "dev.src"]), 2);
    let refused = ["decode", "--gec", "models/gec.json", "--critic", "lm", "--input", "dev.src",
        "--lm-tcp", "127.0.0.1:1", "--lm-vocab", "models/lm.vocab"];
    assert_eq!(code(d, &refused), 4);
    assert_eq!(code(d, &["serve-scorer", "--model", "models/ged.json"]), 2);
    fs::write(ws.file("short.txt"), "he go home .\n").unwrap();
    assert_eq!(code(d, &["evaluate", "--sources", "dev.src", "--hyps", "short.txt", "--targets", "dev.tgt"]), 3);
}
