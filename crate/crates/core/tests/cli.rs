use std::path::Path;
use std::process::{Command, Output};

use gaborcnn::cli::run;
use gaborcnn::data::{decode_pnm, encode_pgm};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaborcnn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_test_image(path: &Path) {
    let bytes: Vec<u8> = (0..20 * 16).map(|i| ((i * 37 + i / 7) % 256) as u8).collect();
    std::fs::write(path, encode_pgm(20, 16, &bytes).unwrap()).unwrap();
}

#[test]
fn kernel_prints_eight_blocks() {
    let o = bin(&["kernel", "--preset", "age"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let blocks: Vec<&str> = text.split("\n\n").filter(|b| !b.trim().is_empty()).collect();
    assert_eq!(blocks.len(), 8);
    for b in blocks {
        let lines: Vec<&str> = b.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("5 "));
        assert!(lines[1..].iter().all(|l| l.split_whitespace().count() == 5));
    }
    let o = bin(&["kernel", "--preset", "detect"]);
    assert!(stdout(&o).lines().next().unwrap().starts_with("3 "));
}

#[test]
fn kernel_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.txt");
    assert_eq!(run(["gaborcnn", "kernel", "--preset", "fer", "--out", p(&out)]), 0);
    let parsed = gaborcnn::gabor::parse_kernel_text(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed.len(), 8);
    assert!((parsed[0].0.sigma() - 1.4).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(["gaborcnn", "kernel", "--bogus"]), 2);
    assert_eq!(run(["gaborcnn", "nonsense"]), 2);
    assert_eq!(run(["gaborcnn", "kernel", "--preset", "nope"]), 2);
    assert_eq!(run(["gaborcnn", "--help"]), 0);
    let o = bin(&["kernel", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["respond", "--in", p(&dir.path().join("missing.pgm")), "--outdir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P9 nope").unwrap();
    assert_eq!(run(["gaborcnn", "fuse", "--in", p(&bad), "--out", p(&dir.path().join("f.pgm"))]), 1);
}

#[test]
fn respond_writes_eight_images() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.pgm");
    write_test_image(&img);
    let outdir = dir.path().join("resp");
    let o = bin(&["respond", "--in", p(&img), "--preset", "age", "--outdir", p(&outdir)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(" min ") && l.contains(" max ")).count(), 8);
    let mut names: Vec<String> = std::fs::read_dir(&outdir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    assert!(names.contains(&"response_0_theta0_phi0.pgm".to_string()));
    assert!(names.contains(&"response_7_theta135_phi90.pgm".to_string()));
    let r = decode_pnm(&std::fs::read(outdir.join(&names[0])).unwrap()).unwrap();
    assert_eq!((r.height(), r.width()), (16, 20));
}

#[test]
fn fuse_with_identity_weights_returns_input() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.pgm");
    write_test_image(&img);
    let out = dir.path().join("fused.pgm");
    let code = run(["gaborcnn", "fuse", "--in", p(&img), "--weights", "1,0,0,0,0,0,0,0,0", "--scale", "none", "--out", p(&out)]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&img).unwrap());
    assert_eq!(run(["gaborcnn", "fuse", "--in", p(&img), "--weights", "1,0", "--out", p(&out)]), 1);
    let scaled = dir.path().join("scaled.pgm");
    assert_eq!(run(["gaborcnn", "fuse", "--in", p(&img), "--out", p(&scaled)]), 0);
    let s = decode_pnm(&std::fs::read(&scaled).unwrap()).unwrap();
    let (lo, hi) = s.min_max();
    assert_eq!((lo, hi), (0.0, 1.0));
}

#[test]
fn gradcheck_passes() {
    let o = bin(&["gradcheck", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let err: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max_rel_error "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err <= 1e-3);
    assert!(text.trim_end().ends_with("PASS"));
    assert_eq!(stdout(&bin(&["gradcheck", "--seed", "7"])), text);
}

fn final_line(text: &str) -> String {
    text.lines().find(|l| l.starts_with("final val_")).unwrap().to_string()
}

#[test]
fn eval_reproduces_training_metric() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("orient.ckpt");
    let args = ["train", "--task", "orient", "--input", "gf", "--n", "200", "--epochs", "3", "--seed", "4", "--out", p(&ck)];
    let t = bin(&args);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    let trained = final_line(&stdout(&t));
    assert!(trained.starts_with("final val_accuracy "));
    let e = bin(&["eval", "--checkpoint", p(&ck)]);
    assert!(e.status.success());
    let text = stdout(&e);
    assert_eq!(final_line(&text), trained);
    assert_eq!(text.lines().filter(|l| l.starts_with("fold ")).count(), 5);
    assert!(text.contains("(held out)"));
    assert!(!text.contains("training run reported"));

    let again = dir.path().join("again.ckpt");
    let mut args2 = args;
    args2[12] = p(&again);
    assert_eq!(stdout(&bin(&args2)).replace(p(&again), p(&ck)), stdout(&t));
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&ck).unwrap());
}

#[test]
fn manifest_training_and_synth() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = bin(&["synth", "orient", "--n", "40", "--size", "16", "--seed", "3", "--outdir", p(&data)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(&data).unwrap().count(), 41);
    let ck = dir.path().join("m.ckpt");
    let t = bin(&[
        "train", "--task", "orient", "--input", "image", "--manifest", p(&data.join("manifest.jsonl")), "--epochs", "1",
        "--folds", "2", "--out", p(&ck),
    ]);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    assert!(stdout(&t).contains("final val_accuracy"));
    let e = bin(&["eval", "--checkpoint", p(&ck)]);
    assert!(e.status.success());
}

#[test]
fn detect_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    std::fs::create_dir_all(&models).unwrap();
    for (task, file) in [("pnet", "pnet.ckpt"), ("rnet", "rnet.ckpt"), ("onet", "onet.ckpt")] {
        let o = bin(&["train", "--task", task, "--scenes", "30", "--epochs", "2", "--out", p(&models.join(file))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let scenes = dir.path().join("scenes");
    assert!(bin(&["synth", "scenes", "--n", "2", "--seed", "9", "--outdir", p(&scenes)]).status.success());
    let img = scenes.join("scene_0000.pgm");
    let o = bin(&["detect", "--in", p(&img), "--models", p(&models), "--t1", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut last = f64::INFINITY;
    for line in text.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(toks.len(), 5);
        assert!(toks.iter().all(|t| t.split('.').nth(1).map(str::len) == Some(6)));
        let score: f64 = toks[4].parse().unwrap();
        assert!(score <= last);
        last = score;
    }
    assert_eq!(stdout(&bin(&["detect", "--in", p(&img), "--models", p(&models), "--t1", "0.5"])), text);

    let dets = dir.path().join("dets.txt");
    std::fs::write(&dets, &text).unwrap();
    let s = bin(&["score", "--detections", p(&dets), "--truth", p(&scenes.join("scene_0000.txt"))]);
    assert!(s.status.success());
    let st = stdout(&s);
    assert!(st.starts_with("faces 1\n"));
    assert!(st.contains(&format!("detections {}\n", text.lines().count())));
    assert!(st.contains("discrete "));

    let missing = bin(&["detect", "--in", p(&img), "--models", p(&dir.path().join("none"))]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn score_on_hand_made_files() {
    let dir = tempfile::tempdir().unwrap();
    let dets = dir.path().join("d.txt");
    let truth = dir.path().join("t.txt");
    std::fs::write(&dets, "0 0 10 10 0.9\n40 40 5 5 0.3\n").unwrap();
    std::fs::write(&truth, "0 0 10 10\n").unwrap();
    let o = bin(&["score", "--detections", p(&dets), "--truth", p(&truth)]);
    assert_eq!(
        stdout(&o),
        "faces 1\ndetections 2\ntrue_positives 1\nfalse_positives 1\ndiscrete 1.000000\ncontinuous 1.000000\n"
    );
    std::fs::write(&truth, "0 0 10\n").unwrap();
    assert_eq!(bin(&["score", "--detections", p(&dets), "--truth", p(&truth)]).status.code(), Some(1));
}
