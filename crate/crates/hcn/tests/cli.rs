use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcn")).args(args).output().expect("run hcn")
}

fn ok(args: &[&str]) -> Output {
    let out = hcn(args);
    assert!(out.status.success(), "hcn {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// The resolved configuration of a preset, as `generate` writes it.
fn preset_config(dir: &Path, name: &str) -> Value {
    let out = dir.join(format!("{name}-cfg"));
    ok(&["generate", "--preset", name, "--out", p(&out)]);
    json(&out.join("config.json"))
}

fn write_config(path: &Path, cfg: &Value) {
    fs::write(path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn generation_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["generate", "--preset", "noisy-letters", "--seed", "11", "--out", p(&a)]);
    ok(&["generate", "--preset", "noisy-letters", "--seed", "11", "--out", p(&b)]);
    let (fa, fb) = (tree_bytes(&a), tree_bytes(&b));
    assert!(fa.len() > 2);
    assert_eq!(fa, fb);
    let c = tmp.path().join("c");
    ok(&["generate", "--preset", "noisy-letters", "--seed", "12", "--out", p(&c)]);
    assert_ne!(tree_bytes(&c), fa);
}

#[test]
fn invalid_configurations_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset_config(tmp.path(), "two-bars");
    cfg["arch"]["layers"][0]["pool"] = serde_json::json!([2, 3]);
    let path = tmp.path().join("even.json");
    write_config(&path, &cfg);
    let out = hcn(&["train", "--config", p(&path), "--out", p(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = hcn(&["train", "--preset", "no-such-preset", "--out", p(&tmp.path().join("y"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = hcn(&["train", "--preset", "two-bars", "--damping", "0", "--out", p(&tmp.path().join("z"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_epochs_gives_empty_features() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    ok(&["train", "--preset", "two-bars", "--epochs", "0", "--out", p(&out)]);
    let w = fs::read(out.join("layer0.hcnw")).unwrap();
    // magic, four dimensions, then the packed bits
    assert_eq!(&w[..5], b"HCNW1");
    assert!(w[21..].iter().all(|&b| b == 0));
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["epochs_run"], 0);
}

#[test]
fn online_with_one_minibatch_matches_one_batch_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset_config(tmp.path(), "planted");
    let n = json(&tmp.path().join("planted-cfg/metrics.json"))["train_images"].as_u64().unwrap();
    cfg["train"]["minibatch"] = n.into();
    cfg["train"]["restarts"] = 1.into();
    cfg["hyper"]["epochs"] = 1.into();
    cfg["hyper"]["lambda"] = 1.0.into();
    cfg["hyper"]["alpha"] = 1.0.into();
    let path = tmp.path().join("cfg.json");
    write_config(&path, &cfg);
    let (batch, online) = (tmp.path().join("batch"), tmp.path().join("online"));
    ok(&["train", "--config", p(&path), "--out", p(&batch)]);
    ok(&["train", "--config", p(&path), "--online", "--out", p(&online)]);
    assert_eq!(fs::read(batch.join("layer0.hcnw")).unwrap(), fs::read(online.join("layer0.hcnw")).unwrap());
}

#[test]
fn train_then_evaluate_on_saved_data() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    ok(&["generate", "--preset", "planted", "--seed", "5", "--out", p(&data)]);
    let out = ok(&["train", "--preset", "planted", "--data", p(&data), "--out", p(&model)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("compression"));
    assert!(model.join("features/layer0.pbm").exists());

    let eval = tmp.path().join("eval");
    ok(&["eval", "--model", p(&model), "--out", p(&eval)]);
    let trained = json(&model.join("metrics.json"))["compression"].as_f64().unwrap();
    let again = json(&eval.join("metrics.json"))["compression"].as_f64().unwrap();
    assert!(again <= 1.0 && (again - trained).abs() < 0.1, "{trained} vs {again}");
}

#[test]
fn classify_writes_one_score_per_image() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset_config(tmp.path(), "shapes-supervised");
    cfg["data"]["train"] = 8.into();
    cfg["data"]["test"] = 6.into();
    cfg["eval"]["test_images"] = 6.into();
    let path = tmp.path().join("cfg.json");
    write_config(&path, &cfg);
    let model = tmp.path().join("model");
    ok(&["train", "--config", p(&path), "--epochs", "2", "--out", p(&model)]);
    let out = tmp.path().join("scores");
    ok(&["classify", "--model", p(&model), "--out", p(&out)]);
    let scores = json(&out.join("scores.json"));
    assert_eq!(scores.as_array().unwrap().len(), 6);
    assert_eq!(scores[0]["classes"].as_array().unwrap().len(), 2);
    let err = json(&out.join("metrics.json"))["error"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&err));
}

#[test]
fn inpainting_an_empty_block_changes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset_config(tmp.path(), "planted");
    cfg["eval"]["mask_block"] = 0.into();
    cfg["hyper"]["epochs"] = 3.into();
    let path = tmp.path().join("cfg.json");
    write_config(&path, &cfg);
    let model = tmp.path().join("model");
    ok(&["train", "--config", p(&path), "--out", p(&model)]);
    let out = tmp.path().join("inpaint");
    ok(&["inpaint", "--model", p(&model), "--out", p(&out)]);
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["observed_unchanged"].as_f64(), Some(1.0));
    assert!(out.join("completed/00000.pbm").exists());
    assert!(out.join("completed/00000-mask.pbm").exists());
}
