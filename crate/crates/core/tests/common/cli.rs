//! Drives the `flowsteer` binary through every subcommand.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

pub fn flowsteer(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowsteer"))
        .env_remove("FLOWSTEER_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn must(out: &Path, args: &[&str]) {
    let o = flowsteer(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

/// Every file a full gen-data/train/eval/ablate pipeline writes under `root`,
/// keyed by relative path; `timing.json` files are left out.
pub fn pipeline_artifacts(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let (data, model, eval, rsf, ablate) =
        (root.join("data"), root.join("model"), root.join("eval"), root.join("rsf"), root.join("ablate"));
    must(&data, &["gen-data", "--seed", "5", "--count", "80"]);
    let train = data.join("train.jsonl");
    let test = data.join("test.jsonl");
    must(&model, &["train", "--dataset", train.to_str().unwrap(), "--seed", "2", "--epochs", "2"]);
    let m = model.join("model.json");
    let common = ["--dataset", test.to_str().unwrap(), "--model", m.to_str().unwrap(), "--steps", "6", "--limit", "4"];
    let mut args = vec!["eval", "--mode", "rpf-rs", "--samples", "8", "--particles", "3", "--seed", "9"];
    args.extend(common);
    must(&eval, &args);
    let mut args = vec!["eval", "--mode", "rsf", "--samples", "10", "--budgets", "7,3", "--dump-predictions"];
    args.extend(common);
    must(&rsf, &args);
    let mut args = vec!["ablate", "--suite", "particles", "--mode", "greedy", "--samples", "4"];
    args.extend(common);
    must(&ablate, &args);

    let mut files = BTreeMap::new();
    collect(root, root, &mut files);
    files
}

fn collect(root: &Path, dir: &Path, files: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect(root, &p, files);
        } else if p.file_name().unwrap() != "timing.json" {
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            files.insert(rel, std::fs::read(&p).unwrap());
        }
    }
}

/// Removes everything inside `dir`, keeping the directory itself.
pub fn wipe(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            std::fs::remove_dir_all(p).unwrap();
        } else {
            std::fs::remove_file(p).unwrap();
        }
    }
}
