use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ddarts_core::document::deserialize;

/// Small enough that an 8-cell search epoch takes well under a second.
const TOY: [&str; 8] = [
    "--set=data_count=16",
    "--set=data_size=4",
    "--set=channels=2",
    "--set=steps=2",
    "--set=epochs=2",
    "--set=batch_size=8",
    "--set=cells=8",
    "--set=mode=ddarts",
];

fn ddarts(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddarts"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = ddarts(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn toy_with(extra: &[&'static str]) -> Vec<&'static str> {
    TOY.iter().chain(extra).copied().collect()
}

#[test]
fn search_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &toy_with(&["search"]));
    let run = dir.path().join("search-s0");
    for f in ["genotype.json", "metrics.csv", "distance.csv", "checkpoint.json", "checkpoint.bin", "config.txt"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let g = deserialize(&fs::read(run.join("genotype.json")).unwrap()).unwrap();
    assert_eq!(g.n_cells(), 8);
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    let config = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(config.contains("cells = 8\n") && config.contains("seed = 0\n"));
}

#[test]
fn same_seed_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &toy_with(&["--name=a", "search"]));
    ok(dir.path(), &toy_with(&["--name=b", "search"]));
    ok(dir.path(), &toy_with(&["--name=c", "--seed=1", "search"]));
    let read = |n: &str| fs::read(dir.path().join(n).join("metrics.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let blob = |n: &str| fs::read(dir.path().join(n).join("checkpoint.bin")).unwrap();
    assert_eq!(blob("a"), blob("b"));
}

#[test]
fn invalid_parse_method_is_a_config_error_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddarts(dir.path(), &toy_with(&["--set=parse_method=greedy", "search"]));
    assert_eq!(code(&o), 2);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    let o = ddarts(dir.path(), &["--set=no_such_key=1", "gendata"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn divergence_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddarts(dir.path(), &toy_with(&["--set=weight_lr=1e300", "--set=weight_lr_min=1e300", "search"]));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let missing = ddarts(dir.path(), &["derive", "nowhere.json", "4"]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn search_derive_distance_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for seed in ["0", "1"] {
        let name = format!("--name=s{seed}");
        let seed = format!("--seed={seed}");
        ok(d, &[TOY.as_slice(), &[name.as_str(), seed.as_str(), "search"]].concat());
    }
    let mut derived = Vec::new();
    for seed in ["0", "1"] {
        let src = d.join(format!("s{seed}/genotype.json"));
        let name = format!("--name=d{seed}");
        let stdout = ok(d, &[name.as_str(), "derive", src.to_str().unwrap(), "14"]);
        assert_eq!(stdout.trim(), "[0,1,0,1,2,4,3,4,3,5,6,7,6,7]");
        derived.push(d.join(format!("d{seed}/genotype.json")));
    }
    let g = deserialize(&fs::read(&derived[0]).unwrap()).unwrap();
    assert_eq!(g.n_cells(), 14);

    let [a, b] = [derived[0].to_str().unwrap(), derived[1].to_str().unwrap()];
    let du: f64 = ok(d, &["distance", a, b]).trim().parse().unwrap();
    assert!(du.is_finite() && du >= 0.0);
    assert_eq!(ok(d, &["distance", a, a]).trim(), "0");

    // Deriving to the source size is the identity.
    let src = d.join("s0/genotype.json");
    ok(d, &["--name=same", "derive", src.to_str().unwrap(), "8"]);
    assert_eq!(fs::read(d.join("same/genotype.json")).unwrap(), fs::read(&src).unwrap());
}

#[test]
fn derive_to_zero_cells_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddarts(dir.path(), &["derive", "resnet18", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn handcrafted_encodings_and_distances() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["encode", "xception"]);
    let x = deserialize(&fs::read(d.join("encode-s0/genotype.json")).unwrap()).unwrap();
    assert_eq!(x.n_cells(), 13);
    assert_eq!(x.share_groups.len(), 5);

    let first: f64 = ok(d, &["distance", "resnet18", "resnet50"]).trim().parse().unwrap();
    let again: f64 = ok(d, &["distance", "resnet18", "resnet50"]).trim().parse().unwrap();
    assert!(first > 0.0);
    assert_eq!(first.to_bits(), again.to_bits());
    assert_eq!(code(&ddarts(d, &["encode", "vgg16"])), 2);
}

#[test]
fn alpha_checkpoint_parses_back_to_the_genotype() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for arch in ["resnet18", "resnet50", "xception"] {
        let enc = format!("--name=enc-{arch}");
        let par = format!("--name=par-{arch}");
        ok(d, &[enc.as_str(), "encode", arch, "--alpha"]);
        let stem = d.join(format!("enc-{arch}/alpha"));
        ok(d, &[par.as_str(), "parse", stem.to_str().unwrap(), "--method", "edge", "--threshold", "0.85"]);
        assert_eq!(
            fs::read(d.join(format!("enc-{arch}/genotype.json"))).unwrap(),
            fs::read(d.join(format!("par-{arch}/genotype.json"))).unwrap()
        );
    }
    let stem = d.join("enc-resnet18/alpha");
    assert_eq!(code(&ddarts(d, &["parse", stem.to_str().unwrap(), "--method", "greedy"])), 2);
}

#[test]
fn distance_matrix_over_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let set = d.join("set");
    fs::create_dir(&set).unwrap();
    for (i, arch) in ["resnet18", "resnet50", "resnet18"].iter().enumerate() {
        let name = format!("--name=e{i}");
        ok(d, &[name.as_str(), "encode", arch]);
        fs::copy(d.join(format!("e{i}/genotype.json")), set.join(format!("g{i}.json"))).unwrap();
    }
    let csv = ok(d, &["distance", set.to_str().unwrap()]);
    let rows: Vec<Vec<String>> = csv.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], ["label", "g0", "g1", "g2"]);
    for i in 1..4 {
        assert_eq!(rows[i].len(), 4);
        assert_eq!(rows[i][i], "0");
        for j in 1..4 {
            assert_eq!(rows[i][j], rows[j][i]);
        }
    }
    assert_eq!(rows[1][3], "0");
    let stats = ok(d, &["stats", set.to_str().unwrap()]);
    assert!(stats.contains("pairs = 3\n"), "{stats}");
}

#[test]
fn gendata_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--name=a", "--set=data_count=12", "gendata"]);
    ok(d, &["--name=b", "--set=data_count=12", "gendata"]);
    let a = fs::read(d.join("a/data.raster")).unwrap();
    assert_eq!(a, fs::read(d.join("b/data.raster")).unwrap());
    assert_eq!(&a[..4], b"DDRS");

    // The generated file feeds a search.
    let raster = format!("--set=raster={}", d.join("a/data.raster").display());
    ok(d, &[TOY.as_slice(), &[raster.as_str(), "--set=epochs=1", "search"]].concat());
}

#[test]
fn command_line_beats_file_beats_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let file = d.join("run.cfg");
    fs::write(&file, "# toy\nseed = 5\nw01 = 8\ndata_count = 12\n").unwrap();
    ok(d, &["--config", file.to_str().unwrap(), "--set=w01=6", "--seed=9", "--name=r", "gendata"]);
    let written = fs::read_to_string(d.join("r/config.txt")).unwrap();
    assert!(written.contains("seed = 9\n"));
    assert!(written.contains("w01 = 6\n"));
    assert!(written.contains("data_count = 12\n"));
    assert!(written.contains("threshold = 0.85\n"));
    assert_eq!(code(&ddarts(d, &["--config", "missing.cfg", "gendata"])), 2);
}

#[test]
fn opscore_writes_one_score_per_operation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["--set=data_count=8", "--set=data_size=4", "--set=opscore_epochs=0", "--set=data_classes=4", "opscore"];
    let csv = ok(d, &args);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 13);
    assert!(lines[1..].iter().all(|l| l.ends_with(",0.25")));
    assert_eq!(fs::read_to_string(d.join("opscore-s0/opscore.csv")).unwrap(), csv);
}
