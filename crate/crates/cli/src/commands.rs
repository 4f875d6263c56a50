use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ddarts_core::document::{deserialize, serialize};
use ddarts_core::metric::{matrix_csv, pairwise_stats};
use ddarts_core::{
    derive_genotype, derive_indices, encode_handcrafted, genotype_to_alpha, metric_m, pairwise_matrix, parse_alpha,
    Genotype, Handcrafted, HammingWeights, OpKind, OpScoreTable, ParseMethod, SearchSpace,
};
use ddarts_search::checkpoint::{self, alpha_tensors, load_alpha, state_tensors};
use ddarts_search::engine::metrics_csv;
use ddarts_search::opscore::{default_proxy, op_scores, scores_csv, OpScoreConfig};
use ddarts_search::train::TrainConfig;
use ddarts_search::{search, Dataset};

use crate::config::{ConfigError, RunConfig};
use crate::{Command, Global};

fn resolve(global: &Global) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &global.config {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for pair in &global.overrides {
        cfg.apply_override(pair)?;
    }
    if let Some(seed) = global.seed {
        cfg.search.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.out = out.clone();
    }
    if let Some(name) = &global.name {
        cfg.name = Some(name.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Search => "search",
        Command::Derive { .. } => "derive",
        Command::Distance { .. } => "distance",
        Command::Encode { .. } => "encode",
        Command::Parse { .. } => "parse",
        Command::Gendata => "gendata",
        Command::Opscore => "opscore",
        Command::Stats { .. } => "stats",
    }
}

/// Output directory of one invocation, holding the resolved configuration.
struct Run {
    dir: PathBuf,
}

impl Run {
    fn create(cfg: &RunConfig, command: &str) -> Result<Run> {
        let name = cfg.name.clone().unwrap_or_else(|| format!("{command}-s{}", cfg.search.seed));
        let dir = cfg.out.join(name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let run = Run { dir };
        run.write("config.txt", cfg.to_text())?;
        Ok(run)
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn write(&self, file: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(file);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }
}

/// A handcrafted network name or a genotype document path.
fn load_genotype(spec: &str) -> Result<Genotype> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Ok(h) = spec.parse::<Handcrafted>() {
            return Ok(encode_handcrafted(h));
        }
    }
    let bytes = fs::read(path).with_context(|| format!("reading genotype {spec}"))?;
    deserialize(&bytes).with_context(|| format!("parsing genotype {spec}"))
}

/// Documents given directly or found (as `*.json`, sorted) in directories.
fn collect_genotypes(inputs: &[String]) -> Result<(Vec<String>, Vec<Genotype>)> {
    let mut labels = Vec::new();
    let mut genotypes = Vec::new();
    for input in inputs {
        let path = Path::new(input);
        if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            files.retain(|p| p.extension().is_some_and(|e| e == "json"));
            files.sort();
            for f in files {
                labels.push(f.file_stem().unwrap_or_default().to_string_lossy().into_owned());
                genotypes.push(load_genotype(&f.to_string_lossy())?);
            }
        } else {
            labels.push(input.clone());
            genotypes.push(load_genotype(input)?);
        }
    }
    Ok((labels, genotypes))
}

fn load_scores(path: &Path) -> Result<OpScoreTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading scores {}", path.display()))?;
    let mut entries = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let (op, score) = line.split_once(',').with_context(|| format!("bad score line {line:?}"))?;
        let op: OpKind = op.trim().parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        entries.push((op, score.trim().parse::<f64>().with_context(|| format!("bad score {score:?}"))?));
    }
    OpScoreTable::from_scores(entries).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn weights(genotypes: &[Genotype], scores: Option<&PathBuf>) -> Result<HammingWeights> {
    let table = match scores {
        Some(p) => load_scores(p)?,
        None => OpScoreTable::published(),
    };
    let space = if genotypes.iter().any(|g| g.search_space == SearchSpace::Extended) {
        SearchSpace::Extended
    } else {
        SearchSpace::Darts
    };
    Ok(HammingWeights::for_space(space, &table))
}

fn dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.raster {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading raster {}", p.display()))?;
            Ok(Dataset::from_raster(&bytes).with_context(|| format!("parsing raster {}", p.display()))?)
        }
        None => Ok(Dataset::synthetic(&cfg.data)),
    }
}

pub fn run(global: &Global, command: &Command) -> Result<()> {
    let cfg = resolve(global)?;
    let name = command_name(command);
    match command {
        Command::Search => {
            let start = cfg.start.as_deref().map(load_genotype).transpose()?;
            let data = dataset(&cfg)?;
            let out = search(start.as_ref(), &data, &cfg.search)?;
            let run = Run::create(&cfg, name)?;
            run.write("genotype.json", serialize(&out.genotype))?;
            run.write("metrics.csv", metrics_csv(&out.metrics))?;
            run.write("distance.csv", out.trace.to_csv())?;
            checkpoint::save(&run.path("checkpoint"), &out.genotype, &state_tensors(&out.state))?;
            eprintln!("wrote {}.{{json,bin}}", run.path("checkpoint").display());
            if let Some(last) = out.metrics.last() {
                println!("epochs {} val_top1 {} val_loss {}", out.metrics.len(), last.val_top1, last.val_loss);
            }
            if let Some(e) = out.stopped_at {
                println!("plateau stop at epoch {e}");
            }
        }
        Command::Derive { genotype, n } => {
            let source = load_genotype(genotype)?;
            let indices = derive_indices(source.n_cells(), *n)?;
            let derived = derive_genotype(&source, *n)?;
            let list: Vec<String> = indices.iter().map(usize::to_string).collect();
            println!("[{}]", list.join(","));
            Run::create(&cfg, name)?.write("genotype.json", serialize(&derived))?;
        }
        Command::Distance { first, second, scores } => match second {
            Some(second) => {
                let a = load_genotype(first)?;
                let b = load_genotype(second)?;
                let w = weights(&[a.clone(), b.clone()], scores.as_ref())?;
                println!("{}", metric_m(&a, &b, &w)?);
            }
            None => {
                if !Path::new(first).is_dir() {
                    return Err(ConfigError("distance needs two genotypes or one directory".into()).into());
                }
                let (labels, genotypes) = collect_genotypes(std::slice::from_ref(first))?;
                let w = weights(&genotypes, scores.as_ref())?;
                let csv = matrix_csv(&labels, &pairwise_matrix(&genotypes, &w)?);
                print!("{csv}");
                Run::create(&cfg, name)?.write("distance_matrix.csv", csv)?;
            }
        },
        Command::Encode { arch, alpha } => {
            let h: Handcrafted = arch.parse().map_err(ConfigError)?;
            let g = encode_handcrafted(h);
            let run = Run::create(&cfg, name)?;
            run.write("genotype.json", serialize(&g))?;
            if *alpha {
                let a = genotype_to_alpha(&g, cfg.search.warm_logit, -cfg.search.warm_logit)?;
                checkpoint::save(&run.path("alpha"), &g, &alpha_tensors(&a))?;
                eprintln!("wrote {}.{{json,bin}}", run.path("alpha").display());
            }
        }
        Command::Parse { checkpoint: stem, method, threshold } => {
            let method = match method {
                Some(m) => m.parse::<ParseMethod>().map_err(ConfigError)?,
                None => cfg.search.parse_method,
            };
            let threshold = threshold.unwrap_or(cfg.search.threshold);
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(ConfigError(format!("threshold {threshold} must lie in (0, 1)")).into());
            }
            let (layout, tensors) = checkpoint::load(stem).with_context(|| format!("loading {}", stem.display()))?;
            let alpha = load_alpha(&layout, &tensors)?;
            let g = parse_alpha(&alpha, method, threshold)?;
            Run::create(&cfg, name)?.write("genotype.json", serialize(&g))?;
        }
        Command::Gendata => {
            let data = Dataset::synthetic(&cfg.data);
            Run::create(&cfg, name)?.write("data.raster", data.to_raster())?;
        }
        Command::Opscore => {
            let data = dataset(&cfg)?;
            let ocfg = OpScoreConfig {
                runs: cfg.opscore_runs,
                train: TrainConfig {
                    epochs: cfg.opscore_epochs,
                    batch_size: cfg.search.batch_size,
                    channels: cfg.search.channels,
                    lr: cfg.opscore_lr,
                    seed: cfg.search.seed,
                    ..TrainConfig::default()
                },
            };
            let csv = scores_csv(&op_scores(&default_proxy(), &data, &ocfg)?);
            print!("{csv}");
            Run::create(&cfg, name)?.write("opscore.csv", csv)?;
        }
        Command::Stats { inputs, scores } => {
            let (labels, genotypes) = collect_genotypes(inputs)?;
            if genotypes.len() < 2 {
                bail!(ConfigError("stats needs at least two genotypes".into()));
            }
            let w = weights(&genotypes, scores.as_ref())?;
            let matrix = pairwise_matrix(&genotypes, &w)?;
            let s = pairwise_stats(&matrix).expect("two or more genotypes");
            let text = format!(
                "genotypes = {}\npairs = {}\nmean = {}\nstd_dev = {}\nmin = {}\nmax = {}\nclosest = {},{}\nfarthest = {},{}\n",
                genotypes.len(),
                s.pairs,
                s.mean,
                s.std_dev,
                s.min,
                s.max,
                labels[s.closest.0],
                labels[s.closest.1],
                labels[s.farthest.0],
                labels[s.farthest.1],
            );
            print!("{text}");
            let run = Run::create(&cfg, name)?;
            run.write("stats.txt", text)?;
            run.write("distance_matrix.csv", matrix_csv(&labels, &matrix))?;
        }
    }
    Ok(())
}
