use std::fmt;
use std::path::Path;

use cfshift::{
    distance_matrix, evaluate, generate, load_checkpoint, load_embeddings, save_checkpoint,
    save_embeddings, EmbeddingFormat, FeatureMatrix, LabeledDataset, Standardizer, SyntheticSpec,
    TrainConfig,
};

use crate::{DistanceArgs, EvalArgs, GenDataArgs, PlotArgs, TrainArgs};

/// Command failure, split by the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unknown names: exit 2.
    Usage(String),
    /// I/O, parse or numerical failure: exit 1.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<cfshift::Error> for Failure {
    fn from(e: cfshift::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type CmdResult = std::result::Result<(), Failure>;

pub fn usage(e: impl fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

pub fn load(path: &Path) -> std::result::Result<LabeledDataset, Failure> {
    load_embeddings(path, EmbeddingFormat::Csv)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn check_domains(ds: &LabeledDataset, names: &[String]) -> CmdResult {
    for name in names {
        if ds.domain(name).is_none() {
            return Err(Failure::Usage(format!(
                "unknown domain {name:?} (available: {})",
                ds.domain_ids().join(", ")
            )));
        }
    }
    Ok(())
}

fn refs(names: &[String]) -> Vec<&str> {
    names.iter().map(String::as_str).collect()
}

/// Every domain standardised with statistics pooled over `source`
/// (all domains when empty).
pub fn standardized_domains(
    ds: &LabeledDataset,
    source: &[String],
) -> std::result::Result<Vec<FeatureMatrix>, Failure> {
    check_domains(ds, source)?;
    let pool: Vec<&FeatureMatrix> = ds
        .domains()
        .iter()
        .filter(|d| source.is_empty() || source.iter().any(|s| s == d.id()))
        .map(|d| &d.features)
        .collect();
    let stats = Standardizer::fit_pooled(&pool)?;
    Ok(ds
        .domains()
        .iter()
        .map(|d| stats.apply(&d.features))
        .collect::<cfshift::Result<_>>()?)
}

pub fn gen_data(args: &GenDataArgs, seed: u64) -> CmdResult {
    let spec = SyntheticSpec::graded(
        args.domains,
        args.classes,
        args.dim,
        args.n,
        args.rotation_step,
        args.shift_step,
        seed,
    );
    let ds = generate(&spec).map_err(usage)?;
    save_embeddings(&ds, &args.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} rows in {} domains to {}",
        ds.len(),
        ds.domains().len(),
        args.out.display()
    );
    Ok(())
}

pub fn distance(args: &DistanceArgs, seed: u64) -> CmdResult {
    let ds = load(&args.data)?;
    let params = args.bank.params(seed, 1.0);
    let bank = params.sample(ds.dim()).map_err(usage)?;
    let features = standardized_domains(&ds, &args.source)?;
    let report = distance_matrix(&features, &bank)?;
    report.write_json(&args.out)?;
    print!("{}", report.to_table());
    Ok(())
}

pub fn train(args: &TrainArgs, seed: u64, default_bank_scale: f64) -> CmdResult {
    let ds = load(&args.data)?;
    check_domains(&ds, &args.source)?;
    check_domains(&ds, &args.target)?;
    let ds = ds
        .with_split(&refs(&args.source), &refs(&args.target))
        .map_err(usage)?;
    let config = TrainConfig {
        lr: args.lr,
        lambda: args.lambda,
        epochs: args.epochs,
        batch_per_domain: args.batch,
        bank: args.bank.params(seed, default_bank_scale),
        seed,
        resample_bank_each_step: args.resample_bank,
        hidden: args.hidden.clone(),
        embed_dim: args.embed_dim,
    };
    config.validate().map_err(usage)?;
    config.bank.sample(config.embed_dim).map_err(usage)?;

    let outcome = cfshift::train(&ds, &config)?;
    for r in &outcome.history {
        println!(
            "epoch {:>4}  erm {:.6}  cfl {:.6}  total {:.6}",
            r.epoch, r.erm, r.cfl, r.total
        );
    }
    save_checkpoint(&outcome.model, &args.out)?;
    let history = args
        .history
        .clone()
        .unwrap_or_else(|| args.out.with_extension("jsonl"));
    outcome.write_history(&history)?;
    print!("{}", outcome.final_report().to_table());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> CmdResult {
    let model = load_checkpoint(&args.checkpoint)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", args.checkpoint.display())))?;
    let ds = load(&args.data)?;
    check_domains(&ds, &args.domains)?;
    let ids: Vec<&str> = if args.domains.is_empty() {
        ds.domain_ids()
    } else {
        refs(&args.domains)
    };
    let scores = evaluate(&model, &ds, &ids)?;
    for (id, acc) in &scores {
        println!("{id}\t{acc:.4}");
    }
    if let Some(out) = &args.out {
        let rows: Vec<_> = scores
            .iter()
            .map(|(id, acc)| serde_json::json!({ "domain": id, "accuracy": acc }))
            .collect();
        let text =
            serde_json::to_string_pretty(&rows).map_err(|e| Failure::Runtime(e.to_string()))?;
        std::fs::write(out, text + "\n")
            .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}

pub fn plot(args: &PlotArgs, seed: u64) -> CmdResult {
    crate::plot::run(args, seed)
}
