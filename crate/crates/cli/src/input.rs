//! Loading tables and building train/validation splits.

use anyhow::{Context, Result};
use oig_core::data::{shuffled_split, synthesize_regression, table, NormalizationSpec, RawTable};
use oig_core::Dataset;

use crate::DataArgs;

pub fn load(args: &DataArgs) -> Result<RawTable> {
    if let Some(kind) = args.synthetic {
        return synthesize_regression(kind, args.patterns, args.data_seed)
            .with_context(|| format!("generating {} data", kind.name()));
    }
    let data = args.data.as_ref().expect("clap requires --data or --synthetic");
    let desc_path = args.desc.clone().unwrap_or_else(|| data.with_extension("desc"));
    let desc = table::load_descriptor(&desc_path)
        .with_context(|| format!("reading descriptor {}", desc_path.display()))?;
    table::load_table(data, &desc).with_context(|| format!("reading table {}", data.display()))
}

/// Human-readable origin of the table, for manifests.
pub fn describe(args: &DataArgs) -> Vec<(&'static str, String)> {
    match (&args.synthetic, &args.data) {
        (Some(kind), _) => vec![
            ("synthetic", kind.name().to_string()),
            ("patterns", args.patterns.to_string()),
            ("data_seed", args.data_seed.to_string()),
        ],
        (None, Some(data)) => {
            let desc = args.desc.clone().unwrap_or_else(|| data.with_extension("desc"));
            vec![
                ("data", data.display().to_string()),
                ("desc", desc.display().to_string()),
            ]
        }
        (None, None) => Vec::new(),
    }
}

pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub n_val: usize,
}

/// Shuffled train/validation split with inputs normalized on the training
/// rows. A zero fraction validates on the training set.
pub fn split(table: &RawTable, args: &DataArgs, val_fraction: f64, seed: u64) -> Result<Split> {
    let (train_rows, val_rows) = shuffled_split(table.n_rows(), val_fraction, seed)?;
    let spec = NormalizationSpec::fit(table, args.norm, Some(&train_rows))?;
    let train = spec.apply(&table.subset(&train_rows))?.to_dataset()?;
    let val = if val_rows.is_empty() {
        train.clone()
    } else {
        spec.apply(&table.subset(&val_rows))?.to_dataset()?
    };
    Ok(Split {
        train,
        val,
        n_val: val_rows.len(),
    })
}
