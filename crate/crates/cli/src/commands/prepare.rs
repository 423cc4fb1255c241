use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ghic_core::corpus::{
    default_label_histogram, label_histogram, merge_and_clean, select_single_label, Label,
};

use crate::args::PrepareArgs;
use crate::pipeline::{parent_dir, write_run_config};

fn collect_sources(input: &PathBuf) -> Result<Vec<PathBuf>> {
    if input.is_dir() {
        let mut sources: Vec<PathBuf> = fs::read_dir(input)
            .with_context(|| format!("listing {}", input.display()))?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|entry| entry.path())
            .filter(|path| {
                let dump_extension = path.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                    matches!(
                        e.to_ascii_lowercase().as_str(),
                        "jsonl" | "json" | "ndjson" | "csv"
                    )
                });
                // run metadata written next to dumps is not corpus data
                let metadata = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n == "run_config.json" || n == "label_histogram.json");
                dump_extension && !metadata
            })
            .collect();
        sources.sort();
        Ok(sources)
    } else {
        Ok(vec![input.clone()])
    }
}

pub fn run(args: PrepareArgs) -> Result<()> {
    let sources = collect_sources(&args.input)?;
    if sources.is_empty() {
        bail!(
            "no dump files (.jsonl/.csv) found in {}",
            args.input.display()
        );
    }
    let records = merge_and_clean(&sources)?;

    // label counts over the full cleaned corpus drive rarest-first selection
    let global_counts = default_label_histogram(&records);
    let examples: Vec<_> = records
        .iter()
        .filter_map(|record| select_single_label(record, &global_counts))
        .collect();

    let out_dir = parent_dir(&args.out);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut file =
        fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for example in &examples {
        writeln!(file, "{}", serde_json::to_string(example)?)?;
    }

    let hist = label_histogram(&examples);
    let hist_path = out_dir.join("label_histogram.json");
    fs::write(&hist_path, serde_json::to_string_pretty(&hist)?.as_bytes())
        .with_context(|| format!("writing {}", hist_path.display()))?;
    write_run_config(&out_dir, "prepare", &args)?;

    crate::status!(
        "{} records in, {} single-label examples out -> {}",
        records.len(),
        examples.len(),
        args.out.display()
    );
    crate::status!("label frequencies:");
    for label in Label::ALL {
        crate::status!("  {:<16} {}", label.name(), hist.count(label));
    }
    Ok(())
}
