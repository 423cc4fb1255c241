use std::fs;
use std::io::Write;

use anyhow::{Context, Result};
use ghic_core::corpus::{IssueRecord, Label};
use ghic_core::features::FieldSelector;
use ghic_core::store::load;
use ghic_core::textprep::preprocess;

use crate::args::PredictArgs;
use crate::pipeline::{parent_dir, predict_tokens, read_dump, write_run_config};

fn record_text(field: FieldSelector, record: &IssueRecord) -> String {
    let body = record.body.as_deref().unwrap_or("");
    match field {
        FieldSelector::Title => record.title.clone(),
        FieldSelector::Body => body.to_string(),
        FieldSelector::Both => format!("{} {}", record.title, body),
    }
}

pub fn run(args: PredictArgs) -> Result<()> {
    let bundle = load::<f64>(&args.model)?;
    let records = read_dump(&args.input)?;

    let out_dir = parent_dir(&args.out);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut out =
        fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for record in &records {
        let tokens = preprocess(&record_text(bundle.field, record), &bundle.pipeline);
        let (label, scores) = predict_tokens(&bundle, &tokens)?;

        let mut object = match serde_json::to_value(record)? {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("records serialize as objects"),
        };
        object.insert(
            "predicted_label".to_string(),
            serde_json::Value::String(label.name().to_string()),
        );
        // serde_json maps are BTree-ordered, which is the canonical
        // alphabetical label order
        let score_map: serde_json::Map<String, serde_json::Value> = Label::ALL
            .iter()
            .map(|l| (l.name().to_string(), serde_json::json!(scores[l.index()])))
            .collect();
        object.insert("scores".to_string(), serde_json::Value::Object(score_map));
        writeln!(out, "{}", serde_json::Value::Object(object))?;
    }
    write_run_config(&out_dir, "predict", &args)?;

    crate::status!("labeled {} issues -> {}", records.len(), args.out.display());
    Ok(())
}
