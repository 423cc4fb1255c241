use anyhow::{bail, Result};
use ghic_core::eval::{confusion, emit_report, EvaluationReport};
use ghic_core::store::load;

use crate::args::EvaluateArgs;
use crate::pipeline::{
    model_display_name, predict_tokens, read_dataset, tokens_for, write_run_config,
};

pub fn run(args: EvaluateArgs) -> Result<()> {
    let bundle = load::<f64>(&args.model)?;
    let examples = read_dataset(&args.data)?;
    if examples.is_empty() {
        bail!("dataset {} contains no examples", args.data.display());
    }

    let mut preds = Vec::with_capacity(examples.len());
    let mut truths = Vec::with_capacity(examples.len());
    for example in &examples {
        let tokens = tokens_for(&bundle, example);
        let (label, _) = predict_tokens(&bundle, &tokens)?;
        preds.push(label);
        truths.push(example.label);
    }
    let cm = confusion(&preds, &truths)?;
    let report = EvaluationReport::new(model_display_name(&bundle), cm, None);
    emit_report(&report, &args.out)?;
    write_run_config(&args.out, "evaluate", &args)?;

    crate::status!(
        "{}: {} examples, accuracy {:.4}, macro-F1 {:.4} -> {}",
        report.model,
        examples.len(),
        report.accuracy,
        report.macro_f1,
        args.out.display()
    );
    Ok(())
}
