use anyhow::{bail, Context, Result};
use ghic_core::classic::{nb_train, rf_train, RandomForestParams};
use ghic_core::corpus::{Label, LabeledExample};
use ghic_core::eval::{confusion, emit_report, stratified_split, EvaluationReport};
use ghic_core::features::{build_vocabulary, encode_sequence, tfidf_fit, FieldSelector, VocabMode};
use ghic_core::recurrent::{
    compute_class_weights, train as train_recurrent, CellKind, Dims, LossCurve, TrainingConfig,
};
use ghic_core::store::{save, ClassicMeta, ModelPayload};
use ghic_core::textprep::{preprocess, PipelineConfig, TokenList};
use ghic_core::{label_histogram, ModelBundle, RecurrentModel};

use crate::args::{ModelArg, TrainArgs};
use crate::pipeline::{
    model_display_name, parent_dir, predict_tokens, read_dataset, write_run_config,
};

pub fn run(args: TrainArgs) -> Result<()> {
    let examples = read_dataset(&args.data)?;
    if examples.is_empty() {
        bail!("dataset {} contains no examples", args.data.display());
    }

    let field: FieldSelector = args
        .field
        .map(Into::into)
        .unwrap_or(if args.model.is_recurrent() {
            FieldSelector::Both
        } else {
            FieldSelector::Title
        });
    let split = args
        .split
        .unwrap_or(if args.model.is_recurrent() { 0.7 } else { 0.8 });

    let pipeline = PipelineConfig::default();
    let tokens: Vec<TokenList> = examples
        .iter()
        .map(|e| preprocess(&field.text_of(e), &pipeline))
        .collect();
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let (train_idx, test_idx) = stratified_split(&labels, split, args.seed)?;

    let train_tokens: Vec<TokenList> = train_idx.iter().map(|&i| tokens[i].clone()).collect();
    let (payload, curve) = build_payload(&args, &examples, &train_idx, &train_tokens, split)?;
    let bundle = ModelBundle {
        pipeline,
        field,
        payload,
    };

    // held-out metrics go through the same path a loaded model uses
    let mut preds = Vec::with_capacity(test_idx.len());
    let mut truths = Vec::with_capacity(test_idx.len());
    for &i in &test_idx {
        let (label, _) = predict_tokens(&bundle, &tokens[i])?;
        preds.push(label);
        truths.push(labels[i]);
    }
    let cm = confusion(&preds, &truths)?;
    let report = EvaluationReport::new(model_display_name(&bundle), cm, curve);

    let out_dir = parent_dir(&args.out);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    save(&bundle, &args.out)?;
    emit_report(&report, &out_dir)?;
    let resolved = serde_json::json!({
        "data": args.data,
        "model": args.model,
        "out": args.out,
        "field": field,
        "split": split,
        "seed": args.seed,
        "class_weights": args.class_weights,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "lr_step": args.lr_step,
        "gamma": args.gamma,
        "hidden": args.hidden,
        "embed": args.embed,
        "vocab": args.vocab,
        "max_len": args.max_len,
        "alpha": args.alpha,
        "trees": args.trees,
    });
    write_run_config(&out_dir, "train", &resolved)?;

    crate::status!(
        "{}: {} train / {} test, accuracy {:.4}, macro-F1 {:.4} -> {}",
        report.model,
        train_idx.len(),
        test_idx.len(),
        report.accuracy,
        report.macro_f1,
        args.out.display()
    );
    Ok(())
}

fn build_payload(
    args: &TrainArgs,
    examples: &[LabeledExample],
    train_idx: &[usize],
    train_tokens: &[TokenList],
    split: f64,
) -> Result<(ModelPayload<f64>, Option<LossCurve>)> {
    let meta = ClassicMeta {
        seed: args.seed,
        split_ratio: split,
    };
    match args.model {
        ModelArg::Nb => {
            let tfidf = tfidf_fit(train_tokens, args.vocab)?;
            let pairs: Vec<_> = train_tokens
                .iter()
                .zip(train_idx)
                .map(|(t, &i)| {
                    (
                        ghic_core::features::tfidf_transform(&tfidf, t),
                        examples[i].label,
                    )
                })
                .collect();
            let model = nb_train(&pairs, tfidf.num_features(), args.alpha)?;
            Ok((ModelPayload::NaiveBayes { tfidf, model, meta }, None))
        }
        ModelArg::Rf => {
            let tfidf = tfidf_fit(train_tokens, args.vocab)?;
            let pairs: Vec<_> = train_tokens
                .iter()
                .zip(train_idx)
                .map(|(t, &i)| {
                    (
                        ghic_core::features::tfidf_transform(&tfidf, t),
                        examples[i].label,
                    )
                })
                .collect();
            let model = rf_train(
                &pairs,
                tfidf.num_features(),
                RandomForestParams {
                    n_trees: args.trees,
                    seed: args.seed,
                    ..RandomForestParams::default()
                },
            )?;
            Ok((ModelPayload::RandomForest { tfidf, model, meta }, None))
        }
        ModelArg::Rnn | ModelArg::Lstm | ModelArg::Gru => {
            let kind: CellKind = args.model.cell_kind().expect("recurrent kind");
            let max_vocab = args.vocab.unwrap_or(10_000);
            let vocab = build_vocabulary(train_tokens, max_vocab, VocabMode::Sequence)?;

            let class_weights = if args.class_weights {
                let train_examples: Vec<LabeledExample> =
                    train_idx.iter().map(|&i| examples[i].clone()).collect();
                let hist = label_histogram(&train_examples);
                Some(compute_class_weights(&hist)?.to_vec())
            } else {
                None
            };
            let config = TrainingConfig {
                epochs: args.epochs,
                batch_size: args.batch_size,
                learning_rate: args.lr,
                lr_step: args.lr_step,
                lr_gamma: args.gamma,
                class_weights,
                max_vocab,
                split_ratio: split,
                seed: args.seed,
                max_len: args.max_len,
            };
            let data: Vec<_> = train_tokens
                .iter()
                .zip(train_idx)
                .map(|(t, &i)| {
                    (
                        encode_sequence(&vocab, t, config.max_len),
                        examples[i].label.index(),
                    )
                })
                .collect();
            let dims = Dims {
                vocab: vocab.len(),
                embed: args.embed,
                hidden: args.hidden,
                classes: ghic_core::NUM_LABELS,
            };
            let model = RecurrentModel::new(kind, dims, args.seed);
            let (model, curve) = train_recurrent(model, &data, &config)?;
            Ok((
                ModelPayload::Recurrent {
                    vocab,
                    model,
                    config,
                },
                Some(curve),
            ))
        }
    }
}
