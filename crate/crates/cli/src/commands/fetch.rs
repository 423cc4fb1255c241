use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use ghic_core::corpus::{resolve_token, GithubClient, GithubClientConfig, RepoSlug};

use crate::args::FetchArgs;
use crate::pipeline::write_run_config;

pub fn run(args: FetchArgs) -> Result<()> {
    let listing = fs::read_to_string(&args.repos)
        .with_context(|| format!("reading repo list {}", args.repos.display()))?;
    let repos: Vec<RepoSlug> = listing
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(RepoSlug::parse)
        .collect::<Result<_, _>>()?;
    if repos.is_empty() {
        bail!("repo list {} names no repositories", args.repos.display());
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_run_config(&args.out, "fetch", &args)?;

    let client = GithubClient::new(GithubClientConfig {
        base_url: args.base_url.trim_end_matches('/').to_string(),
        token: resolve_token(args.token.clone()),
        ..GithubClientConfig::default()
    });
    let results = client.fetch_many(&repos, args.state.into());

    let mut failure = None;
    for (repo, result) in repos.iter().zip(results) {
        match result {
            Ok(issues) => {
                let name = format!("{}__{}.jsonl", repo.owner(), repo.name());
                let path = args.out.join(name);
                let mut file = fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                for issue in &issues {
                    writeln!(file, "{}", serde_json::to_string(issue)?)?;
                }
                crate::status!("{repo}: {} issues -> {}", issues.len(), path.display());
            }
            Err(err) => {
                eprintln!("{repo}: {err}");
                failure.get_or_insert(err);
            }
        }
    }
    if let Some(err) = failure {
        return Err(err.into());
    }
    Ok(())
}
