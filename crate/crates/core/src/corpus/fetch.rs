//! GitHub REST v3 issue fetching with pagination, retry, and rate-limit
//! reporting. The API base URL is overridable so tests can point the
//! client at a local fixture server.

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;
use ureq::Agent;

use super::{IssueRecord, IssueState};

/// `owner/name` repository slug.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoSlug {
    owner: String,
    name: String,
}

#[derive(Debug, Error)]
#[error("invalid repo slug {0:?}: expected owner/name")]
pub struct InvalidRepoSlug(pub String);

impl RepoSlug {
    pub fn parse(slug: &str) -> Result<Self, InvalidRepoSlug> {
        match slug.split_once('/') {
            Some((owner, name)) if !owner.is_empty() && !name.is_empty() && !name.contains('/') => {
                Ok(RepoSlug {
                    owner: owner.to_string(),
                    name: name.to_string(),
                })
            }
            _ => Err(InvalidRepoSlug(slug.to_string())),
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for RepoSlug {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)
    }
}

/// Issue state filter for fetches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateFilter {
    Open,
    Closed,
    #[default]
    All,
}

impl StateFilter {
    pub fn as_query(self) -> &'static str {
        match self {
            StateFilter::Open => "open",
            StateFilter::Closed => "closed",
            StateFilter::All => "all",
        }
    }
}

pub const GITHUB_API_BASE: &str = "https://api.github.com";

const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone)]
pub struct GithubClientConfig {
    /// API base URL without trailing slash.
    pub base_url: String,
    pub token: Option<String>,
    /// First retry delay; doubles per attempt.
    pub retry_base_delay: Duration,
}

impl Default for GithubClientConfig {
    fn default() -> Self {
        Self {
            base_url: GITHUB_API_BASE.to_string(),
            token: None,
            retry_base_delay: Duration::from_millis(500),
        }
    }
}

/// Returns the explicit token if given, otherwise the `GITHUB_TOKEN`
/// environment variable if set and non-empty.
pub fn resolve_token(flag: Option<String>) -> Option<String> {
    flag.or_else(|| std::env::var("GITHUB_TOKEN").ok().filter(|t| !t.is_empty()))
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("authentication failed for {repo}: HTTP {status}")]
    Auth { repo: String, status: u16 },
    #[error("rate limit exhausted for {repo}; resets at unix time {}",
            reset.map(|r| r.to_string()).unwrap_or_else(|| "unknown".to_string()))]
    RateLimited { repo: String, reset: Option<u64> },
    #[error("repository not found: {repo}")]
    RepoNotFound { repo: String },
    #[error("GitHub API returned HTTP {status} for {url}")]
    Api { status: u16, url: String },
    #[error("network error fetching {url} after {attempts} attempts: {detail}")]
    Network {
        url: String,
        attempts: u32,
        detail: String,
    },
    #[error("malformed API payload from {url}: {detail}")]
    MalformedPayload { url: String, detail: String },
}

#[derive(Debug, Deserialize)]
struct ApiIssue {
    number: u64,
    title: String,
    #[serde(default)]
    body: Option<String>,
    state: IssueState,
    #[serde(default)]
    labels: Vec<ApiLabel>,
    created_at: String,
    /// Present only when the record is actually a pull request.
    #[serde(default)]
    pull_request: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ApiLabel {
    Object { name: String },
    Name(String),
}

impl ApiLabel {
    fn into_name(self) -> String {
        match self {
            ApiLabel::Object { name } => name,
            ApiLabel::Name(name) => name,
        }
    }
}

/// Blocking GitHub client. Cloning shares the connection pool, so one
/// client can serve concurrent per-repo fetches.
#[derive(Clone)]
pub struct GithubClient {
    agent: Agent,
    config: GithubClientConfig,
}

impl GithubClient {
    pub fn new(config: GithubClientConfig) -> Self {
        let agent_config = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        GithubClient {
            agent: Agent::new_with_config(agent_config),
            config,
        }
    }

    /// Fetches every issue of `repo` matching `state`, following `Link`
    /// pagination to exhaustion. Pull requests are excluded. Text fields
    /// are returned raw and uncleaned.
    pub fn fetch_issues(
        &self,
        repo: &RepoSlug,
        state: StateFilter,
    ) -> Result<Vec<IssueRecord>, FetchError> {
        let mut url = format!(
            "{}/repos/{}/{}/issues?state={}&per_page=100&page=1",
            self.config.base_url,
            repo.owner(),
            repo.name(),
            state.as_query()
        );
        let mut issues = Vec::new();
        loop {
            let (page, next) = self.fetch_page(repo, &url)?;
            issues.extend(page);
            match next {
                Some(next_url) => url = next_url,
                None => break,
            }
        }
        Ok(issues)
    }

    /// Fetches several repositories concurrently, one in-flight request
    /// per repo. Results come back in input order.
    pub fn fetch_many(
        &self,
        repos: &[RepoSlug],
        state: StateFilter,
    ) -> Vec<Result<Vec<IssueRecord>, FetchError>> {
        thread::scope(|scope| {
            let handles: Vec<_> = repos
                .iter()
                .map(|repo| scope.spawn(move || self.fetch_issues(repo, state)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fetch thread"))
                .collect()
        })
    }

    fn fetch_page(
        &self,
        repo: &RepoSlug,
        url: &str,
    ) -> Result<(Vec<IssueRecord>, Option<String>), FetchError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.try_page(repo, url) {
                Ok(page) => return Ok(page),
                Err(PageError::Fatal(e)) => return Err(e),
                Err(PageError::Transient(detail)) => {
                    if attempt >= MAX_ATTEMPTS {
                        return Err(FetchError::Network {
                            url: url.to_string(),
                            attempts: attempt,
                            detail,
                        });
                    }
                    let backoff = self.config.retry_base_delay * 2u32.pow(attempt - 1);
                    thread::sleep(backoff);
                }
            }
        }
    }

    fn try_page(
        &self,
        repo: &RepoSlug,
        url: &str,
    ) -> Result<(Vec<IssueRecord>, Option<String>), PageError> {
        let mut request = self
            .agent
            .get(url)
            .header("Accept", "application/vnd.github+json")
            .header("User-Agent", "ghic");
        if let Some(token) = &self.config.token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request
            .call()
            .map_err(|e| PageError::Transient(e.to_string()))?;

        let status = response.status().as_u16();
        let header = |name: &str| {
            response
                .headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        match status {
            200 => {}
            401 => {
                return Err(PageError::Fatal(FetchError::Auth {
                    repo: repo.to_string(),
                    status,
                }))
            }
            403 | 429 => {
                let remaining = header("x-ratelimit-remaining");
                let reset = header("x-ratelimit-reset").and_then(|v| v.parse().ok());
                if remaining.as_deref() == Some("0") || status == 429 {
                    return Err(PageError::Fatal(FetchError::RateLimited {
                        repo: repo.to_string(),
                        reset,
                    }));
                }
                return Err(PageError::Fatal(FetchError::Auth {
                    repo: repo.to_string(),
                    status,
                }));
            }
            404 => {
                return Err(PageError::Fatal(FetchError::RepoNotFound {
                    repo: repo.to_string(),
                }))
            }
            500..=599 => return Err(PageError::Transient(format!("HTTP {status}"))),
            _ => {
                return Err(PageError::Fatal(FetchError::Api {
                    status,
                    url: url.to_string(),
                }))
            }
        }

        let next = header("link").as_deref().and_then(parse_next_link);
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| PageError::Transient(e.to_string()))?;
        let api_issues: Vec<ApiIssue> = serde_json::from_str(&body).map_err(|e| {
            PageError::Fatal(FetchError::MalformedPayload {
                url: url.to_string(),
                detail: e.to_string(),
            })
        })?;
        let records = api_issues
            .into_iter()
            .filter(|issue| issue.pull_request.is_none())
            .map(|issue| IssueRecord {
                repo: repo.to_string(),
                number: issue.number,
                title: issue.title,
                body: issue.body,
                state: issue.state,
                labels: issue.labels.into_iter().map(ApiLabel::into_name).collect(),
                created_at: issue.created_at,
            })
            .collect();
        Ok((records, next))
    }
}

enum PageError {
    Fatal(FetchError),
    Transient(String),
}

/// Extracts the `rel="next"` target from an RFC 8288 `Link` header.
fn parse_next_link(header: &str) -> Option<String> {
    for part in header.split(',') {
        let mut pieces = part.split(';');
        let target = pieces.next()?.trim();
        let is_next = pieces.any(|p| {
            let p = p.trim();
            p == "rel=\"next\"" || p == "rel=next"
        });
        if is_next && target.starts_with('<') && target.ends_with('>') {
            return Some(target[1..target.len() - 1].to_string());
        }
    }
    None
}
