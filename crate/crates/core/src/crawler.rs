//! Polite, robots-compliant harvesting of review pages into raw review
//! records.
//!
//! The page fetcher is injected, so the whole module runs offline against
//! fixture pages; [`HttpFetcher`] provides the production implementation
//! behind the same contract. The robots.txt subset covers User-agent
//! groups, Allow/Disallow with longest-prefix-wins, and Crawl-delay
//! (which raises the configured delay, never lowers it).

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error)]
pub enum CrawlerError {
    #[error("invalid crawl config: {0}")]
    BadConfig(String),
    #[error("invalid selector {selector:?}")]
    BadSelector { selector: String },
    #[error("path {path:?} does not start with '/'")]
    MalformedPath { path: String },
    #[error("all {attempted} fetch attempts failed")]
    AllFetchesFailed { attempted: usize },
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Error returned by a [`PageFetcher`].
#[derive(Debug, Error)]
#[error("{0}")]
pub struct FetchError(pub String);

/// Supplies page bodies for URLs: production HTTP or a test fixture map.
pub trait PageFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrawlConfig {
    pub seed_urls: Vec<String>,
    /// Selector for review containers.
    pub review_selector: String,
    /// Selector for bullet items within a container.
    pub item_selector: String,
    /// Per-request delay for requests to the same host, in milliseconds.
    pub delay_ms: u64,
    pub user_agent: String,
    pub max_pages: usize,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        Self {
            seed_urls: Vec::new(),
            review_selector: "ul.review".to_string(),
            item_selector: "li".to_string(),
            delay_ms: 1000,
            user_agent: "revaccess-crawler".to_string(),
            max_pages: 10,
        }
    }
}

impl CrawlConfig {
    pub fn validate(&self) -> Result<(), CrawlerError> {
        if self.max_pages == 0 {
            return Err(CrawlerError::BadConfig("max_pages must be >= 1".into()));
        }
        if self.review_selector.trim().is_empty() || self.item_selector.trim().is_empty() {
            return Err(CrawlerError::BadConfig("selectors must be non-empty".into()));
        }
        Ok(())
    }
}

/// One harvested review bullet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReviewRecord {
    pub url: String,
    pub app_name: String,
    pub text: String,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RobotsDirective {
    allow: bool,
    prefix: String,
}

/// Allow/disallow rules selected for one user agent (the most specific
/// matching group of the robots file).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RobotsRules {
    directives: Vec<RobotsDirective>,
    crawl_delay_ms: Option<u64>,
}

impl RobotsRules {
    /// Allow-everything rules (missing or empty robots file).
    pub fn allow_all() -> Self {
        Self::default()
    }

    pub fn crawl_delay_ms(&self) -> Option<u64> {
        self.crawl_delay_ms
    }

    pub fn is_empty(&self) -> bool {
        self.directives.is_empty()
    }
}

/// Parses a robots.txt body and selects the rules of the most specific
/// group matching `user_agent` (exact or substring beats `*`; longer
/// patterns beat shorter ones). Malformed lines are skipped; empty input
/// yields allow-all rules.
pub fn parse_robots(robots_text: &str, user_agent: &str) -> RobotsRules {
    struct Group {
        agents: Vec<String>,
        rules: RobotsRules,
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut collecting_agents = false;

    for raw_line in robots_text.lines() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "user-agent" => {
                if !collecting_agents || groups.is_empty() {
                    groups.push(Group {
                        agents: Vec::new(),
                        rules: RobotsRules::default(),
                    });
                    collecting_agents = true;
                }
                groups
                    .last_mut()
                    .unwrap()
                    .agents
                    .push(value.to_ascii_lowercase());
            }
            "allow" | "disallow" => {
                collecting_agents = false;
                let Some(group) = groups.last_mut() else {
                    continue; // directive before any user-agent line
                };
                // An empty path means "no restriction"; prefixes must
                // start with '/'.
                if value.starts_with('/') {
                    group.rules.directives.push(RobotsDirective {
                        allow: key == "allow",
                        prefix: value.to_string(),
                    });
                }
            }
            "crawl-delay" => {
                collecting_agents = false;
                if let Some(group) = groups.last_mut() {
                    if let Ok(seconds) = value.parse::<f64>() {
                        if seconds >= 0.0 {
                            group.rules.crawl_delay_ms = Some((seconds * 1000.0) as u64);
                        }
                    }
                }
            }
            _ => {
                collecting_agents = false;
            }
        }
    }

    // Most specific match: longest non-wildcard agent pattern contained in
    // the queried agent; "*" matches anything with the lowest precedence.
    let agent_lower = user_agent.to_ascii_lowercase();
    let mut best: Option<(usize, &Group)> = None;
    for group in &groups {
        for pattern in &group.agents {
            let specificity = if pattern == "*" {
                Some(0)
            } else if agent_lower.contains(pattern.as_str()) {
                Some(pattern.len())
            } else {
                None
            };
            if let Some(s) = specificity {
                let better = match best {
                    Some((bs, _)) => s > bs,
                    None => true,
                };
                if better {
                    best = Some((s, group));
                }
            }
        }
    }
    best.map(|(_, g)| g.rules.clone()).unwrap_or_default()
}

/// Whether `path` may be fetched under `rules`: the longest matching
/// prefix decides (allow wins length ties); no match means allowed.
pub fn is_allowed(rules: &RobotsRules, path: &str) -> Result<bool, CrawlerError> {
    if !path.starts_with('/') {
        return Err(CrawlerError::MalformedPath {
            path: path.to_string(),
        });
    }
    let mut verdict = true;
    let mut best_len = 0usize;
    for directive in &rules.directives {
        if path.starts_with(&directive.prefix) {
            let len = directive.prefix.len();
            if len > best_len || (len == best_len && directive.allow) {
                best_len = len;
                verdict = directive.allow;
            }
        }
    }
    Ok(verdict)
}

/// Extraction result for a single page.
#[derive(Debug, Clone)]
pub struct ExtractOutcome {
    pub records: Vec<RawReviewRecord>,
    /// Number of review containers matched (0 is not an error, just a
    /// diagnostic).
    pub containers_matched: usize,
}

/// Pulls one record per bullet item under each matched review container.
/// Item text is whitespace-collapsed and trimmed; empty items are
/// dropped. The page `<title>` supplies the app name when present.
pub fn extract_reviews(
    html: &str,
    url: &str,
    config: &CrawlConfig,
    fetched_at: DateTime<Utc>,
) -> Result<ExtractOutcome, CrawlerError> {
    let container_sel =
        Selector::parse(&config.review_selector).map_err(|_| CrawlerError::BadSelector {
            selector: config.review_selector.clone(),
        })?;
    let item_sel = Selector::parse(&config.item_selector).map_err(|_| CrawlerError::BadSelector {
        selector: config.item_selector.clone(),
    })?;
    let title_sel = Selector::parse("title").expect("static selector");

    let doc = Html::parse_document(html);
    let app_name = doc
        .select(&title_sel)
        .next()
        .map(|t| collapse_whitespace(&t.text().collect::<String>()))
        .unwrap_or_default();

    let mut records = Vec::new();
    let mut containers_matched = 0;
    for container in doc.select(&container_sel) {
        containers_matched += 1;
        for item in container.select(&item_sel) {
            let text = collapse_whitespace(&item.text().collect::<String>());
            if text.is_empty() {
                continue;
            }
            records.push(RawReviewRecord {
                url: url.to_string(),
                app_name: app_name.clone(),
                text,
                fetched_at,
            });
        }
    }
    Ok(ExtractOutcome {
        records,
        containers_matched,
    })
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Crawl result: harvested records plus skip/failure diagnostics.
#[derive(Debug, Clone)]
pub struct CrawlOutcome {
    pub records: Vec<RawReviewRecord>,
    pub diagnostics: Vec<String>,
    pub pages_fetched: usize,
}

/// Crawls the configured seed URLs through `fetcher`.
///
/// Per host, robots.txt is fetched and parsed before any page; disallowed
/// URLs are skipped with a diagnostic, never fetched. Requests to the
/// same host honor `delay_ms` (raised by Crawl-delay when present).
/// Fetching stops after `max_pages` successful page fetches. Failing URLs
/// are skipped with diagnostics; if every attempted fetch fails, the
/// crawl errors.
pub fn crawl(config: &CrawlConfig, fetcher: &dyn PageFetcher) -> Result<CrawlOutcome, CrawlerError> {
    crawl_at(config, fetcher, &mut Utc::now)
}

/// [`crawl`] with an injected clock, for deterministic record timestamps.
pub fn crawl_at(
    config: &CrawlConfig,
    fetcher: &dyn PageFetcher,
    clock: &mut dyn FnMut() -> DateTime<Utc>,
) -> Result<CrawlOutcome, CrawlerError> {
    config.validate()?;
    if config.seed_urls.is_empty() {
        return Err(CrawlerError::BadConfig("no seed URLs".into()));
    }

    let mut robots_cache: HashMap<String, RobotsRules> = HashMap::new();
    let mut last_request: HashMap<String, Instant> = HashMap::new();
    let mut outcome = CrawlOutcome {
        records: Vec::new(),
        diagnostics: Vec::new(),
        pages_fetched: 0,
    };
    let mut attempted = 0usize;

    for seed in &config.seed_urls {
        if outcome.pages_fetched >= config.max_pages {
            outcome
                .diagnostics
                .push(format!("page limit {} reached", config.max_pages));
            break;
        }
        let parsed = match Url::parse(seed) {
            Ok(u) => u,
            Err(e) => {
                outcome.diagnostics.push(format!("invalid URL {seed}: {e}"));
                continue;
            }
        };
        let Some(host) = parsed.host_str() else {
            outcome.diagnostics.push(format!("URL {seed} has no host"));
            continue;
        };
        let origin = match parsed.port() {
            Some(port) => format!("{}://{}:{}", parsed.scheme(), host, port),
            None => format!("{}://{}", parsed.scheme(), host),
        };

        if !robots_cache.contains_key(&origin) {
            let robots_url = format!("{origin}/robots.txt");
            wait_for_host(&origin, config.delay_ms, None, &mut last_request);
            let rules = match fetcher.fetch(&robots_url) {
                Ok(body) => parse_robots(&body, &config.user_agent),
                Err(e) => {
                    outcome
                        .diagnostics
                        .push(format!("robots fetch failed for {origin} ({e}); assuming allow-all"));
                    RobotsRules::allow_all()
                }
            };
            robots_cache.insert(origin.clone(), rules);
        }
        let rules = &robots_cache[&origin];

        match is_allowed(rules, parsed.path()) {
            Ok(true) => {}
            Ok(false) => {
                outcome
                    .diagnostics
                    .push(format!("blocked by robots: {seed}"));
                continue;
            }
            Err(e) => {
                outcome.diagnostics.push(format!("skipping {seed}: {e}"));
                continue;
            }
        }

        wait_for_host(
            &origin,
            config.delay_ms,
            rules.crawl_delay_ms(),
            &mut last_request,
        );
        attempted += 1;
        let body = match fetcher.fetch(seed) {
            Ok(body) => body,
            Err(e) => {
                outcome.diagnostics.push(format!("fetch failed: {seed}: {e}"));
                continue;
            }
        };
        outcome.pages_fetched += 1;
        let extracted = extract_reviews(&body, seed, config, clock())?;
        if extracted.containers_matched == 0 {
            outcome
                .diagnostics
                .push(format!("no review containers matched on {seed}"));
        }
        outcome.records.extend(extracted.records);
    }

    if attempted > 0 && outcome.pages_fetched == 0 {
        return Err(CrawlerError::AllFetchesFailed { attempted });
    }
    Ok(outcome)
}

/// Sleeps until at least the effective delay has passed since the last
/// request to `origin`, then stamps the new request time.
fn wait_for_host(
    origin: &str,
    delay_ms: u64,
    crawl_delay_ms: Option<u64>,
    last_request: &mut HashMap<String, Instant>,
) {
    let effective = delay_ms.max(crawl_delay_ms.unwrap_or(0));
    if let Some(last) = last_request.get(origin) {
        let elapsed = last.elapsed();
        let needed = Duration::from_millis(effective);
        if elapsed < needed {
            std::thread::sleep(needed - elapsed);
        }
    }
    last_request.insert(origin.to_string(), Instant::now());
}

/// Writes crawled records as LINE_RECORDS (one JSON object per line with
/// keys url, app_name, text, fetched_at).
pub fn save_raw_records(
    records: &[RawReviewRecord],
    path: &std::path::Path,
) -> Result<(), CrawlerError> {
    let mut out = Vec::new();
    crate::corpus::write_line_records(records, &mut out).map_err(|source| CrawlerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, out).map_err(|source| CrawlerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Production fetcher: plain blocking HTTP GET with the configured
/// user agent.
pub struct HttpFetcher {
    user_agent: String,
}

impl HttpFetcher {
    pub fn new(user_agent: impl Into<String>) -> Self {
        Self {
            user_agent: user_agent.into(),
        }
    }
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        let mut response = ureq::get(url)
            .header("User-Agent", &self.user_agent)
            .call()
            .map_err(|e| FetchError(e.to_string()))?;
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| FetchError(e.to_string()))
    }
}
