//! One face over the platform, whether it runs in this process or behind
//! HTTP, plus the role tokens used to reach it.

use std::cell::Cell;
use std::path::Path;
use std::sync::{Arc, Mutex};

use carewatch_core::{Pseudonym, Timestamp};
use carewatch_sync::{
    AnalysisResults, ClientError, Credentials, Direct, EventPage, EventQuery, Identity, IngestAck, Platform,
    PlatformClient, PlatformError, Role, StoredResults, SubjectSummary, Transport, TransportError,
};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Bearer tokens, one per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokens {
    pub gateway: String,
    pub clinician: String,
    pub analyst: String,
    pub location: String,
}

impl Tokens {
    pub fn generate() -> Self {
        let t = || format!("{:032x}", rand::random::<u128>());
        Self { gateway: t(), clinician: t(), analyst: t(), location: t() }
    }

    /// Reads `path`, creating it with fresh tokens on first use.
    pub fn load_or_create(path: &Path) -> Result<Self, CliError> {
        let fail = |e: &dyn std::fmt::Display| CliError::component("credentials", format!("{}: {e}", path.display()));
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| fail(&e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let tokens = Self::generate();
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(|e| fail(&e))?;
                }
                std::fs::write(path, serde_json::to_string_pretty(&tokens).expect("tokens")).map_err(|e| fail(&e))?;
                Ok(tokens)
            }
            Err(e) => Err(fail(&e)),
        }
    }

    pub fn credentials(&self) -> Credentials {
        Credentials::default()
            .with(&self.gateway, "gateway", Role::Gateway)
            .with(&self.clinician, "clinician", Role::Clinician)
            .with(&self.analyst, "analyst", Role::Analyst)
            .with(&self.location, "location-analysis", Role::LocationAnalysis)
    }
}

#[derive(Clone)]
pub enum Endpoint {
    Local(Arc<Platform>),
    Remote(String),
}

/// Platform access with every role's token at hand.
#[derive(Clone)]
pub struct Api {
    pub endpoint: Endpoint,
    pub tokens: Tokens,
}

fn local(e: PlatformError) -> CliError {
    match e {
        PlatformError::UnknownPseudonym(_) | PlatformError::NoResults(_) => {
            CliError::NotFound { code: e.code().to_owned(), message: e.to_string() }
        }
        other => CliError::component("platform", other),
    }
}

fn remote(e: ClientError) -> CliError {
    match e.code() {
        Some(code @ ("unknown-pseudonym" | "no-results")) => {
            CliError::NotFound { code: code.to_owned(), message: e.to_string() }
        }
        _ => CliError::component("platform", e),
    }
}

impl Api {
    fn client(&self, token: &str) -> PlatformClient {
        match &self.endpoint {
            Endpoint::Remote(url) => PlatformClient::new(url, token),
            Endpoint::Local(_) => unreachable!("local endpoint has no client"),
        }
    }

    pub fn register(&self, identity: Identity) -> Result<Pseudonym, CliError> {
        match &self.endpoint {
            Endpoint::Local(p) => p.register(p.credential(&self.tokens.clinician), identity).map_err(local),
            Endpoint::Remote(_) => self.client(&self.tokens.clinician).register(&identity).map_err(remote),
        }
    }

    pub fn subjects(&self) -> Result<Vec<SubjectSummary>, CliError> {
        match &self.endpoint {
            Endpoint::Local(p) => p.subjects(p.credential(&self.tokens.analyst)).map_err(local),
            Endpoint::Remote(_) => self.client(&self.tokens.analyst).subjects().map_err(remote),
        }
    }

    pub fn events(&self, pseudonym: &Pseudonym, q: &EventQuery) -> Result<EventPage, CliError> {
        match &self.endpoint {
            Endpoint::Local(p) => p.query_events(p.credential(&self.tokens.analyst), pseudonym, q).map_err(local),
            Endpoint::Remote(_) => self.client(&self.tokens.analyst).events(pseudonym, q).map_err(remote),
        }
    }

    /// Every event in `[from, to)`, fetched page by page.
    pub fn all_events(&self, pseudonym: &Pseudonym, from: Timestamp, to: Timestamp) -> Result<EventPage, CliError> {
        let mut q = EventQuery { limit: Some(100_000), ..EventQuery::range(from, to) };
        let mut page = self.events(pseudonym, &q)?;
        while let Some(next) = page.next_offset {
            q.offset = next;
            let more = self.events(pseudonym, &q)?;
            page.events.extend(more.events);
            page.next_offset = more.next_offset;
        }
        Ok(page)
    }

    pub fn store_results(&self, pseudonym: &Pseudonym, results: AnalysisResults) -> Result<u32, CliError> {
        match &self.endpoint {
            Endpoint::Local(p) => {
                p.store_results(p.credential(&self.tokens.analyst), pseudonym, results).map_err(local)
            }
            Endpoint::Remote(_) => self.client(&self.tokens.analyst).store_results(pseudonym, &results).map_err(remote),
        }
    }

    pub fn results(
        &self,
        pseudonym: &Pseudonym,
        range: Option<(NaiveDate, NaiveDate)>,
        version: Option<u32>,
    ) -> Result<StoredResults, CliError> {
        let found = match &self.endpoint {
            Endpoint::Local(p) => {
                p.query_results(p.credential(&self.tokens.analyst), pseudonym, range, version).map_err(local)?
            }
            Endpoint::Remote(_) => {
                self.client(&self.tokens.analyst).results(pseudonym, range, version).map_err(remote)?
            }
        };
        found.ok_or_else(|| CliError::NotFound {
            code: "no-results".into(),
            message: format!("no analysis results for {pseudonym}"),
        })
    }

    /// The transport a gateway uses to reach this platform.
    pub fn transport(&self) -> Box<dyn Transport + '_> {
        match &self.endpoint {
            Endpoint::Local(p) => Box::new(Direct {
                platform: p,
                credential: p.credential(&self.tokens.gateway).cloned().expect("gateway token is registered"),
            }),
            Endpoint::Remote(_) => Box::new(self.client(&self.tokens.gateway)),
        }
    }
}

/// A gateway's uplink: fails while an injected outage covers the current
/// time and optionally records every frame it lets through.
pub struct Uplink<'a> {
    pub inner: &'a dyn Transport,
    pub outages: Vec<(Timestamp, Timestamp)>,
    pub now: Cell<Timestamp>,
    pub tap: Option<&'a Mutex<Vec<String>>>,
}

impl Transport for Uplink<'_> {
    fn send(&self, frame: &str) -> Result<IngestAck, TransportError> {
        let now = self.now.get();
        if self.outages.iter().any(|(a, b)| (*a..*b).contains(&now)) {
            return Err(TransportError::Unreachable("uplink down".into()));
        }
        if let Some(tap) = self.tap {
            tap.lock().expect("tap").push(frame.to_owned());
        }
        self.inner.send(frame)
    }
}
