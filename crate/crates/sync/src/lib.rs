//! Moving data out of the home: the gateway that stores events locally and
//! syncs pseudonymized nightly batches, and the platform that ingests them,
//! re-identifies subjects for clinicians only, and serves queries over HTTP.

pub mod batch;
pub mod gateway;
pub mod http;
pub mod platform;

pub use batch::{
    batch_id, open_location, open_location_b64, sha256_hex, BatchError, CryptoError, IngestAck, LocationKey,
    MissingKey, SyncBatch, BATCH_HEADER,
};
pub use gateway::{
    Alert, AlertKind, DeviceReport, Gateway, GatewayError, GatewayStatus, Liveness, MissingDataReport, MissingInterval,
    ReportTotals, SyncOutcome, SyncSummary, Transport, TransportError,
};
pub use http::{router, serve_forever, ApiError, ClientError, PlatformClient, Server};
pub use platform::{
    utc_span, AnalysisResults, AuditOutcome, AuditRow, BatchRecord, Credential, Credentials, Direct, EventPage,
    EventQuery, Identity, LocationBlob, Platform, PlatformError, PseudonymRecord, Rescored, Role, StoredResults,
    SubjectSummary, ThresholdOverrides,
};
