//! Run lifecycle, persistence, live metric streams and representation
//! queries, exposed over HTTP.

mod http;
mod hub;
mod manager;
mod query;
mod record;
mod store;

pub use http::{bind_address, router, serve, ApiError, BIND_ENV, DEFAULT_BIND};
pub use hub::{MetricsHub, StreamItem, Subscription};
pub use manager::{ManagerOptions, RunManager};
pub use query::{
    AttributePayload, Component, ComponentPayload, EmbeddingOptions, EmbeddingPayload, EmbeddingPoint, QueryContext,
    SelectionQuery, StructurePayload,
};
pub use record::{RunRecord, RunStatus, RunSummary};
pub use store::{sanitize_id, Event, RunStore};
